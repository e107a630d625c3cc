#pragma once
// Stage functions behind the `rup` subcommands and the pipeline driver.

#include "rup/contact.hpp"
#include "rup/deform_graph.hpp"
#include "rup/metrics.hpp"
#include "rup/refine.hpp"
#include "rup/ruformer.hpp"
#include "rup/synth.hpp"
#include "rup/unwrap.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace rup::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct Settings {
  uint64_t seed = 0;
  int res = kDefaultResolution;
  int grid = kDefaultGrid;
  double thresholdMm = kDefaultContactThreshold * 1000.0;
  int nodes = kDefaultNodeCount;
  RefineSettings refine;

  double threshold() const { return thresholdMm * 1e-3; }
  /// Throws InputError for out-of-range values.
  void validate() const;
};

std::string sha256File(const fs::path& path);
void writeText(const fs::path& path, const std::string& text);

// Pose files
std::string handPoseJson(const HandPose& pose, const HandPose* increments = nullptr);
HandPose loadHandPose(const fs::path& path);

// unwrap
UnwrapResult unwrapScene(const Scene& scene, int res);
/// RUPS file with the hand, object-near and object-far stacks plus `<path>.json`.
void saveUnwrap(const fs::path& path, const UnwrapResult& stacks, const std::string& sceneName);
UnwrapResult loadUnwrap(const fs::path& path);

// contact-gt
struct ContactStage {
  ContactMapStack maps;
  DegreeDiagnostics diagnostics;
  double threshold = 0.0;
  bool hasTruth = false;

  std::string reportJson() const;
};
/// Binary contact maps; region degrees come from the scene's ground-truth
/// deformation (all zero without one).
ContactStage contactStage(const Scene& scene, const UnwrapResult& stacks, double threshold);
/// RUPS file with hand and object contact maps plus `<path>.json` (report with degrees).
void saveContact(const fs::path& path, const ContactStage& stage);
ContactMapStack loadContact(const fs::path& path);

// grid_sample
SampledPointSet sampleStage(const UnwrapResult& stacks, int grid);
void saveSamples(const fs::path& path, const SampledPointSet& samples, int grid);
SampledPointSet loadSamples(const fs::path& path);

// fit
struct FitStage {
  DeformationGraph graph;
  FitResult fit;
  TriangleMesh deformed;
  int points = 0;
  int contactPoints = 0;
  double maxAxisAngle = 0.0;
  double maxTranslation = 0.0;

  std::string reportJson() const;
};
/// Graph over the valid samples, fitted to the coarse deformation of the
/// object-near contact samples (others stay in place).
FitStage fitStage(const TriangleMesh& object, const SampledPointSet& samples,
                  const ContactMapStack& contact, int nodes);

// refine
struct RefineStage {
  RefinementProblem problem;
  RefineResult result;
  ArticulatedHand hand;
  TriangleMesh object;

  std::string reportJson() const;
  std::string energyCsv() const;
};
RefineStage refineStage(const Scene& scene, const UnwrapResult& stacks,
                        const ContactMapStack& contact, const TriangleMesh& deformedObject,
                        const RefineSettings& settings);
/// Writes hand_pose.json, object_pose.json, object_refined.obj, energy.csv and
/// refine.json; returns the file names.
std::vector<std::string> saveRefine(const fs::path& dir, const RefineStage& stage,
                                    const Scene& scene);

// forward
struct ForwardStage {
  nn::ForwardOutput output;
  int pointCount = 0;
  int contactPoints = 0;
  std::string init;

  std::string reportJson() const;
};
/// Synthetic image features, pooled RUP features and bone transforms through the
/// toy network. Maps and degrees come first; contact samples then carry their
/// coarse displacement into the point tokens.
ForwardStage forwardStage(const Scene& scene, const Settings& settings, nn::Init init,
                          const fs::path& weights = {});

// metrics
MetricsReport metricsStage(const ArticulatedHand& pred, const ArticulatedHand& gt,
                           const TriangleMesh& object);

// pipeline
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, int code, const std::string& message);
  const std::string& stage() const { return stage_; }
  int code() const { return code_; }
  std::string json() const;

 private:
  std::string stage_;
  int code_;
};

struct StageOutput {
  std::string name;
  std::vector<std::string> files;  // relative to the output directory
};

struct PipelineResult {
  std::vector<StageOutput> stages;
  FitStage fit;
  MetricsReport metrics;
  fs::path manifest;
};

/// unwrap -> contact-gt -> grid_sample -> fit -> refine -> metrics, writing every
/// intermediate into `outDir` and a manifest of SHA-256 hashes. Throws StageError.
PipelineResult runPipeline(const fs::path& sceneFile, const Settings& settings,
                           const fs::path& outDir);

/// Exit code for an exception: 2 input, 3 numerical, 1 otherwise.
int exitCodeFor(const std::exception& e);

}  // namespace rup::cli
