#include "pipeline.hpp"

#include "rup/mesh_index.hpp"
#include "rup/obj_io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace rup::cli {

using nlohmann::ordered_json;

namespace {

ordered_json vecJson(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

Vec3 vecFrom(const ordered_json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw InputError("expected a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ordered_json transformJson(const RigidTransform& t) {
  return {{"axis_angle", vecJson(t.axisAngle())}, {"translation", vecJson(t.translation())}};
}

ordered_json readJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void requireFormat(const ordered_json& j, const char* format, const fs::path& path) {
  if (!j.is_object() || j.value("format", "") != format || j.value("version", 0) != 1) {
    throw InputError(path.string() + ": expected " + format + " version 1");
  }
}

fs::path sidecar(const fs::path& path) { return fs::path(path.string() + ".json"); }

ordered_json pixelCounts(const RupStack& maps) {
  ordered_json out = ordered_json::array();
  for (int c = 0; c < maps.channels; ++c) {
    int n = 0;
    for (size_t i = maps.index(c, 0, 0); i < maps.index(c + 1, 0, 0); ++i) {
      n += maps.values[i] > 0.5 ? 1 : 0;
    }
    out.push_back(n);
  }
  return out;
}

// Surface point, normal and inward coarse displacement at a sample.
struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

SurfaceSample snap(const MeshIndex& object, const Vec3& p) {
  const ClosestPoint cp = object.closestPoint(p);
  return {cp.point, object.mesh().normalOnFace(cp.face, cp.u, cp.v)};
}

Vec3 coarseDisplacement(const MeshIndex& object, const SurfaceSample& s, double degree) {
  if (degree <= 0.0) {
    return Vec3::Zero();
  }
  const MaxDeformation d = maxDeformation(object, s.point, s.normal);
  return d.finite ? Vec3(coarseDeformation(s.point, s.normal, degree, d.distance) - s.point)
                  : Vec3::Zero();
}

bool nearContact(const SampleTag& tag, const ContactMapStack& contact) {
  const RupStack& m = contact.objectMaps;
  if (tag.role != RupRole::ObjectNear || tag.u < 0) {
    return false;
  }
  if (tag.channel >= m.channels || tag.u >= m.width || tag.v >= m.height) {
    throw InputError("samples do not match the contact map resolution");
  }
  return m.at(tag.channel, tag.v, tag.u) > 0.5;
}

}  // namespace

void Settings::validate() const {
  if (res < 4 || res > 1024) {
    throw InputError("--res must be in [4, 1024]");
  }
  if (grid < 1 || res % grid != 0) {
    throw InputError("--grid must divide --res");
  }
  if (!(thresholdMm > 0.0) || thresholdMm > 100.0) {
    throw InputError("--threshold-mm must be in (0, 100]");
  }
  if (nodes <= kDefaultNeighbors) {
    throw InputError("graph needs more nodes than neighbors");
  }
}

std::string sha256File(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << text;
}

std::string handPoseJson(const HandPose& pose, const HandPose* increments) {
  auto rotations = [](const HandPose& p) {
    ordered_json r = ordered_json::array();
    for (const Vec3& v : p.rotations) {
      r.push_back(vecJson(v));
    }
    return r;
  };
  ordered_json j;
  j["format"] = "rup-hand-pose";
  j["version"] = 1;
  j["rotations"] = rotations(pose);
  j["root"] = vecJson(pose.root);
  if (increments) {
    j["increments"] = {{"rotations", rotations(*increments)}, {"root", vecJson(increments->root)}};
  }
  return j.dump(2) + "\n";
}

HandPose loadHandPose(const fs::path& path) {
  const ordered_json j = readJson(path);
  requireFormat(j, "rup-hand-pose", path);
  try {
    HandPose pose;
    const auto& r = j.at("rotations");
    if (r.size() != kBoneCount) {
      throw InputError(path.string() + ": pose needs 16 rotations");
    }
    for (int b = 0; b < kBoneCount; ++b) {
      pose.rotations[b] = vecFrom(r[b]);
    }
    pose.root = vecFrom(j.at("root"));
    return pose;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// unwrap

UnwrapResult unwrapScene(const Scene& scene, int res) {
  return unwrapAll(scene.hand(), scene.placedObject(), res, res);
}

void saveUnwrap(const fs::path& path, const UnwrapResult& stacks, const std::string& sceneName) {
  const std::vector<RupStack> all{stacks.hand, stacks.objectNear, stacks.objectFar};
  saveRups(path, all);
  ordered_json j;
  j["format"] = "rup-unwrap";
  j["version"] = 1;
  j["scene"] = sceneName;
  j["rups"] = path.filename().string();
  j["resolution"] = {stacks.hand.height, stacks.hand.width};
  ordered_json centers = ordered_json::array();
  for (const Vec3& c : stacks.hand.centers) {
    centers.push_back(vecJson(c));
  }
  j["centers"] = centers;
  ordered_json counts = ordered_json::object();
  for (const RupStack* s : {&stacks.hand, &stacks.objectNear, &stacks.objectFar}) {
    counts[roleName(s->role)] =
        std::count_if(s->values.begin(), s->values.end(), [](double v) { return v > 0.0; });
  }
  j["nonzero_pixels"] = counts;
  writeText(sidecar(path), j.dump(2) + "\n");
}

UnwrapResult loadUnwrap(const fs::path& path) {
  std::vector<RupStack> stacks = loadRups(path);
  if (stacks.size() != 3 || stacks[0].role != RupRole::Hand ||
      stacks[1].role != RupRole::ObjectNear || stacks[2].role != RupRole::ObjectFar) {
    throw InputError(path.string() + ": expected hand, object-near and object-far stacks");
  }
  return {std::move(stacks[0]), std::move(stacks[1]), std::move(stacks[2])};
}

// ---------------------------------------------------------------------------
// contact-gt

ContactStage contactStage(const Scene& scene, const UnwrapResult& stacks, double threshold) {
  if (!stacks.objectNear.hasHits() || !stacks.hand.hasHits()) {
    throw InputError("contact-gt needs stacks with hit records");
  }
  const ArticulatedHand hand = scene.hand();
  const MeshIndex handIndex(hand.surface);
  const MeshIndex objectIndex(scene.placedObject());
  ContactStage out;
  out.threshold = threshold;
  out.maps = contactGt(stacks.hand, stacks.objectNear, handIndex, objectIndex, threshold);
  if (const auto deformed = scene.placedDeformedObject()) {
    out.hasTruth = true;
    const std::vector<double> pix =
        pixelDegrees(stacks.objectNear, objectIndex, *deformed, &out.diagnostics);
    out.maps.degrees = regionDegreeGt(out.maps.objectMaps, pix);
  }
  return out;
}

std::string ContactStage::reportJson() const {
  ordered_json j;
  j["format"] = "rup-contact";
  j["version"] = 1;
  j["threshold_mm"] = threshold * 1000.0;
  j["ground_truth_deformation"] = hasTruth;
  j["region_degrees"] = maps.degrees;
  j["degree_diagnostics"] = {{"evaluated", diagnostics.evaluated},
                             {"clamped_high", diagnostics.clampedHigh},
                             {"infinite_depth", diagnostics.infiniteDepth}};
  j["contact_pixels"] = {{"hand", pixelCounts(maps.handMaps)},
                         {"object", pixelCounts(maps.objectMaps)}};
  return j.dump(2) + "\n";
}

void saveContact(const fs::path& path, const ContactStage& stage) {
  const std::vector<RupStack> all{stage.maps.handMaps, stage.maps.objectMaps};
  saveRups(path, all);
  writeText(sidecar(path), stage.reportJson());
}

ContactMapStack loadContact(const fs::path& path) {
  std::vector<RupStack> stacks = loadRups(path);
  if (stacks.size() != 2 || stacks[0].role != RupRole::HandContact ||
      stacks[1].role != RupRole::ObjectContact) {
    throw InputError(path.string() + ": expected hand and object contact maps");
  }
  const fs::path report = sidecar(path);
  const ordered_json j = readJson(report);
  requireFormat(j, "rup-contact", report);
  ContactMapStack out;
  out.handMaps = std::move(stacks[0]);
  out.objectMaps = std::move(stacks[1]);
  const auto& d = j.at("region_degrees");
  if (!d.is_array() || d.size() != kRegionCount) {
    throw InputError(report.string() + ": 16 region degrees expected");
  }
  for (int i = 0; i < kRegionCount; ++i) {
    out.degrees[i] = d[i].get<double>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// grid_sample

SampledPointSet sampleStage(const UnwrapResult& stacks, int grid) {
  return gridSample(stacks.objectNear, stacks.objectFar, grid);
}

void saveSamples(const fs::path& path, const SampledPointSet& samples, int grid) {
  ordered_json j;
  j["format"] = "rup-samples";
  j["version"] = 1;
  j["grid"] = grid;
  j["count"] = samples.size();
  j["valid"] = samples.validCount();
  j["mask_point"] = vecJson(samples.maskPoint);
  // role, channel, cell row, cell col, u, v, valid, x, y, z
  ordered_json rows = ordered_json::array();
  for (size_t i = 0; i < samples.size(); ++i) {
    const SampleTag& t = samples.tags[i];
    const Vec3& p = samples.points[i];
    rows.push_back({static_cast<int>(t.role), t.channel, t.cellRow, t.cellCol, t.u, t.v,
                    static_cast<int>(samples.valid[i]), p.x(), p.y(), p.z()});
  }
  j["samples"] = rows;
  writeText(path, j.dump() + "\n");
}

SampledPointSet loadSamples(const fs::path& path) {
  const ordered_json j = readJson(path);
  requireFormat(j, "rup-samples", path);
  try {
    SampledPointSet out;
    out.maskPoint = vecFrom(j.at("mask_point"));
    for (const auto& r : j.at("samples")) {
      if (!r.is_array() || r.size() != 10) {
        throw InputError(path.string() + ": malformed sample row");
      }
      SampleTag t;
      t.role = static_cast<RupRole>(r[0].get<int>());
      t.channel = r[1].get<int>();
      t.cellRow = r[2].get<int>();
      t.cellCol = r[3].get<int>();
      t.u = r[4].get<int>();
      t.v = r[5].get<int>();
      out.tags.push_back(t);
      out.valid.push_back(static_cast<uint8_t>(r[6].get<int>()));
      out.points.emplace_back(r[7].get<double>(), r[8].get<double>(), r[9].get<double>());
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// fit

FitStage fitStage(const TriangleMesh& object, const SampledPointSet& samples,
                  const ContactMapStack& contact, int nodes) {
  const MeshIndex index(object);
  std::vector<Vec3> points;
  std::vector<Vec3> targets;
  FitStage out;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (!samples.valid[i]) {
      continue;
    }
    const SurfaceSample s = snap(index, samples.points[i]);
    Vec3 target = s.point;
    if (nearContact(samples.tags[i], contact)) {
      ++out.contactPoints;
      target += coarseDisplacement(index, s, contact.degrees[samples.tags[i].channel]);
    }
    points.push_back(s.point);
    targets.push_back(target);
  }
  out.points = static_cast<int>(points.size());
  if (out.points < nodes) {
    throw InputError("fit: " + std::to_string(out.points) + " valid samples for " +
                     std::to_string(nodes) + " graph nodes");
  }
  out.graph = buildGraph(points, nodes);
  out.fit = fitGraph(out.graph, points, targets);
  out.graph.transforms = out.fit.transforms;
  for (const RigidTransform& t : out.graph.transforms) {
    out.maxAxisAngle = std::max(out.maxAxisAngle, t.axisAngle().norm());
    out.maxTranslation = std::max(out.maxTranslation, t.translation().norm());
  }
  out.deformed = applyObjectDeformation(object, out.graph);
  return out;
}

std::string FitStage::reportJson() const {
  ordered_json j;
  j["format"] = "rup-fit";
  j["version"] = 1;
  j["nodes"] = graph.size();
  j["points"] = points;
  j["contact_points"] = contactPoints;
  j["initial_energy"] = fit.initialEnergy;
  j["energy"] = fit.energy;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["max_axis_angle"] = maxAxisAngle;
  j["max_translation_mm"] = maxTranslation * 1000.0;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// refine

RefineStage refineStage(const Scene& scene, const UnwrapResult& stacks,
                        const ContactMapStack& contact, const TriangleMesh& deformedObject,
                        const RefineSettings& settings) {
  const ArticulatedHand hand = scene.hand();
  const TriangleMesh placed = scene.placedObject();
  RefineStage out{
      RefinementProblem{scene.rig(), scene.pose, deformedObject,
                        mapsToVertices(contact.handMaps, stacks.hand, hand.surface),
                        mapsToVertices(contact.objectMaps, stacks.objectNear, placed), settings},
      {}, {}, {}};
  out.result = refinePoses(out.problem);
  out.hand = refinedHand(out.problem, out.result);
  out.object = refinedObject(out.problem, out.result);
  return out;
}

std::string RefineStage::reportJson() const {
  auto energy = [](const RefineEnergy& e) {
    return ordered_json{{"attraction", e.attraction},
                        {"penetration", e.penetration},
                        {"regularization", e.regularization},
                        {"total", e.total}};
  };
  ordered_json j;
  j["format"] = "rup-refine";
  j["version"] = 1;
  j["iterations"] = result.iterations;
  j["accepted"] = result.accepted;
  j["converged"] = result.converged;
  j["aborted"] = result.aborted;
  j["initial_energy"] = energy(result.initial);
  j["final_energy"] = energy(result.final);
  j["initial_penetration_mm"] = result.initialPenetrationMm;
  j["final_penetration_mm"] = result.finalPenetrationMm;
  j["hand_targets"] = std::count_if(problem.handTargets.begin(), problem.handTargets.end(),
                                    [&](double t) { return t > problem.settings.contactThreshold; });
  j["object_targets"] =
      std::count_if(problem.objectTargets.begin(), problem.objectTargets.end(),
                    [&](double t) { return t > problem.settings.contactThreshold; });
  return j.dump(2) + "\n";
}

std::string RefineStage::energyCsv() const {
  std::string out = "step,energy\n";
  char buf[64];
  for (size_t i = 0; i < result.energyTrace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, result.energyTrace[i]);
    out += buf;
  }
  return out;
}

std::vector<std::string> saveRefine(const fs::path& dir, const RefineStage& stage,
                                    const Scene& scene) {
  writeText(dir / "hand_pose.json", handPoseJson(stage.result.pose, &stage.result.increments));
  ordered_json pose;
  pose["format"] = "rup-object-pose";
  pose["version"] = 1;
  pose["delta"] = transformJson(stage.result.objectPose);
  pose["placement"] = transformJson(stage.result.objectPose * scene.objectPose);
  writeText(dir / "object_pose.json", pose.dump(2) + "\n");
  saveObj(dir / "object_refined.obj", stage.object);
  writeText(dir / "energy.csv", stage.energyCsv());
  writeText(dir / "refine.json", stage.reportJson());
  return {"hand_pose.json", "object_pose.json", "object_refined.obj", "energy.csv", "refine.json"};
}

// ---------------------------------------------------------------------------
// forward

ForwardStage forwardStage(const Scene& scene, const Settings& settings, nn::Init init,
                          const fs::path& weights) {
  const ArticulatedHand hand = scene.hand();
  const MeshIndex object(scene.placedObject());
  const UnwrapResult stacks = unwrapAll(hand, object.mesh(), settings.res, settings.res);
  const SampledPointSet samples = gridSample(stacks.objectNear, stacks.objectFar, settings.grid);

  nn::RuFormerConfig config;
  config.seed = settings.seed;
  config.init = init;
  config.pointTokens = static_cast<int>(samples.size());
  nn::RuFormer model(config);
  if (!weights.empty()) {
    model.load(weights);
  }
  const int poolRows = 8;
  nn::RegionInputs inputs{nn::syntheticFeatures(settings.seed, 1, kRegionCount, config.imageDim),
                          nn::boneFeatures(hand),
                          nn::rupPoolFeatures(stacks.hand, poolRows, config.handRupDim / poolRows),
                          nn::rupPoolFeatures(stacks.objectNear, poolRows,
                                              config.objectRupDim / poolRows)};

  // contact prediction first; its maps and degrees shape the point tokens
  const nn::MatD contactTokens =
      model.contactAttention(model.embedRegional(inputs)).cast<double>();
  const std::vector<double> degrees = model.degreeHead().forward(contactTokens);
  ContactMapStack predicted = model.mapHead().forward(contactTokens, stacks.hand, stacks.objectNear);
  std::copy(degrees.begin(), degrees.end(), predicted.degrees.begin());

  ForwardStage out;
  out.init = init == nn::Init::Identity ? "identity" : "random";
  out.pointCount = static_cast<int>(samples.size());
  std::vector<uint8_t> contact(samples.size(), 0);
  std::vector<Vec3> displacement(samples.size(), Vec3::Zero());
  std::vector<Vec3> validPoints;
  std::vector<size_t> validIndex;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (!samples.valid[i]) {
      continue;
    }
    validPoints.push_back(samples.points[i]);
    validIndex.push_back(i);
    if (nearContact(samples.tags[i], predicted)) {
      contact[i] = 1;
      ++out.contactPoints;
      displacement[i] = coarseDisplacement(object, snap(object, samples.points[i]),
                                           predicted.degrees[samples.tags[i].channel]);
    }
  }
  std::vector<uint8_t> nodeFlag(samples.size(), 0);
  if (static_cast<int>(validPoints.size()) > settings.nodes) {
    for (int k : farthestPointSampling(validPoints, settings.nodes)) {
      nodeFlag[validIndex[k]] = 1;
    }
  } else {
    for (size_t i : validIndex) {
      nodeFlag[i] = 1;
    }
  }
  const nn::PointTokens tokens =
      nn::assemblePointTokens(samples.points, contact, displacement, nodeFlag, model.maskEmbedding());
  out.output = model.forward(inputs, tokens, &stacks.hand, &stacks.objectNear);
  return out;
}

std::string ForwardStage::reportJson() const {
  ordered_json j;
  j["format"] = "rup-forward";
  j["version"] = 1;
  j["init"] = init;
  j["region_tokens"] = {output.contactTokens.rows(), output.contactTokens.cols()};
  j["point_tokens"] = {output.deformTokens.rows(), output.deformTokens.cols()};
  j["points"] = pointCount;
  j["contact_points"] = contactPoints;
  j["degrees"] = output.degrees;
  j["contact_pixels"] = {{"hand", pixelCounts(output.maps.handMaps)},
                         {"object", pixelCounts(output.maps.objectMaps)}};
  ordered_json transforms = ordered_json::array();
  for (size_t k = 0; k < output.transforms.size(); ++k) {
    ordered_json t = transformJson(output.transforms[k]);
    t["token"] = output.nodeTokens[k];
    transforms.push_back(t);
  }
  j["transforms"] = transforms;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// metrics

MetricsReport metricsStage(const ArticulatedHand& pred, const ArticulatedHand& gt,
                           const TriangleMesh& object) {
  MetricsReport r;
  r.mpjpe = mpjpe(pred.joints, gt.joints);
  r.mpvpe = mpvpe(pred.surface.vertices(), gt.surface.vertices());
  r.maxPenetration = maxPenetration(pred.surface, object);
  r.intersection = intersectionVolumeReport(pred.surface, object);
  return r;
}

// ---------------------------------------------------------------------------
// pipeline

StageError::StageError(std::string stage, int code, const std::string& message)
    : std::runtime_error("stage " + stage + ": " + message), stage_(std::move(stage)), code_(code) {}

std::string StageError::json() const {
  ordered_json j;
  j["stage"] = stage_;
  j["code"] = code_;
  j["kind"] = code_ == kExitInput ? "input_error"
              : code_ == kExitNumerical ? "numerical_error"
                                        : "error";
  j["message"] = what();
  return j.dump();
}

int exitCodeFor(const std::exception& e) {
  if (const auto* s = dynamic_cast<const StageError*>(&e)) {
    return s->code();
  }
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitInput;
  }
  if (dynamic_cast<const NumericalError*>(&e)) {
    return kExitNumerical;
  }
  return 1;
}

namespace {

template <class F>
auto runStage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw StageError(name, exitCodeFor(e), e.what());
  }
}

}  // namespace

PipelineResult runPipeline(const fs::path& sceneFile, const Settings& settings,
                           const fs::path& outDir) {
  runStage("setup", [&] {
    settings.validate();
    fs::create_directories(outDir);
    return 0;
  });
  const Scene scene = runStage("scene", [&] { return loadScene(sceneFile); });

  PipelineResult out;
  auto record = [&](std::string name, std::vector<std::string> files) {
    out.stages.push_back({std::move(name), std::move(files)});
  };

  const UnwrapResult stacks = runStage("unwrap", [&] {
    UnwrapResult s = unwrapScene(scene, settings.res);
    saveUnwrap(outDir / "unwrap.rups", s, sceneFile.filename().string());
    return s;
  });
  record("unwrap", {"unwrap.rups", "unwrap.rups.json"});

  const ContactStage contact = runStage("contact-gt", [&] {
    ContactStage c = contactStage(scene, stacks, settings.threshold());
    saveContact(outDir / "contact.rups", c);
    return c;
  });
  record("contact-gt", {"contact.rups", "contact.rups.json"});

  const SampledPointSet samples = runStage("grid_sample", [&] {
    SampledPointSet s = sampleStage(stacks, settings.grid);
    saveSamples(outDir / "samples.json", s, settings.grid);
    return s;
  });
  record("grid_sample", {"samples.json"});

  out.fit = runStage("fit", [&] {
    FitStage f = fitStage(scene.placedObject(), samples, contact.maps, settings.nodes);
    saveGraph(outDir / "graph.json", f.graph);
    saveObj(outDir / "object_deformed.obj", f.deformed);
    writeText(outDir / "fit.json", f.reportJson());
    return f;
  });
  record("fit", {"graph.json", "object_deformed.obj", "fit.json"});

  RefineStage refined = runStage("refine", [&] {
    RefineStage r = refineStage(scene, stacks, contact.maps, out.fit.deformed, settings.refine);
    record("refine", saveRefine(outDir, r, scene));
    return r;
  });

  out.metrics = runStage("metrics", [&] {
    MetricsReport m = metricsStage(refined.hand, scene.hand(), refined.object);
    writeText(outDir / "metrics.json", m.toJson());
    return m;
  });
  record("metrics", {"metrics.json"});

  runStage("manifest", [&] {
    ordered_json j;
    j["format"] = "rup-manifest";
    j["version"] = 1;
    j["scene"] = {{"file", sceneFile.filename().string()}, {"sha256", sha256File(sceneFile)}};
    const RefineSettings& r = settings.refine;
    j["settings"] = {{"seed", settings.seed},
                     {"res", settings.res},
                     {"grid", settings.grid},
                     {"threshold_mm", settings.thresholdMm},
                     {"nodes", settings.nodes},
                     {"refine",
                      {{"max_iterations", r.maxIterations},
                       {"w_att", r.wAtt},
                       {"w_pen", r.wPen},
                       {"w_reg", r.wReg},
                       {"contact_threshold", r.contactThreshold}}}};
    ordered_json stages = ordered_json::array();
    for (const StageOutput& s : out.stages) {
      ordered_json files = ordered_json::array();
      for (const std::string& f : s.files) {
        files.push_back({{"file", f},
                         {"bytes", fs::file_size(outDir / f)},
                         {"sha256", sha256File(outDir / f)}});
      }
      stages.push_back({{"name", s.name}, {"status", "ok"}, {"outputs", files}});
    }
    j["stages"] = stages;
    out.manifest = outDir / "manifest.json";
    writeText(out.manifest, j.dump(2) + "\n");
    return 0;
  });
  return out;
}

}  // namespace rup::cli
