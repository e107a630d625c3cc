#pragma once

#include "rup/mesh_index.hpp"
#include "rup/unwrap.hpp"

#include <array>
#include <span>
#include <vector>

namespace rup {

inline constexpr double kDefaultContactThreshold = 0.002;
inline constexpr double kDefaultLambda1 = 1000.0;
inline constexpr double kDegreeClampEps = 1e-7;

/// Per-pixel contact probabilities for both surfaces plus one deformed degree
/// per region. Maps share the layout of the stacks they were derived from.
struct ContactMapStack {
  RupStack handMaps;
  RupStack objectMaps;
  std::array<double, kRegionCount> degrees{};

  ContactMapStack() = default;
  ContactMapStack(int height, int width, const std::array<Vec3, kRegionCount>& centers);
};

/// Binary ground-truth contact: a pixel is 1 when its back-projected point lies
/// within `threshold` of the other surface. Object maps follow the object-near stack.
ContactMapStack contactGt(const RupStack& handStack, const RupStack& objectStack,
                          const MeshIndex& hand, const MeshIndex& object,
                          double threshold = kDefaultContactThreshold);

/// Distance along -n from a surface point to the opposite wall.
struct MaxDeformation {
  double distance = 0.0;  // +inf when no wall is hit
  bool finite = false;
};

MaxDeformation maxDeformation(const MeshIndex& object, const Vec3& p, const Vec3& n);

struct DegreeDiagnostics {
  int evaluated = 0;
  int clampedHigh = 0;    // |PP'| > d_PQ
  int infiniteDepth = 0;  // skipped: no opposite wall
};

/// |p_def - p_orig| / d_PQ clamped to [0,1]. Throws InputError for d_PQ <= 0 or inf.
double deformedDegree(const Vec3& pOrig, const Vec3& pDef, double dPQ,
                      DegreeDiagnostics* diag = nullptr);

/// Mean degree over the pixels of each channel whose contact value is > 0.5.
std::array<double, kRegionCount> regionDegreeGt(const RupStack& contactMaps,
                                                std::span<const double> pixelDegrees);

/// Per-pixel degree for every object pixel: the pixel's face point is
/// interpolated on the template and the deformed mesh (same topology).
/// Needs a stack with hit records. Pixels without a finite d_PQ get 0.
std::vector<double> pixelDegrees(const RupStack& objectStack, const MeshIndex& templateObject,
                                 const TriangleMesh& deformedObject, DegreeDiagnostics* diag = nullptr);

/// p - n * degree * d_PQ. Throws NumericalError for an infinite d_PQ.
Vec3 coarseDeformation(const Vec3& p, const Vec3& n, double degree, double dPQ);

/// Applies coarseDeformation at every vertex with a nonzero degree.
TriangleMesh coarseDeformVertices(const MeshIndex& object, std::span<const double> vertexDegrees);

struct LossTerms {
  double maps = 0.0;     // L_M
  double degrees = 0.0;  // L_D
  double total = 0.0;    // L_C
};

struct LossGradient {
  std::vector<double> handMaps;
  std::vector<double> objectMaps;
  std::array<double, kRegionCount> degrees{};
};

/// Sum of squared errors over all hand and object pixels.
double lossContactMaps(const ContactMapStack& pred, const ContactMapStack& gt);

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double lossDegrees(std::span<const double> pred, std::span<const double> gt);

double lossTotal(double lossMaps, std::span<const double> predDegrees,
                 std::span<const double> gtDegrees, double lambda1 = kDefaultLambda1);

/// All three terms, with analytic gradients w.r.t. the predictions when `grad` is set.
LossTerms contactLoss(const ContactMapStack& pred, const ContactMapStack& gt,
                      double lambda1 = kDefaultLambda1, LossGradient* grad = nullptr);

}  // namespace rup
