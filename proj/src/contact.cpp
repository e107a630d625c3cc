#include "rup/contact.hpp"

#include "rup/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rup {

ContactMapStack::ContactMapStack(int height, int width,
                                 const std::array<Vec3, kRegionCount>& centers)
    : handMaps(RupRole::HandContact, height, width, centers),
      objectMaps(RupRole::ObjectContact, height, width, centers) {}

namespace {

void requireSameShape(const RupStack& a, const RupStack& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels ||
      a.values.size() != b.values.size()) {
    throw InputError(std::string(what) + ": stack shapes differ");
  }
}

void markContact(const RupStack& stack, const MeshIndex& other, double threshold, RupStack& maps) {
  for (int c = 0; c < stack.channels; ++c) {
    for (int v = 0; v < stack.height; ++v) {
      for (int u = 0; u < stack.width; ++u) {
        if (stack.at(c, v, u) <= 0.0) {
          continue;
        }
        const Vec3 p = backProjectPixel(stack, c, v, u);
        maps.at(c, v, u) = other.closestPoint(p).distance <= threshold ? 1.0 : 0.0;
      }
    }
  }
}

// hits closer than this fraction of the bounding diagonal count as the start face
double selfHitGuard(const MeshIndex& object) {
  const auto box = object.mesh().bounds();
  return std::max(kRayEpsilon, 1e-7 * box.diagonal().norm());
}

}  // namespace

ContactMapStack contactGt(const RupStack& handStack, const RupStack& objectStack,
                          const MeshIndex& hand, const MeshIndex& object, double threshold) {
  requireSameShape(handStack, objectStack, "contact_gt");
  if (!(threshold >= 0.0)) {
    throw InputError("contact threshold must be non-negative");
  }
  ContactMapStack out(handStack.height, handStack.width, handStack.centers);
  markContact(handStack, object, threshold, out.handMaps);
  markContact(objectStack, hand, threshold, out.objectMaps);
  return out;
}

MaxDeformation maxDeformation(const MeshIndex& object, const Vec3& p, const Vec3& n) {
  MaxDeformation out{std::numeric_limits<double>::infinity(), false};
  if (n.squaredNorm() == 0.0) {
    return out;
  }
  const double guard = selfHitGuard(object);
  const Vec3 d = -n.normalized();
  // a ray through a vertex can slip between the incident faces; retry slightly tilted
  const Vec3 a = d.unitOrthogonal();
  const Vec3 b = d.cross(a);
  const double tilt = 1e-6;
  for (const Vec3& dir : {d, Vec3(d + tilt * a), Vec3(d - tilt * a), Vec3(d + tilt * b),
                          Vec3(d - tilt * b)}) {
    for (const RayHit& h : object.castAll(p, dir.normalized())) {
      if (h.t > guard) {
        out.distance = h.t;
        out.finite = true;
        return out;
      }
    }
  }
  return out;
}

double deformedDegree(const Vec3& pOrig, const Vec3& pDef, double dPQ, DegreeDiagnostics* diag) {
  if (!(dPQ > 0.0) || !std::isfinite(dPQ)) {
    throw InputError("deformed degree needs a positive finite d_PQ");
  }
  double v = (pDef - pOrig).norm() / dPQ;
  if (diag) {
    ++diag->evaluated;
  }
  if (v > 1.0) {
    v = 1.0;
    if (diag) {
      ++diag->clampedHigh;
    }
  }
  return v;
}

std::array<double, kRegionCount> regionDegreeGt(const RupStack& contactMaps,
                                                std::span<const double> pixelDegrees) {
  if (pixelDegrees.size() != contactMaps.values.size()) {
    throw InputError("region_degree_gt: degree count does not match the maps");
  }
  std::array<double, kRegionCount> out{};
  std::vector<double> picked;
  for (int c = 0; c < contactMaps.channels && c < kRegionCount; ++c) {
    picked.clear();
    for (size_t i = contactMaps.index(c, 0, 0); i < contactMaps.index(c + 1, 0, 0); ++i) {
      if (contactMaps.values[i] > 0.5) {
        picked.push_back(std::clamp(pixelDegrees[i], 0.0, 1.0));
      }
    }
    out[c] = picked.empty() ? 0.0 : pairwiseSum(picked) / static_cast<double>(picked.size());
  }
  return out;
}

std::vector<double> pixelDegrees(const RupStack& objectStack, const MeshIndex& templateObject,
                                 const TriangleMesh& deformedObject, DegreeDiagnostics* diag) {
  if (!objectStack.hasHits()) {
    throw InputError("pixel degrees need a stack with hit records");
  }
  const TriangleMesh& tmpl = templateObject.mesh();
  if (deformedObject.vertexCount() != tmpl.vertexCount() ||
      deformedObject.faces() != tmpl.faces()) {
    throw InputError("deformed object must share the template topology");
  }
  std::vector<double> out(objectStack.values.size(), 0.0);
  for (size_t i = 0; i < out.size(); ++i) {
    if (objectStack.values[i] <= 0.0) {
      continue;
    }
    const RayHit& h = objectStack.hits[i];
    const Vec3 p = tmpl.pointOnFace(h.face, h.u, h.v);
    const Vec3 n = tmpl.normalOnFace(h.face, h.u, h.v);
    const MaxDeformation d = maxDeformation(templateObject, p, n);
    if (!d.finite) {
      if (diag) {
        ++diag->infiniteDepth;
      }
      continue;
    }
    out[i] = deformedDegree(p, deformedObject.pointOnFace(h.face, h.u, h.v), d.distance, diag);
  }
  return out;
}

Vec3 coarseDeformation(const Vec3& p, const Vec3& n, double degree, double dPQ) {
  if (!std::isfinite(dPQ)) {
    throw NumericalError("coarse deformation with infinite d_PQ");
  }
  return p - n * (degree * dPQ);
}

TriangleMesh coarseDeformVertices(const MeshIndex& object, std::span<const double> vertexDegrees) {
  const TriangleMesh& mesh = object.mesh();
  if (vertexDegrees.size() != mesh.vertexCount()) {
    throw InputError("one degree per vertex expected");
  }
  std::vector<Vec3> moved = mesh.vertices();
  for (size_t i = 0; i < moved.size(); ++i) {
    if (vertexDegrees[i] == 0.0) {
      continue;
    }
    const Vec3& n = mesh.normals()[i];
    const MaxDeformation d = maxDeformation(object, mesh.vertex(i), n);
    moved[i] = coarseDeformation(mesh.vertex(i), n, vertexDegrees[i], d.distance);
  }
  return mesh.withVertices(std::move(moved));
}

// ---------------------------------------------------------------------------

namespace {

double squaredErrorSum(const RupStack& pred, const RupStack& gt, std::vector<double>* grad) {
  requireSameShape(pred, gt, "loss");
  std::vector<double> terms(pred.values.size());
  if (grad) {
    grad->resize(pred.values.size());
  }
  for (size_t i = 0; i < terms.size(); ++i) {
    const double e = pred.values[i] - gt.values[i];
    terms[i] = e * e;
    if (grad) {
      (*grad)[i] = 2.0 * e;
    }
  }
  return pairwiseSum(terms);
}

double bce(double p, double g) {
  p = std::clamp(p, kDegreeClampEps, 1.0 - kDegreeClampEps);
  return -(g * std::log(p) + (1.0 - g) * std::log(1.0 - p));
}

}  // namespace

double lossContactMaps(const ContactMapStack& pred, const ContactMapStack& gt) {
  return squaredErrorSum(pred.handMaps, gt.handMaps, nullptr) +
         squaredErrorSum(pred.objectMaps, gt.objectMaps, nullptr);
}

double lossDegrees(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw InputError("degree loss needs equal non-empty inputs");
  }
  std::vector<double> terms(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    terms[i] = bce(pred[i], gt[i]);
  }
  return pairwiseSum(terms) / static_cast<double>(pred.size());
}

double lossTotal(double lossMaps, std::span<const double> predDegrees,
                 std::span<const double> gtDegrees, double lambda1) {
  return lossMaps + lambda1 * lossDegrees(predDegrees, gtDegrees);
}

LossTerms contactLoss(const ContactMapStack& pred, const ContactMapStack& gt, double lambda1,
                      LossGradient* grad) {
  LossTerms t;
  t.maps = squaredErrorSum(pred.handMaps, gt.handMaps, grad ? &grad->handMaps : nullptr) +
           squaredErrorSum(pred.objectMaps, gt.objectMaps, grad ? &grad->objectMaps : nullptr);
  t.degrees = lossDegrees(pred.degrees, gt.degrees);
  t.total = t.maps + lambda1 * t.degrees;
  if (grad) {
    const double scale = lambda1 / kRegionCount;
    for (int i = 0; i < kRegionCount; ++i) {
      const double p = pred.degrees[i];
      const double g = gt.degrees[i];
      // the clamp has zero slope outside its range
      if (p <= kDegreeClampEps || p >= 1.0 - kDegreeClampEps) {
        grad->degrees[i] = 0.0;
      } else {
        grad->degrees[i] = scale * (p - g) / (p * (1.0 - p));
      }
    }
  }
  return t;
}

}  // namespace rup
