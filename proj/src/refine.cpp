#include "rup/refine.hpp"

#include "rup/mesh_index.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace rup {

std::vector<double> mapsToVertices(const RupStack& maps, const RupStack& stack,
                                   const TriangleMesh& mesh) {
  if (!stack.hasHits()) {
    throw InputError("maps_to_vertices: stack has no hit records");
  }
  if (maps.values.size() != stack.values.size() || maps.height != stack.height ||
      maps.width != stack.width) {
    throw InputError("maps_to_vertices: map and stack layouts differ");
  }
  std::vector<double> sum(mesh.vertexCount(), 0.0);
  std::vector<double> weight(mesh.vertexCount(), 0.0);
  for (size_t i = 0; i < stack.values.size(); ++i) {
    const RayHit& h = stack.hits[i];
    if (stack.values[i] <= 0.0 || h.face < 0) {
      continue;
    }
    if (static_cast<size_t>(h.face) >= mesh.faceCount()) {
      throw InputError("maps_to_vertices: hit face outside the mesh");
    }
    const Face& f = mesh.face(h.face);
    const double w[3] = {1.0 - h.u - h.v, h.u, h.v};
    for (int c = 0; c < 3; ++c) {
      sum[f[c]] += w[c] * maps.values[i];
      weight[f[c]] += w[c];
    }
  }
  std::vector<double> out(mesh.vertexCount(), 0.0);
  for (size_t v = 0; v < out.size(); ++v) {
    if (weight[v] > 0.0) {
      out[v] = sum[v] / weight[v];
    }
  }
  return out;
}

TriangleMesh applyObjectDeformation(const TriangleMesh& object, const DeformationGraph& graph) {
  const WeightTable weights = computeWeights(object.vertices(), graph.nodes, graph.k);
  return object.withVertices(applyGraph(graph, weights, object.vertices()));
}

void RefinementProblem::validate() const {
  if (handTargets.size() != rig.restSurface().vertexCount()) {
    throw InputError("hand targets do not match the hand vertex count");
  }
  if (objectTargets.size() != object.vertexCount()) {
    throw InputError("object targets do not match the object vertex count");
  }
  for (const auto* t : {&handTargets, &objectTargets}) {
    for (double v : *t) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InputError("contact targets must lie in [0, 1]");
      }
    }
  }
  const RefineSettings& s = settings;
  for (double w : {s.wAtt, s.wPen, s.wReg}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InputError("refinement weights must be finite and >= 0");
    }
  }
  if (s.maxIterations < 0 || s.correspondenceInterval < 1 || !(s.step > 0.0) ||
      s.maxRejections < 1) {
    throw InputError("invalid refinement settings");
  }
  if (s.wPen > 0.0 && !object.isWatertight()) {
    throw InputError("penetration needs a watertight object");
  }
}

namespace {

constexpr int kHandParams = 3 * kBoneCount + 3;
constexpr int kParams = kHandParams + 6;
constexpr double kActiveMargin = 0.002;

using Params = Eigen::Matrix<double, kParams, 1>;

class Refiner {
 public:
  explicit Refiner(const RefinementProblem& p) : problem_(p), object_(p.object) {
    const auto& s = p.settings;
    for (size_t i = 0; i < p.handTargets.size(); ++i) {
      if (p.handTargets[i] > s.contactThreshold) {
        handAttract_.push_back(static_cast<int>(i));
      }
    }
    for (size_t j = 0; j < p.objectTargets.size(); ++j) {
      if (p.objectTargets[j] > s.contactThreshold) {
        objectAttract_.push_back(static_cast<int>(j));
      }
    }
    center_ = Vec3::Zero();
    for (const Vec3& v : p.object.vertices()) {
      center_ += v;
    }
    if (p.object.vertexCount() > 0) {
      center_ /= static_cast<double>(p.object.vertexCount());
    }
    if (s.optimizeHand) {
      for (int i = 0; i < kHandParams; ++i) {
        free_.push_back(i);
      }
    }
    if (s.optimizeObject) {
      for (int i = kHandParams; i < kParams; ++i) {
        free_.push_back(i);
      }
    }
    // bones moved by each rotation parameter: the bone and its descendants
    const auto& parents = p.rig.parents();
    for (int b = 0; b < kBoneCount; ++b) {
      std::vector<uint8_t> mask(kBoneCount, 0);
      for (int c = 0; c < kBoneCount; ++c) {
        for (int a = c; a >= 0; a = parents[a]) {
          if (a == b) {
            mask[c] = 1;
            break;
          }
        }
      }
      moved_[b] = mask;
    }
  }

  RigidTransform objectPose(const Params& x) const {
    const Mat3 r = rotationFromAxisAngle(x.segment<3>(kHandParams));
    return RigidTransform::fromMatrix(r, center_ + x.segment<3>(kHandParams + 3) - r * center_);
  }

  HandPose pose(const Params& x) const {
    HandPose out = problem_.pose;
    for (int b = 0; b < kBoneCount; ++b) {
      out.rotations[b] += x.segment<3>(3 * b);
    }
    out.root += x.segment<3>(3 * kBoneCount);
    return out;
  }

  // Hand vertices expressed in the object's local frame.
  void handVertices(const Params& x, std::vector<Vec3>& out) const {
    problem_.rig.skin(problem_.rig.boneTransforms(pose(x)), out);
    const RigidTransform inv = objectPose(x).inverse();
    for (Vec3& v : out) {
      v = inv.apply(v);
    }
  }

  double depth(const Vec3& p) const {
    return object_.contains(p) ? object_.closestPoint(p).distance : 0.0;
  }

  void updateCorrespondences(const Params& x) {
    std::vector<Vec3> hv;
    handVertices(x, hv);
    handCorr_.clear();
    for (int i : handAttract_) {
      handCorr_.push_back(object_.closestPoint(hv[i]).point);
    }
    objectCorr_.clear();
    if (!objectAttract_.empty()) {
      const MeshIndex hand(problem_.rig.restSurface().withVertices(hv));
      for (int j : objectAttract_) {
        objectCorr_.push_back(hand.closestPoint(problem_.object.vertex(j)));
      }
    }
  }

  Vec3 handPoint(const std::vector<Vec3>& hv, const ClosestPoint& c) const {
    const Face& f = problem_.rig.restSurface().face(c.face);
    return (1.0 - c.u - c.v) * hv[f[0]] + c.u * hv[f[1]] + c.v * hv[f[2]];
  }

  RefineEnergy energy(const Params& x, double* maxDepth = nullptr) const {
    const RefineSettings& s = problem_.settings;
    std::vector<Vec3> hv;
    handVertices(x, hv);
    RefineEnergy e;
    for (size_t k = 0; k < handAttract_.size(); ++k) {
      e.attraction += (hv[handAttract_[k]] - handCorr_[k]).squaredNorm();
    }
    for (size_t k = 0; k < objectAttract_.size(); ++k) {
      e.attraction += (problem_.object.vertex(objectAttract_[k]) - handPoint(hv, objectCorr_[k]))
                          .squaredNorm();
    }
    double deepest = 0.0;
    if (s.wPen > 0.0 || maxDepth) {
      for (const Vec3& v : hv) {
        const double d = depth(v);
        e.penetration += d * d;
        deepest = std::max(deepest, d);
      }
    }
    e.regularization = x.head<kHandParams>().squaredNorm();
    e.attraction *= s.wAtt;
    e.penetration *= s.wPen;
    e.regularization *= s.wReg;
    e.total = e.attraction + e.penetration + e.regularization;
    if (maxDepth) {
      *maxDepth = deepest;
    }
    return e;
  }

  // Vertices whose penetration can change under a finite-difference step.
  std::vector<int> activeVertices(const Params& x) const {
    std::vector<Vec3> hv;
    handVertices(x, hv);
    std::vector<int> active;
    if (problem_.settings.wPen <= 0.0) {
      return active;
    }
    for (size_t i = 0; i < hv.size(); ++i) {
      if (object_.closestPoint(hv[i]).distance < kActiveMargin || object_.contains(hv[i])) {
        active.push_back(static_cast<int>(i));
      }
    }
    return active;
  }

  size_t residualSize(const std::vector<int>& active) const {
    return 3 * (handAttract_.size() + objectAttract_.size()) + active.size() + kHandParams;
  }

  // Residual vector whose squared norm is the energy. Penetration rows of
  // vertices on bones outside `moved` are copied from `base`.
  void residual(const Params& x, const std::vector<int>& active, const std::vector<uint8_t>* moved,
                const Eigen::VectorXd* base, Eigen::VectorXd& r) const {
    const RefineSettings& s = problem_.settings;
    std::vector<Vec3> hv;
    handVertices(x, hv);
    r.resize(static_cast<Eigen::Index>(residualSize(active)));
    const double sa = std::sqrt(s.wAtt);
    Eigen::Index row = 0;
    for (size_t k = 0; k < handAttract_.size(); ++k, row += 3) {
      r.segment<3>(row) = sa * (hv[handAttract_[k]] - handCorr_[k]);
    }
    for (size_t k = 0; k < objectAttract_.size(); ++k, row += 3) {
      r.segment<3>(row) =
          sa * (problem_.object.vertex(objectAttract_[k]) - handPoint(hv, objectCorr_[k]));
    }
    const double sp = std::sqrt(s.wPen);
    const std::vector<int>& boneOf = problem_.rig.boneOfVertex();
    for (int i : active) {
      if (moved && base && !(*moved)[boneOf[i]]) {
        r[row] = (*base)[row];
      } else {
        r[row] = sp * depth(hv[i]);
      }
      ++row;
    }
    r.tail<kHandParams>() = std::sqrt(s.wReg) * x.head<kHandParams>();
  }

  RefineResult run() {
    const RefineSettings& s = problem_.settings;
    RefineResult result;
    Params x = Params::Zero();
    updateCorrespondences(x);
    double deepest = 0.0;
    RefineEnergy e = energy(x, &deepest);
    result.initial = e;
    result.initialPenetrationMm = 1000.0 * deepest;
    result.energyTrace.push_back(e.total);

    const std::vector<uint8_t> all(kBoneCount, 1);
    const int n = static_cast<int>(free_.size());
    Eigen::MatrixXd jac;
    Eigen::VectorXd r;
    Eigen::VectorXd rp;
    Eigen::VectorXd rm;
    Eigen::MatrixXd h;
    Eigen::VectorXd g;
    double mu = 1e-3;
    bool needJacobian = true;
    int rejections = 0;
    int lastRefresh = 0;
    bool stalled = false;  // no progress under the current correspondences

    while (result.iterations < s.maxIterations && n > 0) {
      if (stalled || result.iterations - lastRefresh >= s.correspondenceInterval) {
        // closest points never lie farther than the lagged ones: energy cannot rise
        updateCorrespondences(x);
        e = energy(x, &deepest);
        lastRefresh = result.iterations;
        needJacobian = true;
        stalled = false;
        rejections = 0;
      }
      if (needJacobian) {
        const std::vector<int> active = activeVertices(x);
        residual(x, active, nullptr, nullptr, r);
        jac.resize(r.size(), n);
        for (int c = 0; c < n; ++c) {
          const int p = free_[c];
          const std::vector<uint8_t>* moved = p < 3 * kBoneCount ? &moved_[p / 3] : &all;
          Params xp = x;
          Params xm = x;
          xp[p] += s.step;
          xm[p] -= s.step;
          residual(xp, active, moved, &r, rp);
          residual(xm, active, moved, &r, rm);
          jac.col(c) = (rp - rm) / (2.0 * s.step);
        }
        h = jac.transpose() * jac;
        g = jac.transpose() * r;
        needJacobian = false;
      }
      if (e.total <= 1e-24 || g.lpNorm<Eigen::Infinity>() <= 1e-14) {
        if (result.iterations == lastRefresh) {
          result.converged = true;
          break;
        }
        stalled = true;
        continue;
      }
      const double floor = 1e-12 * std::max(h.diagonal().maxCoeff(), 1e-300);
      Eigen::MatrixXd damped = h;
      for (int i = 0; i < n; ++i) {
        damped(i, i) += mu * std::max(h(i, i), floor);
      }
      const Eigen::VectorXd delta = damped.ldlt().solve(-g);
      Params trial = x;
      for (int c = 0; c < n; ++c) {
        trial[free_[c]] += delta[c];
      }
      double trialDepth = 0.0;
      const RefineEnergy te = energy(trial, &trialDepth);
      ++result.iterations;
      const bool penetrationOk = s.wAtt > 0.0 || trialDepth <= deepest;
      if (std::isfinite(te.total) && te.total < e.total && penetrationOk) {
        const double previous = e.total;
        x = trial;
        e = te;
        deepest = trialDepth;
        result.energyTrace.push_back(e.total);
        ++result.accepted;
        rejections = 0;
        mu = std::max(mu / 3.0, 1e-12);
        needJacobian = true;
        if (previous - e.total <= 1e-9 * previous) {
          if (result.iterations - 1 == lastRefresh) {
            result.converged = true;
            break;
          }
          stalled = true;
        }
      } else {
        mu *= 4.0;
        if (++rejections >= s.maxRejections) {
          if (result.iterations - rejections == lastRefresh) {
            result.aborted = true;
            break;
          }
          stalled = true;
        }
      }
    }

    result.final = e;
    result.finalPenetrationMm = 1000.0 * deepest;
    result.pose = pose(x);
    for (int b = 0; b < kBoneCount; ++b) {
      result.increments.rotations[b] = x.segment<3>(3 * b);
    }
    result.increments.root = x.segment<3>(3 * kBoneCount);
    result.objectPose = objectPose(x);
    return result;
  }

 private:
  const RefinementProblem& problem_;
  MeshIndex object_;
  Vec3 center_;
  std::vector<int> handAttract_;
  std::vector<int> objectAttract_;
  std::vector<Vec3> handCorr_;
  std::vector<ClosestPoint> objectCorr_;
  std::vector<int> free_;
  std::array<std::vector<uint8_t>, kBoneCount> moved_;
};

}  // namespace

RefineResult refinePoses(const RefinementProblem& problem) {
  problem.validate();
  Refiner refiner(problem);
  return refiner.run();
}

ArticulatedHand refinedHand(const RefinementProblem& problem, const RefineResult& result) {
  return problem.rig.poseUnchecked(result.pose);
}

TriangleMesh refinedObject(const RefinementProblem& problem, const RefineResult& result) {
  return problem.object.transformed(result.objectPose);
}

}  // namespace rup
