#pragma once

#include "rup/geometry.hpp"

#include <optional>

namespace rup {

/// Bounding volume hierarchy over the faces of a TriangleMesh.
///
/// The index keeps a copy of the mesh so it can outlive the caller's instance.
/// Ray queries use the same triangle test and hit canonicalization as
/// rayCastBruteForce, so results are identical to the reference loop, not
/// merely close. Read-only after construction.
class MeshIndex {
 public:
  MeshIndex() = default;
  explicit MeshIndex(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }

  /// All hits with t > kRayEpsilon, ascending.
  std::vector<RayHit> castAll(const Vec3& origin, const Vec3& dir) const;
  std::optional<RayHit> castClosest(const Vec3& origin, const Vec3& dir) const;
  std::optional<RayHit> castFarthest(const Vec3& origin, const Vec3& dir) const;

  /// Closest surface point; distance is +inf for an empty mesh.
  ClosestPoint closestPoint(const Vec3& p) const;

  /// Parity inside test, 3-ray majority. A point is inside when it is inside any
  /// closed connected component (so unions of overlapping shells work).
  bool contains(const Vec3& p) const;

  /// Parity per component along one ray; used by voxel scanlines.
  bool containsAlong(const Vec3& p, const Vec3& dir) const;

  const std::vector<int>& faceComponent() const { return component_; }
  int componentCount() const { return componentCount_; }

  size_t nodeCount() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;  // internal node: child indices; leaf: -1
    int right = -1;
    int first = 0;  // leaf: range into order_
    int count = 0;
  };

  int build(int first, int count, std::vector<Eigen::AlignedBox3d>& boxes,
            std::vector<Vec3>& centroids);

  template <typename Visit>
  void traverseRay(const Vec3& origin, const Vec3& dir, Visit&& visit) const;

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<int> component_;
  int componentCount_ = 0;
};

}  // namespace rup
