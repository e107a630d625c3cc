#pragma once

#include "rup/geometry.hpp"

#include <array>
#include <filesystem>
#include <string>

namespace rup {

inline constexpr int kBoneCount = 16;
inline constexpr int kJointCount = 21;

/// Bone order follows the MANO convention: 0 wrist, 1-3 index, 4-6 middle,
/// 7-9 pinky, 10-12 ring, 13-15 thumb. Joints 0-15 are bone origins, 16-20 are
/// the thumb, index, middle, ring and pinky tips.
namespace bones {
inline constexpr int kWrist = 0;
inline constexpr int kIndex = 1;
inline constexpr int kMiddle = 4;
inline constexpr int kPinky = 7;
inline constexpr int kRing = 10;
inline constexpr int kThumb = 13;
}  // namespace bones

/// Parent-relative axis-angle per bone plus a root translation. Bone 0's
/// rotation is the global wrist orientation.
struct HandPose {
  std::array<Vec3, kBoneCount> rotations;
  Vec3 root = Vec3::Zero();

  HandPose() { rotations.fill(Vec3::Zero()); }

  /// 51 values: 16 x 3 rotations then the root translation.
  std::array<double, 51> flatten() const;
  static HandPose unflatten(std::span<const double> values);
};

/// Curl toward the palm (-y) for bones whose rest direction is +x.
inline Vec3 flexion(double angle) { return {0.0, 0.0, -angle}; }

/// A posed hand: global bone transforms in the wrist frame, joints, and a
/// rigidly skinned surface. Immutable value type.
struct ArticulatedHand {
  std::array<RigidTransform, kBoneCount> bones;
  std::array<Vec3, kJointCount> joints;
  std::array<int, kBoneCount> distalJoint{};  // joint index that ends each bone
  TriangleMesh surface;
  std::vector<int> boneOfVertex;

  /// Throws InputError when counts or indices are inconsistent.
  void validate() const;

  ArticulatedHand transformed(const RigidTransform& xf) const;
};

/// Kinematic rig: rest joints, tree, and a rest-pose surface with a rigid
/// bone assignment per vertex. All rest frames share the wrist orientation.
class HandRig {
 public:
  HandRig(std::array<int, kBoneCount> parents, std::array<Vec3, kJointCount> restJoints,
          std::array<int, 5> tipParents, std::array<int, kBoneCount> distalJoint,
          TriangleMesh restSurface, std::vector<int> boneOfVertex);

  /// Forward kinematics. Throws InputError if any rotation exceeds pi/2.
  ArticulatedHand pose(const HandPose& pose) const;

  /// FK without joint-limit checks (used by optimizers that handle limits).
  ArticulatedHand poseUnchecked(const HandPose& pose) const;

  /// Global bone transforms only (no surface).
  std::array<RigidTransform, kBoneCount> boneTransforms(const HandPose& pose) const;
  /// Rigidly skinned rest vertices for the given bone transforms.
  void skin(const std::array<RigidTransform, kBoneCount>& bones, std::vector<Vec3>& out) const;

  const std::array<int, kBoneCount>& parents() const { return parents_; }
  const std::array<Vec3, kJointCount>& restJoints() const { return restJoints_; }
  const std::array<int, 5>& tipParents() const { return tipParents_; }
  const std::array<int, kBoneCount>& distalJoint() const { return distal_; }
  const TriangleMesh& restSurface() const { return restSurface_; }
  const std::vector<int>& boneOfVertex() const { return boneOfVertex_; }

 private:
  std::array<int, kBoneCount> parents_;
  std::array<Vec3, kJointCount> restJoints_;
  std::array<int, 5> tipParents_;
  std::array<int, kBoneCount> distal_;
  TriangleMesh restSurface_;
  std::vector<int> boneOfVertex_;
};

/// Capsule-per-bone test hand. Rest pose is flat in the y = 0 plane with
/// fingers along +x, the palm facing -y and the thumb toward +z.
const HandRig& proceduralRig();
ArticulatedHand proceduralHand(const HandPose& pose);

/// Center of each bone: midpoint of its proximal and distal joints.
std::array<Vec3, kBoneCount> regionCenters(const ArticulatedHand& hand);

/// Reflect across x = 0 and flip face winding.
ArticulatedHand mirrorHand(const ArticulatedHand& hand);

struct SceneReport {
  bool objectBehindHand = false;  // some object vertex has y >= 0
  double maxObjectY = 0.0;
  bool noInteraction = false;  // bounding boxes more than 2 mm apart
  double boxGap = 0.0;
};

SceneReport validateScene(const ArticulatedHand& hand, const TriangleMesh& object);

/// Rig file: JSON with the joint tree, rest joints, bone map and a relative
/// OBJ reference for the rest surface. See docs/hand_rig.md.
void saveRig(const std::filesystem::path& path, const HandRig& rig,
             const std::string& objFileName = "hand_rest.obj");
HandRig loadRig(const std::filesystem::path& path, double scale = 1.0);

}  // namespace rup
