#include "rup/hand.hpp"

#include "rup/obj_io.hpp"
#include "rup/shapes.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace rup {

std::array<double, 51> HandPose::flatten() const {
  std::array<double, 51> out{};
  for (int b = 0; b < kBoneCount; ++b) {
    for (int k = 0; k < 3; ++k) {
      out[3 * b + k] = rotations[b][k];
    }
  }
  for (int k = 0; k < 3; ++k) {
    out[48 + k] = root[k];
  }
  return out;
}

HandPose HandPose::unflatten(std::span<const double> values) {
  if (values.size() != 51) {
    throw InputError("hand pose needs 51 values, got " + std::to_string(values.size()));
  }
  HandPose pose;
  for (int b = 0; b < kBoneCount; ++b) {
    pose.rotations[b] = Vec3(values[3 * b], values[3 * b + 1], values[3 * b + 2]);
  }
  pose.root = Vec3(values[48], values[49], values[50]);
  return pose;
}

void ArticulatedHand::validate() const {
  if (boneOfVertex.size() != surface.vertexCount()) {
    throw InputError("bone map size " + std::to_string(boneOfVertex.size()) +
                     " != vertex count " + std::to_string(surface.vertexCount()));
  }
  for (int b : boneOfVertex) {
    if (b < 0 || b >= kBoneCount) {
      throw InputError("bone map references bone " + std::to_string(b));
    }
  }
  for (int j : distalJoint) {
    if (j < 0 || j >= kJointCount) {
      throw InputError("distal joint index out of range");
    }
  }
}

ArticulatedHand ArticulatedHand::transformed(const RigidTransform& xf) const {
  ArticulatedHand out = *this;
  for (auto& b : out.bones) {
    b = xf * b;
  }
  for (auto& j : out.joints) {
    j = xf.apply(j);
  }
  out.surface = surface.transformed(xf);
  return out;
}

// ---------------------------------------------------------------------------

HandRig::HandRig(std::array<int, kBoneCount> parents, std::array<Vec3, kJointCount> restJoints,
                 std::array<int, 5> tipParents, std::array<int, kBoneCount> distalJoint,
                 TriangleMesh restSurface, std::vector<int> boneOfVertex)
    : parents_(parents),
      restJoints_(restJoints),
      tipParents_(tipParents),
      distal_(distalJoint),
      restSurface_(std::move(restSurface)),
      boneOfVertex_(std::move(boneOfVertex)) {
  if (parents_[0] != -1) {
    throw InputError("bone 0 must be the root");
  }
  for (int b = 1; b < kBoneCount; ++b) {
    if (parents_[b] < 0 || parents_[b] >= b) {
      throw InputError("bone parents must precede children (bone " + std::to_string(b) + ")");
    }
  }
  for (int p : tipParents_) {
    if (p < 0 || p >= kBoneCount) {
      throw InputError("tip parent out of range");
    }
  }
  ArticulatedHand probe;
  probe.surface = restSurface_;
  probe.boneOfVertex = boneOfVertex_;
  probe.distalJoint = distal_;
  probe.validate();
}

ArticulatedHand HandRig::pose(const HandPose& pose) const {
  for (int b = 0; b < kBoneCount; ++b) {
    if (pose.rotations[b].norm() > kPi / 2 + 1e-12) {
      throw InputError("bone " + std::to_string(b) + " rotation exceeds the pi/2 joint limit");
    }
  }
  return poseUnchecked(pose);
}

std::array<RigidTransform, kBoneCount> HandRig::boneTransforms(const HandPose& pose) const {
  std::array<RigidTransform, kBoneCount> bones;
  for (int b = 0; b < kBoneCount; ++b) {
    if (parents_[b] < 0) {
      bones[b] = RigidTransform(pose.rotations[b], restJoints_[b] + pose.root);
    } else {
      const int p = parents_[b];
      bones[b] = bones[p] * RigidTransform(pose.rotations[b], restJoints_[b] - restJoints_[p]);
    }
  }
  return bones;
}

void HandRig::skin(const std::array<RigidTransform, kBoneCount>& bones,
                   std::vector<Vec3>& out) const {
  out.resize(restSurface_.vertexCount());
  for (size_t i = 0; i < out.size(); ++i) {
    const int b = boneOfVertex_[i];
    out[i] = bones[b].apply(restSurface_.vertex(i) - restJoints_[b]);
  }
}

ArticulatedHand HandRig::poseUnchecked(const HandPose& pose) const {
  ArticulatedHand hand;
  hand.distalJoint = distal_;
  hand.boneOfVertex = boneOfVertex_;
  hand.bones = boneTransforms(pose);
  for (int b = 0; b < kBoneCount; ++b) {
    hand.joints[b] = hand.bones[b].translation();
  }
  for (int k = 0; k < 5; ++k) {
    const int p = tipParents_[k];
    hand.joints[kBoneCount + k] = hand.bones[p].apply(restJoints_[kBoneCount + k] - restJoints_[p]);
  }
  std::vector<Vec3> verts;
  skin(hand.bones, verts);
  hand.surface = restSurface_.withVertices(std::move(verts));
  return hand;
}

// ---------------------------------------------------------------------------

namespace {

// body ring spacing of the capsule surfaces (m)
constexpr double kRingSpacing = 0.004;

struct FingerSpec {
  int firstBone;
  int tipJoint;
  Vec3 base;
  Vec3 direction;
  std::array<double, 3> lengths;
  std::array<double, 3> radii;
};

HandRig buildProceduralRig() {
  const std::array<FingerSpec, 5> fingers = {{
      {bones::kIndex, 17, {0.085, 0, 0.025}, {1, 0, 0}, {0.045, 0.025, 0.022}, {0.0085, 0.008, 0.0075}},
      {bones::kMiddle, 18, {0.088, 0, 0.005}, {1, 0, 0}, {0.048, 0.028, 0.024}, {0.0088, 0.0082, 0.0077}},
      {bones::kPinky, 20, {0.078, 0, -0.031}, {1, 0, 0}, {0.035, 0.020, 0.020}, {0.0075, 0.007, 0.0065}},
      {bones::kRing, 19, {0.084, 0, -0.014}, {1, 0, 0}, {0.044, 0.027, 0.023}, {0.0083, 0.0078, 0.0073}},
      {bones::kThumb, 16, {0.022, 0, 0.030}, Vec3(0.6, 0, 0.8), {0.040, 0.032, 0.028}, {0.0105, 0.0095, 0.0085}},
  }};

  std::array<int, kBoneCount> parents{};
  std::array<Vec3, kJointCount> joints{};
  std::array<int, 5> tipParents{};
  std::array<int, kBoneCount> distal{};
  parents[0] = -1;
  joints[0] = Vec3::Zero();
  distal[0] = bones::kMiddle;

  std::vector<TriangleMesh> parts;
  std::vector<int> boneOfVertex;
  auto addCapsule = [&](int bone, const Vec3& from, const Vec3& to, double ry, double rz,
                        int segments) {
    const Vec3 d = (to - from).normalized();
    const Vec3 up(0, 1, 0);
    Mat3 r;
    r.col(0) = d;
    r.col(1) = up;
    r.col(2) = d.cross(up);
    const TriangleMesh cap = shapes::capsule((to - from).norm(), ry, rz, segments, 4, kRingSpacing);
    parts.push_back(cap.transformed(RigidTransform::fromMatrix(r, from)));
    boneOfVertex.insert(boneOfVertex.end(), cap.vertexCount(), bone);
  };

  for (const FingerSpec& f : fingers) {
    const Vec3 dir = f.direction.normalized();
    Vec3 at = f.base;
    for (int s = 0; s < 3; ++s) {
      const int bone = f.firstBone + s;
      parents[bone] = s == 0 ? 0 : bone - 1;
      joints[bone] = at;
      at = at + f.lengths[s] * dir;
      distal[bone] = s < 2 ? bone + 1 : f.tipJoint;
    }
    joints[f.tipJoint] = at;
  }
  tipParents = {15, 3, 6, 12, 9};

  // palm: flattened capsule from the wrist to the middle-finger base
  addCapsule(0, joints[0], joints[bones::kMiddle], 0.012, 0.040, 40);
  for (const FingerSpec& f : fingers) {
    for (int s = 0; s < 3; ++s) {
      const int bone = f.firstBone + s;
      addCapsule(bone, joints[bone], joints[distal[bone]], f.radii[s], f.radii[s], 16);
    }
  }
  return HandRig(parents, joints, tipParents, distal, TriangleMesh::merge(parts),
                 std::move(boneOfVertex));
}

}  // namespace

const HandRig& proceduralRig() {
  static const HandRig rig = buildProceduralRig();
  return rig;
}

ArticulatedHand proceduralHand(const HandPose& pose) {
  return proceduralRig().pose(pose);
}

std::array<Vec3, kBoneCount> regionCenters(const ArticulatedHand& hand) {
  std::array<Vec3, kBoneCount> centers;
  for (int b = 0; b < kBoneCount; ++b) {
    centers[b] = 0.5 * (hand.joints[b] + hand.joints[hand.distalJoint[b]]);
  }
  return centers;
}

ArticulatedHand mirrorHand(const ArticulatedHand& hand) {
  auto reflect = [](const Vec3& p) { return Vec3(-p.x(), p.y(), p.z()); };
  ArticulatedHand out = hand;
  for (auto& b : out.bones) {
    const Vec3 aa = b.axisAngle();
    b = RigidTransform(Vec3(aa.x(), -aa.y(), -aa.z()), reflect(b.translation()));
  }
  for (auto& j : out.joints) {
    j = reflect(j);
  }
  std::vector<Vec3> verts;
  verts.reserve(hand.surface.vertexCount());
  for (const Vec3& p : hand.surface.vertices()) {
    verts.push_back(reflect(p));
  }
  std::vector<Face> faces = hand.surface.faces();
  for (Face& f : faces) {
    std::swap(f[1], f[2]);
  }
  out.surface = TriangleMesh(std::move(verts), std::move(faces));
  return out;
}

SceneReport validateScene(const ArticulatedHand& hand, const TriangleMesh& object) {
  SceneReport report;
  if (object.vertexCount() == 0) {
    report.noInteraction = true;
    report.boxGap = std::numeric_limits<double>::infinity();
    return report;
  }
  report.maxObjectY = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : object.vertices()) {
    report.maxObjectY = std::max(report.maxObjectY, p.y());
  }
  report.objectBehindHand = report.maxObjectY >= 0.0;
  const auto a = hand.surface.bounds();
  const auto b = object.bounds();
  double gap2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double g = std::max({0.0, a.min()[k] - b.max()[k], b.min()[k] - a.max()[k]});
    gap2 += g * g;
  }
  report.boxGap = std::sqrt(gap2);
  report.noInteraction = report.boxGap > 0.002;
  return report;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json vecJson(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 jsonVec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw InputError("expected a 3-vector in rig file");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void saveRig(const std::filesystem::path& path, const HandRig& rig, const std::string& objFileName) {
  nlohmann::json j;
  j["format"] = "rup-hand-rig";
  j["version"] = 1;
  j["units"] = "meters";
  j["parents"] = rig.parents();
  j["distal_joint"] = rig.distalJoint();
  j["tip_parents"] = rig.tipParents();
  auto& joints = j["rest_joints"] = nlohmann::json::array();
  for (const Vec3& p : rig.restJoints()) {
    joints.push_back(vecJson(p));
  }
  j["mesh"] = objFileName;
  j["bone_of_vertex"] = rig.boneOfVertex();
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << j.dump(1) << '\n';
  saveObj(path.parent_path() / objFileName, rig.restSurface());
}

HandRig loadRig(const std::filesystem::path& path, double scale) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    std::array<int, kBoneCount> parents = j.at("parents").get<std::array<int, kBoneCount>>();
    std::array<int, kBoneCount> distal = j.at("distal_joint").get<std::array<int, kBoneCount>>();
    std::array<int, 5> tips = j.at("tip_parents").get<std::array<int, 5>>();
    const auto& jj = j.at("rest_joints");
    if (jj.size() != kJointCount) {
      throw InputError("rig needs 21 rest joints");
    }
    std::array<Vec3, kJointCount> joints;
    for (int k = 0; k < kJointCount; ++k) {
      joints[k] = jsonVec(jj[k]) * scale;
    }
    TriangleMesh surface = loadObj(path.parent_path() / j.at("mesh").get<std::string>(), scale);
    return HandRig(parents, joints, tips, distal, std::move(surface),
                   j.at("bone_of_vertex").get<std::vector<int>>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad rig file " + path.string() + ": " + e.what());
  }
}

}  // namespace rup
