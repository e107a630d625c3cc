#include "rup/synth.hpp"

#include "rup/metrics.hpp"
#include "rup/obj_io.hpp"
#include "rup/shapes.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace rup {

namespace {

using nlohmann::ordered_json;

constexpr double kMaxCurl = 1.2;
constexpr double kCurlScan = 0.02;
constexpr int kBisections = 48;

struct FingerChain {
  int firstBone;
  Vec3 axis;  // flexion axis in the wrist frame
};

std::array<FingerChain, 5> fingerChains() {
  const auto curlAxis = [](const Vec3& dir) { return dir.cross(Vec3(0, -1, 0)).normalized(); };
  return {{{bones::kIndex, curlAxis({1, 0, 0})},
           {bones::kMiddle, curlAxis({1, 0, 0})},
           {bones::kPinky, curlAxis({1, 0, 0})},
           {bones::kRing, curlAxis({1, 0, 0})},
           {bones::kThumb, curlAxis(Vec3(0.6, 0, 0.8).normalized())}}};
}

// Closed slab: subdivided top and bottom grids joined by side walls.
TriangleMesh slab(double sizeX, double sizeZ, double thickness, int n) {
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  const int row = n + 1;
  for (int layer = 0; layer < 2; ++layer) {
    const double y = layer == 0 ? 0.5 * thickness : -0.5 * thickness;
    for (int i = 0; i <= n; ++i) {
      for (int k = 0; k <= n; ++k) {
        verts.emplace_back(sizeX * (static_cast<double>(k) / n - 0.5), y,
                           sizeZ * (static_cast<double>(i) / n - 0.5));
      }
    }
  }
  const int bottom = row * row;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const int a = i * row + k;
      // top faces +y, bottom faces -y
      faces.push_back({a, a + row, a + 1});
      faces.push_back({a + 1, a + row, a + row + 1});
      faces.push_back({bottom + a, bottom + a + 1, bottom + a + row});
      faces.push_back({bottom + a + 1, bottom + a + row + 1, bottom + a + row});
    }
  }
  // boundary loop, counter-clockwise seen from +y
  std::vector<int> loop;
  for (int k = 0; k < n; ++k) loop.push_back(k);
  for (int i = 0; i < n; ++i) loop.push_back(i * row + n);
  for (int k = n; k > 0; --k) loop.push_back(n * row + k);
  for (int i = n; i > 0; --i) loop.push_back(i * row);
  for (size_t s = 0; s < loop.size(); ++s) {
    const int a = loop[s];
    const int b = loop[(s + 1) % loop.size()];
    faces.push_back({a, b, bottom + a});
    faces.push_back({b, bottom + b, bottom + a});
  }
  TriangleMesh mesh(std::move(verts), std::move(faces));
  // orient outward if the loop order came out inverted
  double volume = 0.0;
  for (const Face& f : mesh.faces()) {
    volume += mesh.vertex(f[0]).dot(mesh.vertex(f[1]).cross(mesh.vertex(f[2])));
  }
  if (volume < 0.0) {
    std::vector<Face> flipped = mesh.faces();
    for (Face& f : flipped) std::swap(f[1], f[2]);
    return TriangleMesh(mesh.vertices(), std::move(flipped));
  }
  return mesh;
}

TriangleMesh centered(const TriangleMesh& mesh) {
  const Eigen::AlignedBox3d box = mesh.bounds();
  return mesh.transformed(RigidTransform({0, 0, 0}, -box.center()));
}

// Signed clearance (negative inside) from hand vertices to the object.
double clearance(const ArticulatedHand& hand, const MeshIndex& object,
                 const RigidTransform& placement, const std::vector<uint8_t>* boneMask) {
  const RigidTransform inv = placement.inverse();
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < hand.surface.vertexCount(); ++i) {
    if (boneMask && !(*boneMask)[hand.boneOfVertex[i]]) {
      continue;
    }
    const Vec3 p = inv.apply(hand.surface.vertex(i));
    const double d = object.closestPoint(p).distance;
    best = std::min(best, object.contains(p) ? -d : d);
  }
  return best;
}

double penetrationMm(const ArticulatedHand& hand, const MeshIndex& object,
                     const RigidTransform& placement) {
  const RigidTransform inv = placement.inverse();
  std::vector<Vec3> local(hand.surface.vertexCount());
  for (size_t i = 0; i < local.size(); ++i) {
    local[i] = inv.apply(hand.surface.vertex(i));
  }
  return penetration(local, object).depthMm;
}

// Largest t in [lo, hi] with f(t) >= target, assuming f decreases through the target.
template <typename F>
double bisect(F&& f, double lo, double hi, double target) {
  for (int i = 0; i < kBisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) >= target ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

const char* sceneKindName(SceneKind kind) {
  switch (kind) {
    case SceneKind::GraspSphere: return "grasp-sphere";
    case SceneKind::PinchCapsule: return "pinch-capsule";
    case SceneKind::PressPlane: return "press-plane";
  }
  return "unknown";
}

SceneKind sceneKindFromName(const std::string& name) {
  for (SceneKind k : {SceneKind::GraspSphere, SceneKind::PinchCapsule, SceneKind::PressPlane}) {
    if (name == sceneKindName(k)) {
      return k;
    }
  }
  throw InputError("unknown scene kind '" + name + "'");
}

void SynthParams::validate() const {
  if (!(size > 0.005 && size <= 0.1)) {
    throw InputError("synth: size must be in (0.005, 0.1] m");
  }
  if (!(degree >= 0.0 && degree <= 1.0)) {
    throw InputError("synth: degree must be in [0, 1]");
  }
  if (!(gapMm >= 0.0 && gapMm < contactThreshold * 1000.0)) {
    throw InputError("synth: gap must be >= 0 and below the contact threshold");
  }
  if (!(penetrationMm >= 0.0 && penetrationMm <= 20.0)) {
    throw InputError("synth: penetration must be in [0, 20] mm");
  }
  if (!(jitterMm >= 0.0 && jitterMm <= 10.0)) {
    throw InputError("synth: jitter must be in [0, 10] mm");
  }
}

const HandRig& Scene::rig() const {
  if (rigPath.empty()) {
    return proceduralRig();
  }
  if (!loadedRig_) {
    loadedRig_ = loadRig(rigPath);
  }
  return *loadedRig_;
}

ArticulatedHand Scene::hand() const { return rig().pose(pose); }

std::optional<TriangleMesh> Scene::placedDeformedObject() const {
  if (!truth) {
    return std::nullopt;
  }
  return truth->deformedObject.transformed(objectPose);
}

Scene synthesize(const SynthParams& params) {
  params.validate();
  const HandRig& rig = proceduralRig();
  const double gap = params.gapMm / 1000.0;
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> jitter(-params.jitterMm / 1000.0, params.jitterMm / 1000.0);

  Scene scene;
  scene.kind = sceneKindName(params.kind);
  scene.seed = params.seed;

  // anchor on the underside of the rest hand
  const ArticulatedHand rest = rig.pose(HandPose{});
  Vec3 palm = Vec3::Zero();
  int palmCount = 0;
  double palmBottom = 0.0;
  for (size_t i = 0; i < rest.surface.vertexCount(); ++i) {
    if (rest.boneOfVertex[i] == bones::kWrist) {
      palm += rest.surface.vertex(i);
      ++palmCount;
      palmBottom = std::min(palmBottom, rest.surface.vertex(i).y());
    }
  }
  palm /= palmCount;

  Mat3 orientation = Mat3::Identity();
  Vec3 anchor(palm.x(), 0.0, palm.z());
  double halfHeight = params.size;
  double drop = 0.0;  // extra clearance below the flat hand, closed by the fingers
  switch (params.kind) {
    case SceneKind::GraspSphere:
      scene.object = shapes::uvSphere(params.size, 38, 54);
      break;
    case SceneKind::PinchCapsule: {
      const double r = params.size / 3.0;
      scene.object = centered(shapes::capsule(0.05, r, r, 24, 6));
      orientation = rotationFromAxisAngle({0, std::numbers::pi / 2, 0});
      anchor = {0.125, 0.0, 0.02};
      halfHeight = r;
      drop = 0.025;
      break;
    }
    case SceneKind::PressPlane:
      halfHeight = params.size / 4.0;
      scene.object = slab(0.24, 0.2, 2.0 * halfHeight, 24);
      anchor = {0.08, 0.0, 0.0};
      break;
  }
  anchor.x() += jitter(rng);
  anchor.z() += jitter(rng);
  const MeshIndex object(scene.object);

  // lower the object until the flat hand is exactly `gap` away
  const auto placementAt = [&](double y) {
    return RigidTransform::fromMatrix(orientation, {anchor.x(), y, anchor.z()});
  };
  const double yTop = palmBottom - halfHeight;
  const double y = bisect([&](double h) { return clearance(rest, object, placementAt(h), nullptr); },
                          yTop - 0.05, yTop + 0.01, gap);
  RigidTransform placement = placementAt(y - drop);
  if (clearance(rest, object, placement, nullptr) < gap) {
    throw NumericalError("synth: could not place the object below the hand");
  }

  // close each finger until it is `gap` from the object
  HandPose pose;
  for (const FingerChain& chain : fingerChains()) {
    std::vector<uint8_t> mask(kBoneCount, 0);
    for (int b = chain.firstBone; b < chain.firstBone + 3; ++b) {
      mask[b] = 1;
    }
    const auto clearanceAt = [&](double a) {
      HandPose p = pose;
      for (int b = chain.firstBone; b < chain.firstBone + 3; ++b) {
        p.rotations[b] = chain.axis * a;
      }
      return clearance(rig.pose(p), object, placement, &mask);
    };
    double lo = 0.0;
    double hi = kMaxCurl;
    for (double a = kCurlScan; a <= kMaxCurl + 1e-12; a += kCurlScan) {
      if (clearanceAt(a) < gap) {
        hi = a;
        break;
      }
      lo = a;
    }
    const double angle = hi < kMaxCurl || clearanceAt(kMaxCurl) < gap
                             ? bisect(clearanceAt, lo, hi, gap)
                             : kMaxCurl;
    for (int b = chain.firstBone; b < chain.firstBone + 3; ++b) {
      pose.rotations[b] = chain.axis * angle;
    }
  }
  scene.pose = pose;
  const ArticulatedHand hand = rig.pose(pose);

  // ground truth at the contacting placement
  SceneTruth truth;
  truth.contactPose = placement;
  const RigidTransform inv = placement.inverse();
  truth.handContact.resize(hand.surface.vertexCount());
  for (size_t i = 0; i < truth.handContact.size(); ++i) {
    const double d = object.closestPoint(inv.apply(hand.surface.vertex(i))).distance;
    truth.handContact[i] = d < params.contactThreshold ? 1 : 0;
  }
  const MeshIndex handIndex(hand.surface);
  truth.objectContact.resize(scene.object.vertexCount());
  truth.objectDegrees.assign(scene.object.vertexCount(), 0.0);
  for (size_t j = 0; j < truth.objectContact.size(); ++j) {
    const double d = handIndex.closestPoint(placement.apply(scene.object.vertex(j))).distance;
    truth.objectContact[j] = d < params.contactThreshold ? 1 : 0;
    if (truth.objectContact[j]) {
      truth.objectDegrees[j] = params.degree;
    }
  }
  truth.deformedObject = coarseDeformVertices(object, truth.objectDegrees);

  // optional offset toward the palm
  if (params.penetrationMm > 0.0) {
    const auto offsetAt = [&](double s) {
      return RigidTransform({0, 0, 0}, {0, s, 0}) * placement;
    };
    const double target = params.penetrationMm;
    const double s = bisect([&](double t) { return -penetrationMm(hand, object, offsetAt(t)); }, 0.0,
                            target / 1000.0 + 0.01, -target);
    placement = offsetAt(s);
  }
  scene.objectPose = placement;
  scene.truth = std::move(truth);
  return scene;
}

// ---------------------------------------------------------------------------
// Scene files

namespace {

ordered_json vecJson(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

Vec3 vecFrom(const ordered_json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw InputError("scene: expected a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ordered_json transformJson(const RigidTransform& t) {
  return {{"axis_angle", vecJson(t.axisAngle())}, {"translation", vecJson(t.translation())}};
}

RigidTransform transformFrom(const ordered_json& j) {
  return RigidTransform(vecFrom(j.at("axis_angle")), vecFrom(j.at("translation")));
}

ordered_json indexList(const std::vector<uint8_t>& flags) {
  ordered_json out = ordered_json::array();
  for (size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) out.push_back(i);
  }
  return out;
}

std::vector<uint8_t> flagsFrom(const ordered_json& j, size_t count) {
  std::vector<uint8_t> out(count, 0);
  for (const auto& v : j) {
    const size_t i = v.get<size_t>();
    if (i >= count) {
      throw InputError("scene: contact index out of range");
    }
    out[i] = 1;
  }
  return out;
}

}  // namespace

void saveScene(const std::filesystem::path& path, const Scene& scene) {
  const std::string stem = path.stem().string();
  const std::filesystem::path dir = path.parent_path();
  const std::string objectFile = stem + "_object.obj";
  saveObj(dir / objectFile, scene.object);

  ordered_json j;
  j["format"] = "rup-scene";
  j["version"] = 1;
  j["units"] = "m";
  j["frame"] = "hand";
  j["kind"] = scene.kind;
  j["seed"] = scene.seed;
  ordered_json rotations = ordered_json::array();
  for (const Vec3& r : scene.pose.rotations) {
    rotations.push_back(vecJson(r));
  }
  j["hand"] = {{"rig", scene.rigPath.empty() ? "procedural" : scene.rigPath},
               {"pose", {{"rotations", rotations}, {"root", vecJson(scene.pose.root)}}}};
  j["object"] = {{"obj", objectFile}, {"transform", transformJson(scene.objectPose)}};
  if (scene.truth) {
    const SceneTruth& t = *scene.truth;
    const std::string gtFile = stem + "_object_gt.obj";
    saveObj(dir / gtFile, t.deformedObject);
    ordered_json degrees = ordered_json::array();
    for (size_t i = 0; i < t.objectDegrees.size(); ++i) {
      if (t.objectDegrees[i] != 0.0) degrees.push_back({i, t.objectDegrees[i]});
    }
    j["ground_truth"] = {{"deformed_obj", gtFile},
                         {"contact_pose", transformJson(t.contactPose)},
                         {"hand_contact", indexList(t.handContact)},
                         {"object_contact", indexList(t.objectContact)},
                         {"object_degrees", degrees}};
  }
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << j.dump(2) << "\n";
}

Scene loadScene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open scene " + path.string());
  }
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("scene " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "rup-scene" || j.at("version") != 1) {
      throw InputError("scene: unsupported format or version");
    }
    if (j.value("units", "m") != "m") {
      throw InputError("scene: units must be m");
    }
    const std::filesystem::path dir = path.parent_path();
    Scene scene;
    scene.kind = j.value("kind", "custom");
    scene.seed = j.value("seed", uint64_t{0});
    const std::string rig = j.at("hand").at("rig").get<std::string>();
    if (rig != "procedural") {
      const std::filesystem::path p(rig);
      scene.rigPath = (p.is_absolute() ? p : dir / p).string();
      if (!std::filesystem::exists(scene.rigPath)) {
        throw InputError("scene: rig file not found: " + scene.rigPath);
      }
    }
    const auto& rotations = j.at("hand").at("pose").at("rotations");
    if (rotations.size() != kBoneCount) {
      throw InputError("scene: pose needs 16 rotations");
    }
    for (int b = 0; b < kBoneCount; ++b) {
      scene.pose.rotations[b] = vecFrom(rotations[b]);
    }
    scene.pose.root = vecFrom(j.at("hand").at("pose").at("root"));
    const std::filesystem::path objPath = dir / j.at("object").at("obj").get<std::string>();
    if (!std::filesystem::exists(objPath)) {
      throw InputError("scene: object file not found: " + objPath.string());
    }
    scene.object = loadObj(objPath);
    scene.objectPose = transformFrom(j.at("object").at("transform"));
    if (j.contains("ground_truth")) {
      const auto& g = j.at("ground_truth");
      SceneTruth t;
      const std::filesystem::path gtPath = dir / g.at("deformed_obj").get<std::string>();
      if (!std::filesystem::exists(gtPath)) {
        throw InputError("scene: ground-truth file not found: " + gtPath.string());
      }
      t.deformedObject = loadObj(gtPath);
      if (t.deformedObject.vertexCount() != scene.object.vertexCount()) {
        throw InputError("scene: ground-truth mesh topology differs from the object");
      }
      t.contactPose = transformFrom(g.at("contact_pose"));
      t.handContact = flagsFrom(g.at("hand_contact"), scene.rig().restSurface().vertexCount());
      t.objectContact = flagsFrom(g.at("object_contact"), scene.object.vertexCount());
      t.objectDegrees.assign(scene.object.vertexCount(), 0.0);
      for (const auto& pair : g.at("object_degrees")) {
        const size_t i = pair.at(0).get<size_t>();
        if (i >= t.objectDegrees.size()) {
          throw InputError("scene: degree index out of range");
        }
        t.objectDegrees[i] = pair.at(1).get<double>();
      }
      scene.truth = std::move(t);
    }
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("scene " + path.string() + ": " + e.what());
  }
}

}  // namespace rup
