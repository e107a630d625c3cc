#pragma once

#include "rup/contact.hpp"
#include "rup/hand.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rup {

enum class SceneKind { GraspSphere, PinchCapsule, PressPlane };

const char* sceneKindName(SceneKind kind);
/// Throws InputError for unknown names.
SceneKind sceneKindFromName(const std::string& name);

struct SynthParams {
  SceneKind kind = SceneKind::GraspSphere;
  double size = 0.04;          // sphere radius, capsule radius, slab half-thickness (m)
  double degree = 0.0;         // deformed degree applied on the contact patch, [0, 1]
  double gapMm = 0.5;          // clearance left when closing the fingers
  double penetrationMm = 0.0;  // push the object toward the palm to this max penetration
  double jitterMm = 1.0;       // seeded lateral placement noise
  double contactThreshold = kDefaultContactThreshold;
  uint64_t seed = 0;

  void validate() const;
};

/// Ground truth for a generated scene. Contact sets refer to the contacting
/// placement, before any penetration offset.
struct SceneTruth {
  std::vector<uint8_t> handContact;    // per hand vertex
  std::vector<uint8_t> objectContact;  // per object vertex
  std::vector<double> objectDegrees;   // per object vertex
  TriangleMesh deformedObject;         // object local frame
  RigidTransform contactPose;          // object placement without the offset
};

/// Hand frame scene: the object template lives in its own frame and is placed by
/// `objectPose`. The rig is the procedural rig unless `rigPath` is set.
struct Scene {
  std::string kind = "custom";
  uint64_t seed = 0;
  std::string rigPath;  // empty: procedural rig
  HandPose pose;
  TriangleMesh object;  // local frame
  RigidTransform objectPose;
  std::optional<SceneTruth> truth;

  const HandRig& rig() const;
  ArticulatedHand hand() const;
  TriangleMesh placedObject() const { return object.transformed(objectPose); }
  std::optional<TriangleMesh> placedDeformedObject() const;

 private:
  mutable std::optional<HandRig> loadedRig_;
};

/// Deterministic scene generation. Fingers close by bisection until each
/// finger is `gapMm` from the object (or fully flexed).
Scene synthesize(const SynthParams& params);

/// Scene file (JSON) with sibling OBJ files; paths in the JSON are relative.
void saveScene(const std::filesystem::path& path, const Scene& scene);
Scene loadScene(const std::filesystem::path& path);

}  // namespace rup
