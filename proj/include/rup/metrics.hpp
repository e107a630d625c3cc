#pragma once

#include "rup/mesh_index.hpp"

#include <span>
#include <string>

namespace rup {

inline constexpr double kDefaultVoxelPitchMm = 2.0;

/// Mean joint distance in mm. Both sides must hold 21 joints.
double mpjpe(std::span<const Vec3> pred, std::span<const Vec3> gt);

/// Mean vertex distance in mm over corresponding vertices.
double mpvpe(std::span<const Vec3> pred, std::span<const Vec3> gt);

struct PenetrationResult {
  double depthMm = 0.0;  // 0 when no point is inside
  int vertex = -1;       // deepest point
  int insideCount = 0;
};

/// Deepest of `points` inside the object, measured to the object surface.
PenetrationResult penetration(std::span<const Vec3> points, const MeshIndex& object);

/// Max over hand vertices inside the object, in mm. Throws InputError for a
/// non-watertight object.
double maxPenetration(const TriangleMesh& hand, const TriangleMesh& object);

struct VolumeEstimate {
  double volumeCm3 = 0.0;
  double pitchMm = 0.0;
  double halfPitchVolumeCm3 = 0.0;
  double relativeDelta = 0.0;  // |half - full| / full, 0 when both are 0
};

/// Voxels (cube centers over the bounding-box overlap) inside both meshes, in cm^3.
/// Occupancy is a majority vote of x, y and z scanline parity. Throws InputError
/// for non-watertight input or a non-positive pitch.
double intersectionVolume(const TriangleMesh& a, const TriangleMesh& b,
                          double pitchMm = kDefaultVoxelPitchMm);

/// Volume at `pitchMm` plus a half-pitch re-run.
VolumeEstimate intersectionVolumeReport(const TriangleMesh& a, const TriangleMesh& b,
                                        double pitchMm = kDefaultVoxelPitchMm);

struct MetricsReport {
  double mpjpe = 0.0;            // mm
  double mpvpe = 0.0;            // mm
  double maxPenetration = 0.0;   // mm
  VolumeEstimate intersection;   // cm^3

  std::string toJson() const;
  /// "MPJPE ... | MPVPE ... | Max Pene ... | Inter ..." for logs.
  std::string summary() const;
};

}  // namespace rup
