#include "rup/metrics.hpp"

#include "rup/hand.hpp"
#include "rup/numeric.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace rup {

namespace {

double meanDistanceMm(std::span<const Vec3> pred, std::span<const Vec3> gt, const char* what) {
  if (pred.size() != gt.size()) {
    throw InputError(std::string(what) + ": count mismatch (" + std::to_string(pred.size()) +
                     " vs " + std::to_string(gt.size()) + ")");
  }
  if (pred.empty()) {
    throw InputError(std::string(what) + ": no points");
  }
  std::vector<double> d(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    d[i] = (pred[i] - gt[i]).norm();
  }
  return 1000.0 * pairwiseSum(d) / static_cast<double>(d.size());
}

void requireWatertight(const TriangleMesh& mesh, const char* what) {
  if (mesh.empty() || !mesh.isWatertight()) {
    throw InputError(std::string(what) + " mesh is not watertight");
  }
}

struct VoxelGrid {
  Vec3 origin;  // center of voxel (0, 0, 0)
  std::array<int, 3> dims{0, 0, 0};
  double pitch = 0.0;

  size_t count() const { return static_cast<size_t>(dims[0]) * dims[1] * dims[2]; }
  size_t index(int x, int y, int z) const {
    return (static_cast<size_t>(z) * dims[1] + y) * dims[0] + x;
  }
};

// Scanline parity along one axis: one ray per line, hits walked in order.
void scanAxis(const MeshIndex& mesh, const VoxelGrid& grid, int axis, std::vector<uint8_t>& votes) {
  const int a1 = (axis + 1) % 3;
  const int a2 = (axis + 2) % 3;
  const double start =
      std::min(grid.origin[axis], mesh.mesh().bounds().min()[axis]) - grid.pitch;
  Vec3 dir = Vec3::Zero();
  dir[axis] = 1.0;
  std::vector<int> parity(std::max(mesh.componentCount(), 1));
  std::array<int, 3> idx{};
  for (int j = 0; j < grid.dims[a1]; ++j) {
    for (int k = 0; k < grid.dims[a2]; ++k) {
      Vec3 origin = grid.origin;
      origin[a1] += j * grid.pitch;
      origin[a2] += k * grid.pitch;
      origin[axis] = start;
      const std::vector<RayHit> hits = mesh.castAll(origin, dir);
      if (hits.empty()) {
        continue;
      }
      std::fill(parity.begin(), parity.end(), 0);
      int odd = 0;
      size_t h = 0;
      idx[a1] = j;
      idx[a2] = k;
      for (int i = 0; i < grid.dims[axis]; ++i) {
        const double t = grid.origin[axis] + i * grid.pitch - start;
        while (h < hits.size() && hits[h].t < t) {
          int& p = parity[mesh.faceComponent()[hits[h].face]];
          p ^= 1;
          odd += p ? 1 : -1;
          ++h;
        }
        if (odd > 0) {
          idx[axis] = i;
          ++votes[grid.index(idx[0], idx[1], idx[2])];
        }
      }
    }
  }
}

std::vector<uint8_t> occupancy(const MeshIndex& mesh, const VoxelGrid& grid) {
  std::vector<uint8_t> votes(grid.count(), 0);
  for (int axis = 0; axis < 3; ++axis) {
    scanAxis(mesh, grid, axis, votes);
  }
  return votes;
}

double volumeAt(const MeshIndex& a, const MeshIndex& b, double pitchMm) {
  const Eigen::AlignedBox3d box = a.mesh().bounds().intersection(b.mesh().bounds());
  if (box.isEmpty()) {
    return 0.0;
  }
  VoxelGrid grid;
  grid.pitch = pitchMm / 1000.0;
  const Vec3 extent = box.sizes();
  for (int d = 0; d < 3; ++d) {
    grid.dims[d] = std::max(1, static_cast<int>(std::ceil(extent[d] / grid.pitch)));
    grid.origin[d] = box.min()[d] + 0.5 * (extent[d] - (grid.dims[d] - 1) * grid.pitch);
  }
  const std::vector<uint8_t> inA = occupancy(a, grid);
  const std::vector<uint8_t> inB = occupancy(b, grid);
  size_t count = 0;
  for (size_t i = 0; i < inA.size(); ++i) {
    count += (inA[i] >= 2 && inB[i] >= 2) ? 1 : 0;
  }
  const double cm = pitchMm / 10.0;
  return static_cast<double>(count) * cm * cm * cm;
}

}  // namespace

double mpjpe(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  if (pred.size() != kJointCount || gt.size() != kJointCount) {
    throw InputError("mpjpe: expected 21 joints per side");
  }
  return meanDistanceMm(pred, gt, "mpjpe");
}

double mpvpe(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  return meanDistanceMm(pred, gt, "mpvpe");
}

PenetrationResult penetration(std::span<const Vec3> points, const MeshIndex& object) {
  PenetrationResult result;
  for (size_t i = 0; i < points.size(); ++i) {
    if (!object.contains(points[i])) {
      continue;
    }
    ++result.insideCount;
    const double depth = 1000.0 * object.closestPoint(points[i]).distance;
    if (depth > result.depthMm || result.vertex < 0) {
      result.depthMm = depth;
      result.vertex = static_cast<int>(i);
    }
  }
  return result;
}

double maxPenetration(const TriangleMesh& hand, const TriangleMesh& object) {
  requireWatertight(object, "object");
  const MeshIndex index(object);
  return penetration(hand.vertices(), index).depthMm;
}

double intersectionVolume(const TriangleMesh& a, const TriangleMesh& b, double pitchMm) {
  if (!(pitchMm > 0.0) || !std::isfinite(pitchMm)) {
    throw InputError("voxel pitch must be positive");
  }
  requireWatertight(a, "first");
  requireWatertight(b, "second");
  return volumeAt(MeshIndex(a), MeshIndex(b), pitchMm);
}

VolumeEstimate intersectionVolumeReport(const TriangleMesh& a, const TriangleMesh& b,
                                        double pitchMm) {
  if (!(pitchMm > 0.0) || !std::isfinite(pitchMm)) {
    throw InputError("voxel pitch must be positive");
  }
  requireWatertight(a, "first");
  requireWatertight(b, "second");
  const MeshIndex ia(a);
  const MeshIndex ib(b);
  VolumeEstimate e;
  e.pitchMm = pitchMm;
  e.volumeCm3 = volumeAt(ia, ib, pitchMm);
  e.halfPitchVolumeCm3 = volumeAt(ia, ib, 0.5 * pitchMm);
  if (e.volumeCm3 > 0.0) {
    e.relativeDelta = std::abs(e.halfPitchVolumeCm3 - e.volumeCm3) / e.volumeCm3;
  } else if (e.halfPitchVolumeCm3 > 0.0) {
    e.relativeDelta = 1.0;
  }
  return e;
}

std::string MetricsReport::toJson() const {
  nlohmann::ordered_json j;
  j["format"] = "rup-metrics";
  j["version"] = 1;
  j["mpjpe_mm"] = mpjpe;
  j["mpvpe_mm"] = mpvpe;
  j["max_penetration_mm"] = maxPenetration;
  j["intersection_volume_cm3"] = intersection.volumeCm3;
  j["voxel_pitch_mm"] = intersection.pitchMm;
  j["half_pitch_volume_cm3"] = intersection.halfPitchVolumeCm3;
  j["half_pitch_relative_delta"] = intersection.relativeDelta;
  return j.dump(2) + "\n";
}

std::string MetricsReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "MPJPE %.2f mm | MPVPE %.2f mm | Max Pene %.2f mm | Inter %.2f cm3 (pitch %.1f mm, "
                "half-pitch delta %.1f%%)",
                mpjpe, mpvpe, maxPenetration, intersection.volumeCm3, intersection.pitchMm,
                100.0 * intersection.relativeDelta);
  return buf;
}

}  // namespace rup
