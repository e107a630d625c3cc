#pragma once

#include "rup/geometry.hpp"
#include "rup/hand.hpp"
#include "rup/mesh_index.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace rup {

inline constexpr int kRegionCount = 16;
inline constexpr int kDefaultResolution = 64;
inline constexpr int kDefaultGrid = 4;

enum class RupRole : uint8_t {
  Hand = 0,
  ObjectNear = 1,
  ObjectFar = 2,
  HandContact = 3,
  ObjectContact = 4,
};

const char* roleName(RupRole role);

enum class UnwrapMode { Closest, Farthest };

/// Ray direction of pixel (u, v): theta = (u + 0.5) pi / W, phi = (v + 0.5) 2pi / H.
double pixelTheta(int u, int width);
double pixelPhi(int v, int height);
Vec3 pixelDirection(int u, int v, int height, int width);

/// One profile channel plus the face hit behind every nonzero pixel.
struct RupChannel {
  int height = 0;
  int width = 0;
  std::vector<double> rho;   // row-major, u fastest; 0 = no intersection
  std::vector<RayHit> hits;  // face = -1 where rho = 0
};

/// Sixteen H x W radial-distance images sharing the emission centers.
/// Contact maps reuse the container with the contact roles.
struct RupStack {
  RupRole role = RupRole::Hand;
  int channels = kRegionCount;
  int height = kDefaultResolution;
  int width = kDefaultResolution;
  std::array<Vec3, kRegionCount> centers;
  std::vector<double> values;
  std::vector<RayHit> hits;  // parallel to values; empty when loaded from disk

  RupStack() { centers.fill(Vec3::Zero()); }
  RupStack(RupRole role, int height, int width, const std::array<Vec3, kRegionCount>& centers);

  size_t index(int channel, int v, int u) const {
    return (static_cast<size_t>(channel) * height + v) * width + u;
  }
  double& at(int channel, int v, int u) { return values[index(channel, v, u)]; }
  double at(int channel, int v, int u) const { return values[index(channel, v, u)]; }
  size_t pixelsPerChannel() const { return static_cast<size_t>(height) * width; }
  bool hasHits() const { return hits.size() == values.size(); }

  void setChannel(int channel, const RupChannel& data);
};

/// Profile of one surface seen from `center` (closest or farthest hit per ray).
/// Throws InputError when the center lies within 1e-6 m of the surface.
RupChannel unwrapRegion(const MeshIndex& surface, const Vec3& center, UnwrapMode mode, int height,
                        int width);

/// Group bitmask per face: bit i set when some ray of center i's grid hits the
/// face first. An object face may belong to several groups.
std::vector<uint16_t> assignGroups(const MeshIndex& object,
                                   const std::array<Vec3, kRegionCount>& centers, int height,
                                   int width);

struct UnwrapResult {
  RupStack hand;
  RupStack objectNear;
  RupStack objectFar;
};

/// Hand, object-near and object-far stacks from identical ray grids rooted at
/// the hand's region centers.
UnwrapResult unwrapAll(const MeshIndex& hand, const MeshIndex& object,
                       const std::array<Vec3, kRegionCount>& centers, int height = kDefaultResolution,
                       int width = kDefaultResolution);
UnwrapResult unwrapAll(const ArticulatedHand& hand, const TriangleMesh& object,
                       int height = kDefaultResolution, int width = kDefaultResolution);

struct BackProjectedPixel {
  int u = 0;
  int v = 0;
  Vec3 point = Vec3::Zero();
};

/// Cartesian points for the nonzero pixels of one channel.
std::vector<BackProjectedPixel> backProject(const RupStack& stack, int channel);
Vec3 backProjectPixel(const RupStack& stack, int channel, int v, int u);

struct SampleTag {
  RupRole role = RupRole::ObjectNear;
  int channel = 0;
  int cellRow = 0;
  int cellCol = 0;
  int u = -1;  // selected pixel; -1 for empty cells
  int v = -1;
};

/// Ordered point set: role-major (near, far), channel-major, cells row-major.
struct SampledPointSet {
  std::vector<Vec3> points;
  std::vector<SampleTag> tags;
  std::vector<uint8_t> valid;
  Vec3 maskPoint = Vec3::Zero();

  size_t size() const { return points.size(); }
  size_t validCount() const;
};

/// One point per n x n cell of every object channel: the pixel with maximum
/// rho (first in row-major order on ties), or the mask point for empty cells.
SampledPointSet gridSample(const RupStack& nearStack, const RupStack& farStack, int cellSize,
                           const Vec3& maskPoint = Vec3::Zero());

// RUPS container: a sequence of self-describing little-endian records.
void writeRups(std::ostream& out, const RupStack& stack);
RupStack readRups(std::istream& in);
void saveRups(const std::filesystem::path& path, std::span<const RupStack> stacks);
std::vector<RupStack> loadRups(const std::filesystem::path& path);

}  // namespace rup
