#include "rup/unwrap.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace rup {

const char* roleName(RupRole role) {
  switch (role) {
    case RupRole::Hand:
      return "hand";
    case RupRole::ObjectNear:
      return "object-near";
    case RupRole::ObjectFar:
      return "object-far";
    case RupRole::HandContact:
      return "hand-contact";
    case RupRole::ObjectContact:
      return "object-contact";
  }
  return "unknown";
}

double pixelTheta(int u, int width) { return (u + 0.5) * kPi / width; }
double pixelPhi(int v, int height) { return (v + 0.5) * kTwoPi / height; }

Vec3 pixelDirection(int u, int v, int height, int width) {
  return sphericalDirection(pixelTheta(u, width), pixelPhi(v, height));
}

RupStack::RupStack(RupRole role_, int height_, int width_,
                   const std::array<Vec3, kRegionCount>& centers_)
    : role(role_), height(height_), width(width_), centers(centers_) {
  if (height <= 0 || width <= 0) {
    throw InputError("RUP resolution must be positive");
  }
  values.assign(static_cast<size_t>(channels) * height * width, 0.0);
  hits.assign(values.size(), RayHit{});
}

void RupStack::setChannel(int channel, const RupChannel& data) {
  if (data.height != height || data.width != width) {
    throw InputError("channel resolution does not match stack");
  }
  std::copy(data.rho.begin(), data.rho.end(), values.begin() + index(channel, 0, 0));
  if (hits.size() != values.size()) {
    hits.assign(values.size(), RayHit{});
  }
  std::copy(data.hits.begin(), data.hits.end(), hits.begin() + index(channel, 0, 0));
}

RupChannel unwrapRegion(const MeshIndex& surface, const Vec3& center, UnwrapMode mode, int height,
                        int width) {
  if (height <= 0 || width <= 0) {
    throw InputError("RUP resolution must be positive");
  }
  if (surface.closestPoint(center).distance < 1e-6) {
    throw InputError("emission center lies on the surface");
  }
  RupChannel ch;
  ch.height = height;
  ch.width = width;
  ch.rho.assign(static_cast<size_t>(height) * width, 0.0);
  ch.hits.assign(ch.rho.size(), RayHit{});
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const auto hits = surface.castAll(center, pixelDirection(u, v, height, width));
      if (hits.empty()) {
        continue;
      }
      const RayHit& h = mode == UnwrapMode::Closest ? hits.front() : hits.back();
      const size_t i = static_cast<size_t>(v) * width + u;
      ch.rho[i] = h.t;
      ch.hits[i] = h;
    }
  }
  return ch;
}

std::vector<uint16_t> assignGroups(const MeshIndex& object,
                                   const std::array<Vec3, kRegionCount>& centers, int height,
                                   int width) {
  std::vector<uint16_t> groups(object.mesh().faceCount(), 0);
  for (int c = 0; c < kRegionCount; ++c) {
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        if (auto hit = object.castClosest(centers[c], pixelDirection(u, v, height, width))) {
          groups[hit->face] |= static_cast<uint16_t>(1u << c);
        }
      }
    }
  }
  return groups;
}

UnwrapResult unwrapAll(const MeshIndex& hand, const MeshIndex& object,
                       const std::array<Vec3, kRegionCount>& centers, int height, int width) {
  UnwrapResult out{RupStack(RupRole::Hand, height, width, centers),
                   RupStack(RupRole::ObjectNear, height, width, centers),
                   RupStack(RupRole::ObjectFar, height, width, centers)};
  for (int c = 0; c < kRegionCount; ++c) {
    out.hand.setChannel(c, unwrapRegion(hand, centers[c], UnwrapMode::Closest, height, width));
    out.objectNear.setChannel(
        c, unwrapRegion(object, centers[c], UnwrapMode::Closest, height, width));
    out.objectFar.setChannel(
        c, unwrapRegion(object, centers[c], UnwrapMode::Farthest, height, width));
  }
  return out;
}

UnwrapResult unwrapAll(const ArticulatedHand& hand, const TriangleMesh& object, int height,
                       int width) {
  return unwrapAll(MeshIndex(hand.surface), MeshIndex(object), regionCenters(hand), height, width);
}

Vec3 backProjectPixel(const RupStack& stack, int channel, int v, int u) {
  SphericalPoint s;
  s.rho = stack.at(channel, v, u);
  s.theta = pixelTheta(u, stack.width);
  s.phi = pixelPhi(v, stack.height);
  return sphToCart(s, stack.centers[channel]);
}

std::vector<BackProjectedPixel> backProject(const RupStack& stack, int channel) {
  std::vector<BackProjectedPixel> out;
  for (int v = 0; v < stack.height; ++v) {
    for (int u = 0; u < stack.width; ++u) {
      if (stack.at(channel, v, u) > 0.0) {
        out.push_back({u, v, backProjectPixel(stack, channel, v, u)});
      }
    }
  }
  return out;
}

size_t SampledPointSet::validCount() const {
  return static_cast<size_t>(std::count(valid.begin(), valid.end(), uint8_t{1}));
}

SampledPointSet gridSample(const RupStack& nearStack, const RupStack& farStack, int cellSize,
                           const Vec3& maskPoint) {
  if (nearStack.height != farStack.height || nearStack.width != farStack.width ||
      nearStack.channels != farStack.channels) {
    throw InputError("grid sampling needs stacks of equal shape");
  }
  if (cellSize <= 0 || nearStack.height % cellSize != 0 || nearStack.width % cellSize != 0) {
    throw InputError("grid size " + std::to_string(cellSize) + " does not divide the " +
                     std::to_string(nearStack.height) + "x" + std::to_string(nearStack.width) +
                     " resolution");
  }
  const int rows = nearStack.height / cellSize;
  const int cols = nearStack.width / cellSize;
  SampledPointSet set;
  set.maskPoint = maskPoint;
  const size_t total = 2ull * nearStack.channels * rows * cols;
  set.points.reserve(total);
  set.tags.reserve(total);
  set.valid.reserve(total);
  for (const RupStack* stack : {&nearStack, &farStack}) {
    const RupRole role = stack == &nearStack ? RupRole::ObjectNear : RupRole::ObjectFar;
    for (int c = 0; c < stack->channels; ++c) {
      for (int r = 0; r < rows; ++r) {
        for (int q = 0; q < cols; ++q) {
          SampleTag tag{role, c, r, q, -1, -1};
          double best = 0.0;
          for (int v = r * cellSize; v < (r + 1) * cellSize; ++v) {
            for (int u = q * cellSize; u < (q + 1) * cellSize; ++u) {
              const double rho = stack->at(c, v, u);
              if (rho > best) {
                best = rho;
                tag.u = u;
                tag.v = v;
              }
            }
          }
          if (tag.u >= 0) {
            set.points.push_back(backProjectPixel(*stack, c, tag.v, tag.u));
            set.valid.push_back(1);
          } else {
            set.points.push_back(maskPoint);
            set.valid.push_back(0);
          }
          set.tags.push_back(tag);
        }
      }
    }
  }
  return set;
}

// ---------------------------------------------------------------------------

namespace {

using detail::putLe;

template <typename T>
T getLe(std::istream& in) {
  return detail::getLe<T>(in, "RUPS record");
}

}  // namespace

void writeRups(std::ostream& out, const RupStack& stack) {
  if (stack.channels > 0xffff || stack.height > 0xffff || stack.width > 0xffff) {
    throw InputError("RUPS dimensions exceed 16 bits");
  }
  out.write("RUPS", 4);
  putLe<uint8_t>(out, 1);
  putLe<uint8_t>(out, static_cast<uint8_t>(stack.role));
  putLe<uint16_t>(out, static_cast<uint16_t>(stack.channels));
  putLe<uint16_t>(out, static_cast<uint16_t>(stack.height));
  putLe<uint16_t>(out, static_cast<uint16_t>(stack.width));
  for (double v : stack.values) {
    putLe<float>(out, static_cast<float>(v));
  }
  for (const Vec3& c : stack.centers) {
    for (int k = 0; k < 3; ++k) {
      putLe<float>(out, static_cast<float>(c[k]));
    }
  }
}

RupStack readRups(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RUPS", 4) != 0) {
    throw InputError("not a RUPS record");
  }
  const auto version = getLe<uint8_t>(in);
  if (version != 1) {
    throw InputError("unsupported RUPS version " + std::to_string(version));
  }
  const auto role = getLe<uint8_t>(in);
  if (role > static_cast<uint8_t>(RupRole::ObjectContact)) {
    throw InputError("unknown RUPS role " + std::to_string(role));
  }
  RupStack stack;
  stack.role = static_cast<RupRole>(role);
  stack.channels = getLe<uint16_t>(in);
  stack.height = getLe<uint16_t>(in);
  stack.width = getLe<uint16_t>(in);
  if (stack.channels != kRegionCount) {
    throw InputError("RUPS record must have 16 channels");
  }
  stack.values.resize(static_cast<size_t>(stack.channels) * stack.height * stack.width);
  for (double& v : stack.values) {
    v = getLe<float>(in);
  }
  for (Vec3& c : stack.centers) {
    for (int k = 0; k < 3; ++k) {
      c[k] = getLe<float>(in);
    }
  }
  return stack;
}

void saveRups(const std::filesystem::path& path, std::span<const RupStack> stacks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  for (const RupStack& s : stacks) {
    writeRups(out, s);
  }
}

std::vector<RupStack> loadRups(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  std::vector<RupStack> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    out.push_back(readRups(in));
  }
  return out;
}

}  // namespace rup
