#include "rup/mesh_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rup {

namespace {

constexpr int kLeafSize = 4;
constexpr int kBins = 12;

bool rayHitsBox(const Eigen::AlignedBox3d& box, const Vec3& origin, const Vec3& invDir,
                const Vec3& dir, double tMax) {
  double lo = 0.0;
  double hi = tMax;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min()[a] || origin[a] > box.max()[a]) {
        return false;
      }
      continue;
    }
    double t0 = (box.min()[a] - origin[a]) * invDir[a];
    double t1 = (box.max()[a] - origin[a]) * invDir[a];
    if (t0 > t1) {
      std::swap(t0, t1);
    }
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) {
      return false;
    }
  }
  return true;
}

double boxSquaredDistance(const Eigen::AlignedBox3d& box, const Vec3& p) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double v = p[a];
    if (v < box.min()[a]) {
      d2 += (box.min()[a] - v) * (box.min()[a] - v);
    } else if (v > box.max()[a]) {
      d2 += (v - box.max()[a]) * (v - box.max()[a]);
    }
  }
  return d2;
}

double surfaceArea(const Eigen::AlignedBox3d& box) {
  if (box.isEmpty()) {
    return 0.0;
  }
  const Vec3 e = box.sizes();
  return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
}

// Fixed, non-axis-aligned directions for the majority-vote inside test.
const std::array<Vec3, 3>& insideDirections() {
  static const std::array<Vec3, 3> dirs = {
      Vec3(0.5773502691896258, 0.4082482904638631, 0.7071067811865476).normalized(),
      Vec3(-0.3141592653589793, 0.8660254037844386, -0.2718281828459045).normalized(),
      Vec3(0.1414213562373095, -0.7320508075688772, 0.6180339887498949).normalized()};
  return dirs;
}

}  // namespace

MeshIndex::MeshIndex(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  component_ = mesh_.faceComponents(&componentCount_);
  const int n = static_cast<int>(mesh_.faceCount());
  if (n == 0) {
    return;
  }
  std::vector<Eigen::AlignedBox3d> boxes(n);
  std::vector<Vec3> centroids(n);
  for (int f = 0; f < n; ++f) {
    const Face& tri = mesh_.face(f);
    Eigen::AlignedBox3d box;
    for (int i : tri) {
      box.extend(mesh_.vertex(i));
    }
    // pad so triangles lying on a box face are never culled by the slab test
    const double pad = 1e-9 * box.sizes().maxCoeff() + 1e-12;
    box.min().array() -= pad;
    box.max().array() += pad;
    boxes[f] = box;
    centroids[f] = box.center();
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * n / kLeafSize + 2);
  build(0, n, boxes, centroids);
}

int MeshIndex::build(int first, int count, std::vector<Eigen::AlignedBox3d>& boxes,
                     std::vector<Vec3>& centroids) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroidBox;
  for (int i = first; i < first + count; ++i) {
    box.extend(boxes[order_[i]]);
    centroidBox.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }

  // binned SAH split
  int bestAxis = -1;
  int bestSplit = -1;
  double bestCost = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = centroidBox.min()[axis];
    const double extent = centroidBox.max()[axis] - lo;
    if (extent <= 0.0) {
      continue;
    }
    std::array<Eigen::AlignedBox3d, kBins> binBox;
    std::array<int, kBins> binCount{};
    for (int i = first; i < first + count; ++i) {
      int b = static_cast<int>((centroids[order_[i]][axis] - lo) / extent * kBins);
      b = std::clamp(b, 0, kBins - 1);
      binBox[b].extend(boxes[order_[i]]);
      ++binCount[b];
    }
    for (int split = 1; split < kBins; ++split) {
      Eigen::AlignedBox3d l;
      Eigen::AlignedBox3d r;
      int nl = 0;
      int nr = 0;
      for (int b = 0; b < split; ++b) {
        if (binCount[b]) {
          l.extend(binBox[b]);
          nl += binCount[b];
        }
      }
      for (int b = split; b < kBins; ++b) {
        if (binCount[b]) {
          r.extend(binBox[b]);
          nr += binCount[b];
        }
      }
      if (nl == 0 || nr == 0) {
        continue;
      }
      const double cost = nl * surfaceArea(l) + nr * surfaceArea(r);
      if (cost < bestCost) {
        bestCost = cost;
        bestAxis = axis;
        bestSplit = split;
      }
    }
  }

  int mid = first + count / 2;
  if (bestAxis >= 0) {
    const double lo = centroidBox.min()[bestAxis];
    const double extent = centroidBox.max()[bestAxis] - lo;
    auto it = std::stable_partition(order_.begin() + first, order_.begin() + first + count,
                                    [&](int f) {
                                      int b = static_cast<int>(
                                          (centroids[f][bestAxis] - lo) / extent * kBins);
                                      return std::clamp(b, 0, kBins - 1) < bestSplit;
                                    });
    mid = static_cast<int>(it - order_.begin());
  }
  if (mid == first || mid == first + count) {
    mid = first + count / 2;
  }
  const int left = build(first, mid - first, boxes, centroids);
  const int right = build(mid, first + count - mid, boxes, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

template <typename Visit>
void MeshIndex::traverseRay(const Vec3& origin, const Vec3& dir, Visit&& visit) const {
  if (nodes_.empty()) {
    return;
  }
  const Vec3 invDir(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
  const double tMax = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!rayHitsBox(node.box, origin, invDir, dir, tMax)) {
      continue;
    }
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        visit(order_[i]);
      }
      continue;
    }
    stack.push_back(node.left);
    stack.push_back(node.right);
  }
}

std::vector<RayHit> MeshIndex::castAll(const Vec3& origin, const Vec3& dir) const {
  std::vector<RayHit> hits;
  traverseRay(origin, dir, [&](int f) {
    const Face& tri = mesh_.face(f);
    RayHit h;
    if (intersectRayTriangle(origin, dir, mesh_.vertex(tri[0]), mesh_.vertex(tri[1]),
                             mesh_.vertex(tri[2]), kRayEpsilon, h.t, h.u, h.v)) {
      h.face = f;
      hits.push_back(h);
    }
  });
  canonicalizeHits(hits);
  return hits;
}

std::optional<RayHit> MeshIndex::castClosest(const Vec3& origin, const Vec3& dir) const {
  auto hits = castAll(origin, dir);
  if (hits.empty()) {
    return std::nullopt;
  }
  return hits.front();
}

std::optional<RayHit> MeshIndex::castFarthest(const Vec3& origin, const Vec3& dir) const {
  auto hits = castAll(origin, dir);
  if (hits.empty()) {
    return std::nullopt;
  }
  return hits.back();
}

ClosestPoint MeshIndex::closestPoint(const Vec3& p) const {
  ClosestPoint best;
  best.distance = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) {
    return best;
  }
  double bestD2 = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (boxSquaredDistance(node.box, p) > bestD2) {
      continue;
    }
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int f = order_[i];
        const Face& tri = mesh_.face(f);
        double u = 0.0;
        double v = 0.0;
        const Vec3 q = closestPointOnTriangle(p, mesh_.vertex(tri[0]), mesh_.vertex(tri[1]),
                                              mesh_.vertex(tri[2]), u, v);
        const double d2 = (q - p).squaredNorm();
        if (d2 < bestD2 || (d2 == bestD2 && f < best.face)) {
          bestD2 = d2;
          best.point = q;
          best.face = f;
          best.u = u;
          best.v = v;
        }
      }
      continue;
    }
    // visit the nearer child first
    const double dl = boxSquaredDistance(nodes_[node.left].box, p);
    const double dr = boxSquaredDistance(nodes_[node.right].box, p);
    if (dl < dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  best.distance = std::sqrt(bestD2);
  return best;
}

bool MeshIndex::containsAlong(const Vec3& p, const Vec3& dir) const {
  if (componentCount_ == 0) {
    return false;
  }
  std::vector<int> parity(componentCount_, 0);
  for (const RayHit& h : castAll(p, dir)) {
    parity[component_[h.face]] ^= 1;
  }
  return std::any_of(parity.begin(), parity.end(), [](int x) { return x != 0; });
}

bool MeshIndex::contains(const Vec3& p) const {
  if (nodes_.empty() || !nodes_[0].box.contains(p)) {
    return false;
  }
  int votes = 0;
  for (const Vec3& d : insideDirections()) {
    votes += containsAlong(p, d) ? 1 : 0;
  }
  return votes >= 2;
}

}  // namespace rup
