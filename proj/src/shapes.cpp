#include "rup/shapes.hpp"

#include <cmath>
#include <map>

namespace rup::shapes {

TriangleMesh icosphere(double radius, int level, const Vec3& center) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                             {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                             {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : verts) {
    v.normalize();
  }
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7}, {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) {
        return it->second;
      }
      verts.push_back((verts[a] + verts[b]).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces.swap(next);
  }
  for (Vec3& v : verts) {
    v = center + radius * v;
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

TriangleMesh uvSphere(double radius, int rings, int segments, const Vec3& center) {
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  verts.push_back(center + Vec3(0, 0, radius));
  for (int r = 1; r < rings; ++r) {
    const double theta = kPi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double phi = kTwoPi * s / segments;
      verts.push_back(center + radius * sphericalDirection(theta, phi));
    }
  }
  verts.push_back(center + Vec3(0, 0, -radius));
  const int south = static_cast<int>(verts.size()) - 1;
  auto ring = [segments](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) {
    faces.push_back({0, ring(1, s), ring(1, s + 1)});
  }
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int a = ring(r, s);
      const int b = ring(r, s + 1);
      const int c = ring(r + 1, s + 1);
      const int d = ring(r + 1, s);
      faces.push_back({a, d, c});
      faces.push_back({a, c, b});
    }
  }
  for (int s = 0; s < segments; ++s) {
    faces.push_back({south, ring(rings - 1, s + 1), ring(rings - 1, s)});
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

TriangleMesh capsule(double length, double radiusY, double radiusZ, int segments, int capRings,
                     double maxSpacing) {
  struct Ring {
    double x;
    double scale;
  };
  std::vector<Ring> rings;
  const double bulge = radiusY;
  for (int j = 1; j <= capRings; ++j) {
    const double a = 0.5 * kPi * j / capRings;
    rings.push_back({-bulge * std::cos(a), std::sin(a)});
  }
  const int body = maxSpacing > 0.0 ? static_cast<int>(std::ceil(length / maxSpacing)) : 1;
  for (int j = 1; j < body; ++j) {
    rings.push_back({length * j / body, 1.0});
  }
  for (int j = capRings; j >= 1; --j) {
    const double a = 0.5 * kPi * j / capRings;
    rings.push_back({length + bulge * std::cos(a), std::sin(a)});
  }
  std::vector<Vec3> verts;
  verts.emplace_back(-bulge, 0.0, 0.0);
  for (const Ring& r : rings) {
    for (int s = 0; s < segments; ++s) {
      const double b = kTwoPi * s / segments;
      verts.emplace_back(r.x, radiusY * r.scale * std::cos(b), radiusZ * r.scale * std::sin(b));
    }
  }
  verts.emplace_back(length + bulge, 0.0, 0.0);
  const int last = static_cast<int>(verts.size()) - 1;
  const int nr = static_cast<int>(rings.size());
  auto at = [segments](int r, int s) { return 1 + r * segments + (s % segments); };
  std::vector<Face> faces;
  for (int s = 0; s < segments; ++s) {
    faces.push_back({0, at(0, s + 1), at(0, s)});
  }
  for (int r = 0; r + 1 < nr; ++r) {
    for (int s = 0; s < segments; ++s) {
      const int a = at(r, s);
      const int b = at(r, s + 1);
      const int c = at(r + 1, s + 1);
      const int d = at(r + 1, s);
      faces.push_back({a, b, c});
      faces.push_back({a, c, d});
    }
  }
  for (int s = 0; s < segments; ++s) {
    faces.push_back({last, at(nr - 1, s), at(nr - 1, s + 1)});
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

TriangleMesh box(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v = {{lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()},
                         {hi.x(), hi.y(), lo.z()}, {lo.x(), hi.y(), lo.z()},
                         {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
                         {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()}};
  std::vector<Face> f = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                         {2, 3, 7}, {2, 7, 6}, {1, 2, 6}, {1, 6, 5}, {0, 4, 7}, {0, 7, 3}};
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh planeGrid(double size, int n, const Vec3& center) {
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      verts.push_back(center + Vec3(size * (double(i) / n - 0.5), size * (double(j) / n - 0.5), 0));
    }
  }
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

}  // namespace rup::shapes
