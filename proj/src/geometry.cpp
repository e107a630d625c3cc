#include "rup/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace rup {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 rotationFromAxisAngle(const Vec3& axisAngle) {
  const double theta = axisAngle.norm();
  if (theta == 0.0) {
    return Mat3::Identity();
  }
  const Vec3 axis = axisAngle / theta;
  const Mat3 k = skew(axis);
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

Vec3 axisAngleFromRotation(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(Eigen::Quaterniond(rotation).normalized());
  if (aa.angle() == 0.0) {
    return Vec3::Zero();
  }
  return aa.axis() * aa.angle();
}

Mat3 rotateJacobian(const Vec3& axisAngle, const Vec3& v) {
  const double theta2 = axisAngle.squaredNorm();
  const Mat3 r = rotationFromAxisAngle(axisAngle);
  const Mat3 vx = skew(v);
  if (theta2 < 1e-14) {
    // right Jacobian ~ I - [r]x / 2 near zero
    return -r * vx * (Mat3::Identity() - 0.5 * skew(axisAngle));
  }
  const Mat3 jr =
      (axisAngle * axisAngle.transpose() + (r.transpose() - Mat3::Identity()) * skew(axisAngle)) /
      theta2;
  return -r * vx * jr;
}

namespace {

Vec3 canonicalAxisAngle(const Vec3& axisAngle) {
  const double theta = axisAngle.norm();
  if (theta <= kPi) {
    return axisAngle;
  }
  const Vec3 axis = axisAngle / theta;
  double reduced = std::fmod(theta, kTwoPi);
  if (reduced > kPi) {
    return -axis * (kTwoPi - reduced);
  }
  return axis * reduced;
}

}  // namespace

RigidTransform::RigidTransform(const Vec3& axisAngle, const Vec3& translation)
    : axisAngle_(canonicalAxisAngle(axisAngle)),
      translation_(translation),
      rotation_(rotationFromAxisAngle(axisAngle)) {}

RigidTransform RigidTransform::fromMatrix(const Mat3& rotation, const Vec3& translation) {
  RigidTransform xf;
  xf.axisAngle_ = axisAngleFromRotation(rotation);
  xf.rotation_ = rotationFromAxisAngle(xf.axisAngle_);
  xf.translation_ = translation;
  return xf;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.axisAngle_ = -axisAngle_;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return fromMatrix(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

// ---------------------------------------------------------------------------

SphericalPoint cartToSph(const Vec3& p, const Vec3& center) {
  const Vec3 d = p - center;
  SphericalPoint s;
  s.rho = d.norm();
  if (s.rho == 0.0) {
    s.degenerate = true;
    return s;
  }
  s.theta = std::acos(std::clamp(d.z() / s.rho, -1.0, 1.0));
  double phi = std::atan2(d.y(), d.x());
  if (phi < 0.0) {
    phi += kTwoPi;
  }
  if (phi >= kTwoPi) {
    phi -= kTwoPi;
  }
  s.phi = phi;
  return s;
}

Vec3 sphericalDirection(double theta, double phi) {
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

Vec3 sphToCart(const SphericalPoint& s, const Vec3& center) {
  return center + s.rho * sphericalDirection(s.theta, s.phi);
}

// ---------------------------------------------------------------------------

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const int n = static_cast<int>(vertices_.size());
  std::vector<size_t> badIndex;
  std::vector<size_t> degenerate;
  for (size_t f = 0; f < faces_.size(); ++f) {
    const Face& tri = faces_[f];
    if (std::any_of(tri.begin(), tri.end(), [n](int i) { return i < 0 || i >= n; })) {
      badIndex.push_back(f);
      continue;
    }
    if (faceArea(f) <= 1e-12) {
      degenerate.push_back(f);
    }
  }
  auto listOf = [](const std::vector<size_t>& ids) {
    std::ostringstream os;
    for (size_t i = 0; i < ids.size() && i < 20; ++i) {
      os << (i ? ", " : "") << ids[i];
    }
    if (ids.size() > 20) {
      os << ", ... (" << ids.size() << " total)";
    }
    return os.str();
  };
  if (!badIndex.empty()) {
    throw InputError("mesh faces reference missing vertices: " + listOf(badIndex));
  }
  if (!degenerate.empty()) {
    throw InputError("degenerate mesh faces (area <= 1e-12): " + listOf(degenerate));
  }
  computeNormals();
}

void TriangleMesh::computeNormals() {
  normals_.assign(vertices_.size(), Vec3::Zero());
  for (const Face& tri : faces_) {
    // cross product length is twice the area, so this is area weighted
    const Vec3 n = (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]);
    for (int i : tri) {
      normals_[i] += n;
    }
  }
  isolated_.clear();
  for (size_t i = 0; i < normals_.size(); ++i) {
    const double len = normals_[i].norm();
    if (len > 0.0) {
      normals_[i] /= len;
    } else {
      normals_[i].setZero();
      isolated_.push_back(static_cast<int>(i));
    }
  }
}

Vec3 TriangleMesh::faceNormal(size_t f) const {
  const Face& tri = faces_[f];
  return (vertices_[tri[1]] - vertices_[tri[0]])
      .cross(vertices_[tri[2]] - vertices_[tri[0]])
      .normalized();
}

double TriangleMesh::faceArea(size_t f) const {
  const Face& tri = faces_[f];
  return 0.5 *
         (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]).norm();
}

Vec3 TriangleMesh::pointOnFace(size_t f, double u, double v) const {
  const Face& tri = faces_[f];
  return (1.0 - u - v) * vertices_[tri[0]] + u * vertices_[tri[1]] + v * vertices_[tri[2]];
}

Vec3 TriangleMesh::normalOnFace(size_t f, double u, double v) const {
  const Face& tri = faces_[f];
  const Vec3 n = (1.0 - u - v) * normals_[tri[0]] + u * normals_[tri[1]] + v * normals_[tri[2]];
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : faceNormal(f);
}

TriangleMesh TriangleMesh::withVertices(std::vector<Vec3> vertices) const {
  if (vertices.size() != vertices_.size()) {
    throw InputError("withVertices: vertex count mismatch");
  }
  return TriangleMesh(std::move(vertices), faces_);
}

TriangleMesh TriangleMesh::transformed(const RigidTransform& xf) const {
  std::vector<Vec3> out;
  out.reserve(vertices_.size());
  for (const Vec3& p : vertices_) {
    out.push_back(xf.apply(p));
  }
  return TriangleMesh(std::move(out), faces_);
}

TriangleMesh TriangleMesh::scaled(double s) const {
  std::vector<Vec3> out;
  out.reserve(vertices_.size());
  for (const Vec3& p : vertices_) {
    out.push_back(p * s);
  }
  return TriangleMesh(std::move(out), faces_);
}

bool TriangleMesh::isWatertight() const {
  std::map<std::pair<int, int>, int> edgeCount;
  for (const Face& tri : faces_) {
    for (int e = 0; e < 3; ++e) {
      int a = tri[e];
      int b = tri[(e + 1) % 3];
      if (a > b) {
        std::swap(a, b);
      }
      ++edgeCount[{a, b}];
    }
  }
  return std::all_of(edgeCount.begin(), edgeCount.end(),
                     [](const auto& kv) { return kv.second == 2; });
}

std::vector<int> TriangleMesh::faceComponents(int* componentCount) const {
  std::vector<int> parent(vertices_.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const Face& tri : faces_) {
    const int r0 = find(tri[0]);
    for (int k = 1; k < 3; ++k) {
      const int rk = find(tri[k]);
      if (rk != r0) {
        parent[rk] = r0;
      }
    }
  }
  std::vector<int> label(vertices_.size(), -1);
  std::vector<int> result(faces_.size());
  int next = 0;
  for (size_t f = 0; f < faces_.size(); ++f) {
    const int root = find(faces_[f][0]);
    if (label[root] < 0) {
      label[root] = next++;
    }
    result[f] = label[root];
  }
  if (componentCount) {
    *componentCount = next;
  }
  return result;
}

Eigen::AlignedBox3d TriangleMesh::bounds() const {
  Eigen::AlignedBox3d box;
  for (const Vec3& p : vertices_) {
    box.extend(p);
  }
  return box;
}

TriangleMesh TriangleMesh::merge(std::span<const TriangleMesh> parts) {
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  for (const TriangleMesh& part : parts) {
    const int offset = static_cast<int>(verts.size());
    verts.insert(verts.end(), part.vertices().begin(), part.vertices().end());
    for (const Face& tri : part.faces()) {
      faces.push_back({tri[0] + offset, tri[1] + offset, tri[2] + offset});
    }
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

std::vector<Vec3> vertexNormals(const TriangleMesh& mesh) {
  return mesh.normals();
}

// ---------------------------------------------------------------------------

bool intersectRayTriangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                          const Vec3& c, double tMin, double& t, double& u, double& v) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-300) {
    return false;
  }
  const double invDet = 1.0 / det;
  const Vec3 tvec = origin - a;
  u = tvec.dot(pvec) * invDet;
  if (u < 0.0 || u > 1.0) {
    return false;
  }
  const Vec3 qvec = tvec.cross(e1);
  v = dir.dot(qvec) * invDet;
  if (v < 0.0 || u + v > 1.0) {
    return false;
  }
  t = e2.dot(qvec) * invDet;
  return t > tMin;
}

void canonicalizeHits(std::vector<RayHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const RayHit& x, const RayHit& y) {
    return x.t != y.t ? x.t < y.t : x.face < y.face;
  });
  std::vector<RayHit> merged;
  merged.reserve(hits.size());
  for (const RayHit& h : hits) {
    if (!merged.empty() && h.t - merged.back().t <= 1e-12 * std::max(1.0, h.t)) {
      continue;
    }
    merged.push_back(h);
  }
  hits.swap(merged);
}

std::vector<RayHit> rayCastBruteForce(const TriangleMesh& mesh, const Vec3& origin,
                                      const Vec3& dir) {
  std::vector<RayHit> hits;
  for (size_t f = 0; f < mesh.faceCount(); ++f) {
    const Face& tri = mesh.face(f);
    RayHit h;
    if (intersectRayTriangle(origin, dir, mesh.vertex(tri[0]), mesh.vertex(tri[1]),
                             mesh.vertex(tri[2]), kRayEpsilon, h.t, h.u, h.v)) {
      h.face = static_cast<int>(f);
      hits.push_back(h);
    }
  }
  canonicalizeHits(hits);
  return hits;
}

Vec3 closestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, double& u,
                            double& v) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5)
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    u = 0.0;
    v = 0.0;
    return a;
  }
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) {
    u = 1.0;
    v = 0.0;
    return b;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double w = d1 / (d1 - d3);
    u = w;
    v = 0.0;
    return a + w * ab;
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) {
    u = 0.0;
    v = 1.0;
    return c;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    u = 0.0;
    v = w;
    return a + w * ac;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    u = 1.0 - w;
    v = w;
    return b + w * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  u = vb * denom;
  v = vc * denom;
  return a + ab * u + ac * v;
}

}  // namespace rup
