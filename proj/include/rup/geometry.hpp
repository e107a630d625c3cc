#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rup {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

/// Raised for malformed inputs (bad meshes, mismatched shapes, invalid params).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure cannot produce a usable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Self-intersection guard applied to every ray cast.
inline constexpr double kRayEpsilon = 1e-9;

// ---------------------------------------------------------------------------
// Rotations

/// Rodrigues formula. Exact identity for a zero vector.
Mat3 rotationFromAxisAngle(const Vec3& axisAngle);

/// Inverse of rotationFromAxisAngle with the angle in [0, pi].
Vec3 axisAngleFromRotation(const Mat3& rotation);

/// Derivative of (R(r) * v) with respect to r (3x3), closed form.
Mat3 rotateJacobian(const Vec3& axisAngle, const Vec3& v);

Mat3 skew(const Vec3& v);

/// Rigid motion p -> R p + t with R stored as an axis-angle vector.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Vec3& axisAngle, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform fromMatrix(const Mat3& rotation, const Vec3& translation);

  const Vec3& axisAngle() const { return axisAngle_; }
  const Vec3& translation() const { return translation_; }
  const Mat3& rotation() const { return rotation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 applyVector(const Vec3& v) const { return rotation_ * v; }

  RigidTransform inverse() const;

  /// (this * other)(p) = this(other(p)).
  RigidTransform operator*(const RigidTransform& other) const;

 private:
  Vec3 axisAngle_ = Vec3::Zero();
  Vec3 translation_ = Vec3::Zero();
  Mat3 rotation_ = Mat3::Identity();
};

// ---------------------------------------------------------------------------
// Spherical coordinates around an emission center

struct SphericalPoint {
  double rho = 0.0;
  double theta = 0.0;  // polar angle from +z, [0, pi]
  double phi = 0.0;    // azimuth, [0, 2pi)
  bool degenerate = false;
};

SphericalPoint cartToSph(const Vec3& p, const Vec3& center);
Vec3 sphToCart(const SphericalPoint& s, const Vec3& center);
Vec3 sphericalDirection(double theta, double phi);

// ---------------------------------------------------------------------------
// Triangle mesh

class TriangleMesh {
 public:
  TriangleMesh() = default;

  /// Validates indices and rejects faces with area <= 1e-12 m^2.
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Vec3>& normals() const { return normals_; }

  size_t vertexCount() const { return vertices_.size(); }
  size_t faceCount() const { return faces_.size(); }
  bool empty() const { return faces_.empty(); }

  const Vec3& vertex(size_t i) const { return vertices_[i]; }
  const Face& face(size_t f) const { return faces_[f]; }

  Vec3 faceNormal(size_t f) const;
  double faceArea(size_t f) const;

  /// Barycentric interpolation (1-u-v, u, v) of positions / normals on face f.
  Vec3 pointOnFace(size_t f, double u, double v) const;
  Vec3 normalOnFace(size_t f, double u, double v) const;

  /// Vertices whose normal could not be defined (no incident faces).
  const std::vector<int>& isolatedVertices() const { return isolated_; }

  /// Same topology, new vertex positions.
  TriangleMesh withVertices(std::vector<Vec3> vertices) const;
  TriangleMesh transformed(const RigidTransform& xf) const;
  TriangleMesh scaled(double s) const;

  /// Every undirected edge shared by exactly two faces.
  bool isWatertight() const;

  /// Connected component id per face (faces sharing a vertex are connected).
  std::vector<int> faceComponents(int* componentCount = nullptr) const;

  Eigen::AlignedBox3d bounds() const;

  /// Concatenate meshes; indices of later meshes are offset.
  static TriangleMesh merge(std::span<const TriangleMesh> parts);

 private:
  void computeNormals();

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<Vec3> normals_;
  std::vector<int> isolated_;
};

/// Area-weighted vertex normals; isolated vertices get a zero vector.
std::vector<Vec3> vertexNormals(const TriangleMesh& mesh);

// ---------------------------------------------------------------------------
// Primitive queries

struct RayHit {
  double t = 0.0;
  int face = -1;
  double u = 0.0;  // barycentric weight of vertex 1
  double v = 0.0;  // barycentric weight of vertex 2
};

/// Moller-Trumbore. Returns true for t > tMin.
bool intersectRayTriangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                          const Vec3& c, double tMin, double& t, double& u, double& v);

/// Sort ascending by (t, face) and merge hits that share t within 1e-12 relative
/// (a ray through a shared edge or vertex is counted once).
void canonicalizeHits(std::vector<RayHit>& hits);

/// Reference all-triangle loop.
std::vector<RayHit> rayCastBruteForce(const TriangleMesh& mesh, const Vec3& origin,
                                      const Vec3& dir);

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
  int face = -1;
  double u = 0.0;
  double v = 0.0;
};

/// Closest point on triangle (a, b, c) to p with barycentrics of b and c.
Vec3 closestPointOnTriangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, double& u,
                            double& v);

}  // namespace rup
