#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rup/geometry.hpp"
#include "rup/mesh_index.hpp"
#include "rup/obj_io.hpp"
#include "rup/shapes.hpp"

#include <random>
#include <sstream>

using namespace rup;

namespace {

Vec3 randomUnit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

TriangleMesh triangleSoup(int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  while (static_cast<int>(faces.size()) < count) {
    const Vec3 c(u(rng), u(rng), u(rng));
    const Vec3 a = c + 0.15 * Vec3(u(rng), u(rng), u(rng));
    const Vec3 b = c + 0.15 * Vec3(u(rng), u(rng), u(rng));
    const Vec3 d = c + 0.15 * Vec3(u(rng), u(rng), u(rng));
    if ((b - a).cross(d - a).norm() < 1e-6) {
      continue;
    }
    const int base = static_cast<int>(verts.size());
    verts.insert(verts.end(), {a, b, d});
    faces.push_back({base, base + 1, base + 2});
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

void requireSameHits(const std::vector<RayHit>& a, const std::vector<RayHit>& b) {
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].face == b[i].face);
    CHECK(std::abs(a[i].t - b[i].t) <= 1e-9);
  }
}

}  // namespace

TEST_CASE("cartToSph conventions") {
  const Vec3 o = Vec3::Zero();
  auto s = cartToSph({0, 0, 1}, o);
  CHECK(s.rho == doctest::Approx(1.0));
  CHECK(s.theta == doctest::Approx(0.0));
  CHECK(s.phi == doctest::Approx(0.0));

  s = cartToSph({1, 0, 0}, o);
  CHECK(s.theta == doctest::Approx(kPi / 2));
  CHECK(s.phi == doctest::Approx(0.0));

  s = cartToSph({0, -1, 0}, o);
  CHECK(s.rho == doctest::Approx(1.0));
  CHECK(s.theta == doctest::Approx(kPi / 2));
  CHECK(s.phi == doctest::Approx(3 * kPi / 2));

  s = cartToSph(o, o);
  CHECK(s.degenerate);
  CHECK(s.rho == 0.0);
  CHECK(s.theta == 0.0);
  CHECK(s.phi == 0.0);
}

TEST_CASE("spherical round trip over 1e5 random points") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> logRho(std::log(1e-6), std::log(10.0));
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Vec3 center(c(rng), c(rng), c(rng));
    const Vec3 p = center + std::exp(logRho(rng)) * randomUnit(rng);
    const auto s = cartToSph(p, center);
    CHECK_FALSE(s.degenerate);
    worst = std::max(worst, (sphToCart(s, center) - p).norm());
    CHECK(s.phi >= 0.0);
    CHECK(s.phi < kTwoPi);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("rigid transform algebra") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform a({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)});
    const RigidTransform b({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)});
    const RigidTransform c({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)});
    const Vec3 p(u(rng), u(rng), u(rng));
    CHECK((a.inverse().apply(a.apply(p)) - p).norm() <= 1e-10);
    CHECK(((a * b) * c).apply(p).isApprox((a * (b * c)).apply(p), 1e-10));
    CHECK(((a * b) * c).apply(p).isApprox(a.apply(b.apply(c.apply(p))), 1e-10));
    CHECK(a.axisAngle().norm() <= kPi + 1e-12);
  }
  // canonicalization keeps the rotation but maps the angle into [0, pi]
  const RigidTransform big(Vec3(0, 0, 1.5 * kPi), Vec3::Zero());
  CHECK(big.axisAngle().isApprox(Vec3(0, 0, -0.5 * kPi), 1e-12));
  CHECK(big.rotation().isApprox(rotationFromAxisAngle(big.axisAngle()), 1e-12));
}

TEST_CASE("rotateJacobian matches finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double scale : {0.0, 1e-9, 1e-3, 1.0}) {
    const Vec3 r = scale * Vec3(u(rng), u(rng), u(rng));
    const Vec3 v(u(rng), u(rng), u(rng));
    const Mat3 j = rotateJacobian(r, v);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Vec3 rp = r;
      Vec3 rm = r;
      rp[k] += h;
      rm[k] -= h;
      const Vec3 fd = (rotationFromAxisAngle(rp) * v - rotationFromAxisAngle(rm) * v) / (2 * h);
      CHECK((fd - j.col(k)).norm() <= 1e-7 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("mesh validation rejects degenerate and out-of-range faces") {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}};
  CHECK_THROWS_AS(TriangleMesh(v, {{0, 1, 2}}), InputError);
  CHECK_THROWS_AS(TriangleMesh(v, {{0, 1, 7}}), InputError);
  try {
    TriangleMesh(v, {{0, 1, 3}, {0, 1, 2}});
    FAIL("expected throw");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK_NOTHROW(TriangleMesh(v, {{0, 1, 3}}));
}

TEST_CASE("vertex normals") {
  const TriangleMesh sphere = shapes::icosphere(1.0, 3);
  for (size_t i = 0; i < sphere.vertexCount(); ++i) {
    CHECK((sphere.normals()[i] - sphere.vertex(i).normalized()).norm() <= 0.02);
  }
  const TriangleMesh grid = shapes::planeGrid(1.0, 8);
  for (const Vec3& n : vertexNormals(grid)) {
    CHECK(n.isApprox(Vec3(0, 0, 1), 1e-12));
  }
  std::mt19937_64 rng(5);
  const TriangleMesh soup = triangleSoup(300, rng);
  for (const Vec3& n : soup.normals()) {
    CHECK(std::abs(n.norm() - 1.0) <= 1e-9);
  }
  // isolated vertex gets a zero normal and is flagged
  const TriangleMesh withLoose({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}}, {{0, 1, 2}});
  CHECK(withLoose.normals()[3].isZero());
  REQUIRE(withLoose.isolatedVertices().size() == 1);
  CHECK(withLoose.isolatedVertices()[0] == 3);
}

TEST_CASE("shape generators are closed and outward") {
  for (const TriangleMesh& m :
       {shapes::icosphere(1.0, 2), shapes::uvSphere(1.0, 12, 16), shapes::capsule(2.0, 0.5, 0.7),
        shapes::box({0, 0, 0}, {1, 2, 3})}) {
    CHECK(m.isWatertight());
    const Vec3 centroid = m.bounds().center();
    for (size_t f = 0; f < m.faceCount(); ++f) {
      const Vec3 c = m.pointOnFace(f, 1.0 / 3, 1.0 / 3);
      CHECK(m.faceNormal(f).dot(c - centroid) > 0.0);
    }
  }
  CHECK(shapes::uvSphere(1.0, 38, 54).vertexCount() == 2000);
  CHECK(shapes::uvSphere(1.0, 41, 25).faceCount() == 2000);
}

TEST_CASE("ray cast examples on the unit icosphere") {
  const MeshIndex index(shapes::icosphere(1.0, 3));
  auto hits = index.castAll({0, 0, 0}, {0, 0, 1});
  REQUIRE(hits.size() == 1);
  CHECK(std::abs(hits[0].t - 1.0) <= 0.01);
  CHECK(index.castAll({0, 0, 3}, {0, 0, 1}).empty());
  CHECK(rayCastBruteForce(index.mesh(), {0, 0, 3}, {0, 0, 1}).empty());
  // through the sphere from outside: entry and exit, sorted
  hits = index.castAll({0.1, 0.05, -3}, {0, 0, 1});
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].t < hits[1].t);
}

TEST_CASE("single triangle matches the hand-computed Moller-Trumbore solution") {
  const TriangleMesh tri({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  const MeshIndex index(tri);
  // origin (0.25, 0.25, 1) straight down: t = 1, barycentrics (0.5, 0.25, 0.25)
  const auto hits = index.castAll({0.25, 0.25, 1.0}, {0, 0, -1});
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].t == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(hits[0].u == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(hits[0].v == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(hits[0].face == 0);
  CHECK(index.castAll({0.8, 0.8, 1.0}, {0, 0, -1}).empty());
}

TEST_CASE("empty mesh index returns nothing") {
  const MeshIndex index{TriangleMesh{}};
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    CHECK(index.castAll(Vec3::Zero(), randomUnit(rng)).empty());
  }
  CHECK(std::isinf(index.closestPoint(Vec3::Zero()).distance));
  CHECK_FALSE(index.contains(Vec3::Zero()));
}

TEST_CASE("accelerated casts equal the brute-force loop") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const TriangleMesh meshes[] = {shapes::uvSphere(1.0, 41, 25), triangleSoup(2000, rng)};
  for (const TriangleMesh& mesh : meshes) {
    REQUIRE(mesh.faceCount() == 2000);
    const MeshIndex index(mesh);
    int totalHits = 0;
    for (int i = 0; i < 1000; ++i) {
      const Vec3 o(u(rng), u(rng), u(rng));
      const Vec3 d = randomUnit(rng);
      const auto fast = index.castAll(o, d);
      const auto slow = rayCastBruteForce(mesh, o, d);
      requireSameHits(fast, slow);
      totalHits += static_cast<int>(fast.size());
    }
    CHECK(totalHits > 100);
  }
}

TEST_CASE("ray through a shared edge is counted once") {
  // two triangles sharing the diagonal of the unit square
  const TriangleMesh quad({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2}, {0, 2, 3}});
  const auto hits = MeshIndex(quad).castAll({0.5, 0.5, 1.0}, {0, 0, -1});
  CHECK(hits.size() == 1);
}

TEST_CASE("closest point and containment") {
  const MeshIndex index(shapes::icosphere(1.0, 3));
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const Vec3 d = randomUnit(rng);
    const double r = 0.2 + 1.6 * (i % 10) / 10.0;
    const Vec3 p = r * d;
    const ClosestPoint cp = index.closestPoint(p);
    CHECK(std::abs(cp.distance - std::abs(r - 1.0)) <= 0.01);
    CHECK((index.mesh().pointOnFace(cp.face, cp.u, cp.v) - cp.point).norm() <= 1e-12);
    if (r < 0.95) {
      CHECK(index.contains(p));
    } else if (r > 1.05) {
      CHECK_FALSE(index.contains(p));
    }
  }
}

TEST_CASE("containment of overlapping closed shells is a union") {
  const TriangleMesh a = shapes::icosphere(1.0, 2);
  const TriangleMesh b = shapes::icosphere(1.0, 2, {1.0, 0, 0});
  const TriangleMesh parts[] = {a, b};
  const MeshIndex index(TriangleMesh::merge(parts));
  CHECK(index.componentCount() == 2);
  CHECK(index.contains({0.5, 0, 0}));  // inside both shells
  CHECK(index.contains({-0.5, 0, 0}));
  CHECK(index.contains({1.5, 0, 0}));
  CHECK_FALSE(index.contains({2.5, 0, 0}));
}

TEST_CASE("obj read/write round trip with scale") {
  const TriangleMesh mesh = shapes::icosphere(0.05, 1);
  std::stringstream ss;
  writeObj(ss, mesh);
  const TriangleMesh back = readObj(ss);
  REQUIRE(back.vertexCount() == mesh.vertexCount());
  REQUIRE(back.faces() == mesh.faces());
  for (size_t i = 0; i < mesh.vertexCount(); ++i) {
    CHECK(back.vertex(i) == mesh.vertex(i));
  }
  std::istringstream quad("# comment\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
                          "vt 0 0\nusemtl m\nf 1/1 2/1 3/1 -1/1\n");
  const TriangleMesh q = readObj(quad, 0.001);
  CHECK(q.faceCount() == 2);
  CHECK(q.vertex(2).isApprox(Vec3(0.001, 0.001, 0)));
  std::istringstream bad("v 0 0 0\nf 0 1 2\n");
  CHECK_THROWS_AS(readObj(bad), InputError);
}
