#pragma once

#include "rup/geometry.hpp"

namespace rup::shapes {

/// Subdivided icosahedron, 20 * 4^level faces, vertices exactly on the sphere.
TriangleMesh icosphere(double radius, int level, const Vec3& center = Vec3::Zero());

/// Latitude-longitude sphere: 2 + (rings - 1) * segments vertices,
/// 2 * segments * (rings - 1) faces.
TriangleMesh uvSphere(double radius, int rings, int segments, const Vec3& center = Vec3::Zero());

/// Closed capsule along +x from 0 to `length`. The cross-section is an ellipse
/// with semi-axes radiusY, radiusZ; the end caps bulge by radiusY along x.
/// With maxSpacing > 0 the body gets extra rings no farther apart than that.
TriangleMesh capsule(double length, double radiusY, double radiusZ, int segments = 16,
                     int capRings = 4, double maxSpacing = 0.0);

/// Closed axis-aligned box.
TriangleMesh box(const Vec3& min, const Vec3& max);

/// Open square grid in the z = 0 plane, normals +z, n x n quads.
TriangleMesh planeGrid(double size, int n, const Vec3& center = Vec3::Zero());

}  // namespace rup::shapes
