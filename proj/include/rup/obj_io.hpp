#pragma once

#include "rup/geometry.hpp"

#include <filesystem>
#include <iosfwd>

namespace rup {

/// Reads `v` and `f` records (1-based or negative indices; `v/vt/vn` forms
/// accepted). Polygons are fan-triangulated. Everything else is ignored.
TriangleMesh readObj(std::istream& in, double scale = 1.0);
TriangleMesh loadObj(const std::filesystem::path& path, double scale = 1.0);

/// Writes with `%.17g` so a read-back is exact.
void writeObj(std::ostream& out, const TriangleMesh& mesh);
void saveObj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace rup
