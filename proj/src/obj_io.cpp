#include "rup/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace rup {

TriangleMesh readObj(std::istream& in, double scale) {
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) {
      continue;
    }
    if (tag == "v") {
      double x = 0.0;
      double y = 0.0;
      double z = 0.0;
      if (!(ls >> x >> y >> z)) {
        throw InputError("obj line " + std::to_string(lineNo) + ": malformed vertex");
      }
      verts.emplace_back(x * scale, y * scale, z * scale);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        const int idx = std::stoi(tok.substr(0, tok.find('/')));
        if (idx == 0) {
          throw InputError("obj line " + std::to_string(lineNo) + ": index 0 is invalid");
        }
        poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(verts.size()) + idx);
      }
      if (poly.size() < 3) {
        throw InputError("obj line " + std::to_string(lineNo) + ": face with < 3 vertices");
      }
      for (size_t k = 1; k + 1 < poly.size(); ++k) {
        faces.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

TriangleMesh loadObj(const std::filesystem::path& path, double scale) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  return readObj(in, scale);
}

void writeObj(std::ostream& out, const TriangleMesh& mesh) {
  char buf[128];
  for (const Vec3& p : mesh.vertices()) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
  for (const Face& f : mesh.faces()) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

void saveObj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  writeObj(out, mesh);
}

}  // namespace rup
