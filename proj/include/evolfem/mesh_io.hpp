#pragma once

// Mesh serialization: the native ASCII format and legacy VTK snapshots.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "evolfem/mesh.hpp"

namespace evolfem {

// Native format: header "evolfem-mesh v1 <simplex_dim> <nvert> <nsimp>",
// one vertex per line, one simplex per line (0-based indices), then an
// optional "boundary" block listing flagged vertex indices.
inline void write_mesh_ascii(const SimplicialMesh& mesh, std::ostream& out) {
  out << "evolfem-mesh v1 " << mesh.simplex_dim << ' ' << mesh.vertex_count() << ' '
      << mesh.simplex_count() << '\n';
  char line[96];
  for (const auto& v : mesh.vertices) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << line;
  }
  for (const auto& s : mesh.simplices) {
    for (int i = 0; i <= mesh.simplex_dim; ++i) out << s[i] << (i == mesh.simplex_dim ? '\n' : ' ');
  }
  if (!mesh.boundary_vertex_flags.empty()) {
    out << "boundary";
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      if (mesh.boundary_vertex_flags[v]) out << ' ' << v;
    }
    out << '\n';
  }
}

inline void write_mesh_ascii(const SimplicialMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_mesh_ascii: cannot open " + path);
  write_mesh_ascii(mesh, out);
  if (!out) throw IoError("write_mesh_ascii: write failed for " + path);
}

inline SimplicialMesh read_mesh_ascii(std::istream& in) {
  std::string magic, version;
  int simplex_dim = 0, nvert = 0, nsimp = 0;
  in >> magic >> version >> simplex_dim >> nvert >> nsimp;
  if (!in || magic != "evolfem-mesh" || version != "v1")
    throw IoError("read_mesh_ascii: bad header");
  if (simplex_dim != 2 && simplex_dim != 3) throw IoError("read_mesh_ascii: bad simplex_dim");
  SimplicialMesh mesh;
  mesh.simplex_dim = simplex_dim;
  mesh.vertices.resize(nvert);
  for (auto& v : mesh.vertices) in >> v.x >> v.y >> v.z;
  mesh.simplices.assign(nsimp, {-1, -1, -1, -1});
  for (auto& s : mesh.simplices) {
    for (int i = 0; i <= simplex_dim; ++i) {
      in >> s[i];
      if (s[i] < 0 || s[i] >= nvert) throw IoError("read_mesh_ascii: vertex index out of range");
    }
  }
  if (!in) throw IoError("read_mesh_ascii: truncated file");
  std::string tag;
  if (in >> tag) {
    if (tag != "boundary") throw IoError("read_mesh_ascii: unexpected trailing data");
    mesh.boundary_vertex_flags.assign(nvert, 0);
    int idx;
    while (in >> idx) {
      if (idx < 0 || idx >= nvert) throw IoError("read_mesh_ascii: boundary index out of range");
      mesh.boundary_vertex_flags[idx] = 1;
    }
  }
  return mesh;
}

inline SimplicialMesh read_mesh_ascii(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_mesh_ascii: cannot open " + path);
  return read_mesh_ascii(in);
}

// Legacy VTK ASCII snapshot (POINTS + CELLS), for external visualization.
inline void write_mesh_vtk(const SimplicialMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_mesh_vtk: cannot open " + path);
  out << "# vtk DataFile Version 3.0\nevolfem mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertex_count() << " double\n";
  char line[96];
  for (const auto& v : mesh.vertices) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << line;
  }
  const int nper = mesh.vertices_per_simplex();
  out << "CELLS " << mesh.simplex_count() << ' ' << mesh.simplex_count() * (nper + 1) << '\n';
  for (const auto& s : mesh.simplices) {
    out << nper;
    for (int i = 0; i < nper; ++i) out << ' ' << s[i];
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.simplex_count() << '\n';
  const int vtk_type = mesh.simplex_dim == 2 ? 5 : 10;
  for (int i = 0; i < mesh.simplex_count(); ++i) out << vtk_type << '\n';
  if (!out) throw IoError("write_mesh_vtk: write failed for " + path);
}

}  // namespace evolfem
