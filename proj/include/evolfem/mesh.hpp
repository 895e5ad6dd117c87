#pragma once

// Simplicial complexes: triangle surface meshes and tetrahedral bulk meshes
// in R^3, macro mesh generators for the unit sphere/ball, uniform red
// refinement, boundary extraction, and mesh-size measurement.

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "evolfem/types.hpp"

namespace evolfem {

struct SimplicialMesh {
  int ambient_dim = 3;
  int simplex_dim = 2;  // 2: triangles, 3: tetrahedra
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> simplices;  // simplex_dim + 1 entries used
  std::vector<char> boundary_vertex_flags;    // bulk meshes only

  int vertex_count() const { return int(vertices.size()); }
  int simplex_count() const { return int(simplices.size()); }
  int vertices_per_simplex() const { return simplex_dim + 1; }
};

struct MeshSize {
  double h_max = 0.0;
  double h_min = 0.0;
  double rho_min = 0.0;          // smallest inscribed-ball diameter
  double quasi_uniformity = 0.0;  // h_max / rho_min
};

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
}

struct FaceKey {
  std::array<int, 3> v;
  bool operator==(const FaceKey& o) const { return v == o.v; }
};

struct FaceKeyHash {
  std::size_t operator()(const FaceKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (int x : k.v) {
      h ^= std::uint64_t(std::uint32_t(x));
      h *= 1099511628211ull;
    }
    return std::size_t(h);
  }
};

inline FaceKey face_key(int a, int b, int c) {
  std::array<int, 3> v{a, b, c};
  std::sort(v.begin(), v.end());
  return {v};
}

// Faces of a positively oriented tet, ordered so their normals point outward.
inline constexpr int kTetFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * norm(cross(b - a, c - a));
}

inline double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return dot(cross(b - a, c - a), d - a) / 6.0;
}

}  // namespace detail

// Regular icosahedron with circumradius 1, consistently oriented outward.
inline SimplicialMesh macro_sphere_surface() {
  SimplicialMesh mesh;
  mesh.simplex_dim = 2;
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  const double s = 1.0 / std::sqrt(1.0 + p * p);
  const double k1 = s, k2 = p * s;  // normalized so |v| = 1
  mesh.vertices = {{-k1, k2, 0},  {k1, k2, 0},  {-k1, -k2, 0}, {k1, -k2, 0},
                   {0, -k1, k2},  {0, k1, k2},  {0, -k1, -k2}, {0, k1, -k2},
                   {k2, 0, -k1},  {k2, 0, k1},  {-k2, 0, -k1}, {-k2, 0, k1}};
  const int faces[20][3] = {{0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                            {1, 5, 9},  {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                            {3, 9, 4},  {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                            {4, 9, 5},  {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (const auto& f : faces) {
    std::array<int, 4> tri{f[0], f[1], f[2], -1};
    const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
    if (dot(cross(b - a, c - a), a + b + c) < 0.0) std::swap(tri[1], tri[2]);
    mesh.simplices.push_back(tri);
  }
  return mesh;
}

// Octahedron fan: 6 unit boundary vertices plus the center, 8 tetrahedra.
inline SimplicialMesh macro_ball_bulk() {
  SimplicialMesh mesh;
  mesh.simplex_dim = 3;
  mesh.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1},
                   {0, 0, 0}};
  mesh.boundary_vertex_flags = {1, 1, 1, 1, 1, 1, 0};
  const int center = 6;
  const int faces[8][3] = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                           {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  for (const auto& f : faces) mesh.simplices.push_back({center, f[0], f[1], f[2]});
  return mesh;
}

// Uniform red refinement: triangles into 4 children via edge midpoints, tets
// into 4 corner children plus 4 octahedron children split along the interior
// diagonal chosen by a fixed rule (shortest diagonal, ties broken by slot
// order), which keeps the tetrahedral shape classes bounded under repeated
// refinement. Orientation and conformity are preserved.
// New bulk vertices are flagged as boundary only when their parent edge lies
// on a boundary face, which keeps interior edges between two boundary
// vertices from spawning spurious boundary midpoints.
inline SimplicialMesh refine_uniform(const SimplicialMesh& mesh) {
  SimplicialMesh fine;
  fine.simplex_dim = mesh.simplex_dim;
  fine.vertices = mesh.vertices;

  std::unordered_map<std::uint64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = detail::edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int idx = int(fine.vertices.size());
    fine.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    midpoint.emplace(key, idx);
    return idx;
  };

  if (mesh.simplex_dim == 2) {
    fine.simplices.reserve(mesh.simplices.size() * 4);
    for (const auto& t : mesh.simplices) {
      int m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m02 = mid(t[0], t[2]);
      fine.simplices.push_back({t[0], m01, m02, -1});
      fine.simplices.push_back({m01, t[1], m12, -1});
      fine.simplices.push_back({m02, m12, t[2], -1});
      fine.simplices.push_back({m01, m12, m02, -1});
    }
    return fine;
  }

  // Edge slots 0..5 = (0,1),(0,2),(0,3),(1,2),(1,3),(2,3). The octahedron
  // child tables below are positively oriented for a positively oriented
  // parent; the sign is affine-invariant, so one reference computation fixes
  // all cases.
  constexpr int kDiagonalPairs[3][2] = {{0, 5}, {1, 4}, {2, 3}};
  constexpr int kOctaChildren[3][4][4] = {
      {{0, 5, 1, 2}, {0, 5, 3, 1}, {0, 5, 2, 4}, {0, 5, 4, 3}},
      {{1, 4, 2, 0}, {1, 4, 0, 3}, {1, 4, 5, 2}, {1, 4, 3, 5}},
      {{2, 3, 0, 1}, {2, 3, 4, 0}, {2, 3, 1, 5}, {2, 3, 5, 4}}};
  fine.simplices.reserve(mesh.simplices.size() * 8);
  for (const auto& t : mesh.simplices) {
    const int m[6] = {mid(t[0], t[1]), mid(t[0], t[2]), mid(t[0], t[3]),
                      mid(t[1], t[2]), mid(t[1], t[3]), mid(t[2], t[3])};
    fine.simplices.push_back({t[0], m[0], m[1], m[2]});
    fine.simplices.push_back({m[0], t[1], m[3], m[4]});
    fine.simplices.push_back({m[1], m[3], t[2], m[5]});
    fine.simplices.push_back({m[2], m[4], m[5], t[3]});
    int best = 0;
    double best_len = 1e300;
    for (int d = 0; d < 3; ++d) {
      double len = norm(fine.vertices[m[kDiagonalPairs[d][0]]] -
                        fine.vertices[m[kDiagonalPairs[d][1]]]);
      if (len < best_len - 1e-14 * std::max(1.0, best_len)) {
        best_len = len;
        best = d;
      }
    }
    for (const auto& child : kOctaChildren[best]) {
      fine.simplices.push_back({m[child[0]], m[child[1]], m[child[2]], m[child[3]]});
    }
  }

  if (!mesh.boundary_vertex_flags.empty()) {
    // Boundary faces of the parent mesh determine which edges may carry
    // boundary midpoints.
    std::unordered_map<detail::FaceKey, int, detail::FaceKeyHash> face_count;
    for (const auto& t : mesh.simplices) {
      for (const auto& lf : detail::kTetFaces) {
        ++face_count[detail::face_key(t[lf[0]], t[lf[1]], t[lf[2]])];
      }
    }
    std::unordered_map<std::uint64_t, char> boundary_edge;
    for (const auto& t : mesh.simplices) {
      for (const auto& lf : detail::kTetFaces) {
        int a = t[lf[0]], b = t[lf[1]], c = t[lf[2]];
        if (face_count[detail::face_key(a, b, c)] != 1) continue;
        boundary_edge[detail::edge_key(a, b)] = 1;
        boundary_edge[detail::edge_key(b, c)] = 1;
        boundary_edge[detail::edge_key(a, c)] = 1;
      }
    }
    fine.boundary_vertex_flags.assign(fine.vertices.size(), 0);
    std::copy(mesh.boundary_vertex_flags.begin(), mesh.boundary_vertex_flags.end(),
              fine.boundary_vertex_flags.begin());
    for (const auto& [key, idx] : midpoint) {
      fine.boundary_vertex_flags[idx] = boundary_edge.count(key) ? 1 : 0;
    }
  }
  return fine;
}

struct BoundarySurface {
  SimplicialMesh mesh;                    // closed, outward-oriented triangles
  std::vector<std::array<int, 2>> parent;  // per triangle: (tet index, local face)
  std::vector<int> vertex_to_bulk;        // surface vertex -> bulk vertex index
};

// Extract the boundary of a tetrahedral mesh as an outward-oriented closed
// triangle mesh, with the face-to-tet correspondence.
inline BoundarySurface boundary_surface(const SimplicialMesh& mesh) {
  if (mesh.simplex_dim != 3) throw UsageError("boundary_surface: tetrahedral mesh required");
  std::unordered_map<detail::FaceKey, int, detail::FaceKeyHash> face_count;
  for (const auto& t : mesh.simplices) {
    for (const auto& lf : detail::kTetFaces) {
      int c = ++face_count[detail::face_key(t[lf[0]], t[lf[1]], t[lf[2]])];
      if (c > 2) throw InvalidMeshError("boundary_surface: face shared by more than two tets");
    }
  }

  BoundarySurface boundary;
  boundary.mesh.simplex_dim = 2;
  std::unordered_map<int, int> to_surface;
  auto surface_vertex = [&](int bulk) {
    auto it = to_surface.find(bulk);
    if (it != to_surface.end()) return it->second;
    int idx = int(boundary.mesh.vertices.size());
    boundary.mesh.vertices.push_back(mesh.vertices[bulk]);
    boundary.vertex_to_bulk.push_back(bulk);
    to_surface.emplace(bulk, idx);
    return idx;
  };

  for (int e = 0; e < mesh.simplex_count(); ++e) {
    const auto& t = mesh.simplices[e];
    for (int lf = 0; lf < 4; ++lf) {
      int a = t[detail::kTetFaces[lf][0]];
      int b = t[detail::kTetFaces[lf][1]];
      int c = t[detail::kTetFaces[lf][2]];
      if (face_count[detail::face_key(a, b, c)] != 1) continue;
      boundary.mesh.simplices.push_back({surface_vertex(a), surface_vertex(b),
                                         surface_vertex(c), -1});
      boundary.parent.push_back({e, lf});
    }
  }

  // Manifold check: every boundary edge must belong to exactly two faces.
  std::unordered_map<std::uint64_t, int> edge_count;
  for (const auto& t : boundary.mesh.simplices) {
    ++edge_count[detail::edge_key(t[0], t[1])];
    ++edge_count[detail::edge_key(t[1], t[2])];
    ++edge_count[detail::edge_key(t[0], t[2])];
  }
  for (const auto& [key, count] : edge_count) {
    (void)key;
    if (count != 2) throw InvalidMeshError("boundary_surface: non-manifold boundary");
  }
  return boundary;
}

// Validates the SimplicialMesh invariants: positive measures, conformity via
// face hashing, and consistent orientation. Throws InvalidMeshError.
inline void validate_mesh(const SimplicialMesh& mesh) {
  if (mesh.simplex_dim == 2) {
    std::unordered_map<std::uint64_t, int> undirected;
    std::unordered_map<std::uint64_t, int> directed;
    for (const auto& t : mesh.simplices) {
      if (detail::triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) <=
          0.0)
        throw InvalidMeshError("validate_mesh: degenerate triangle");
      const int e[3][2] = {{t[0], t[1]}, {t[1], t[2]}, {t[2], t[0]}};
      for (const auto& d : e) {
        ++undirected[detail::edge_key(d[0], d[1])];
        std::uint64_t dir = (std::uint64_t(std::uint32_t(d[0])) << 32) | std::uint32_t(d[1]);
        if (++directed[dir] > 1)
          throw InvalidMeshError("validate_mesh: inconsistent triangle orientation");
      }
    }
    for (const auto& [key, count] : undirected) {
      (void)key;
      if (count != 2) throw InvalidMeshError("validate_mesh: surface mesh is not closed");
    }
    return;
  }
  std::unordered_map<detail::FaceKey, int, detail::FaceKeyHash> face_count;
  for (const auto& t : mesh.simplices) {
    if (detail::tet_signed_volume(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]],
                                  mesh.vertices[t[3]]) <= 0.0)
      throw InvalidMeshError("validate_mesh: non-positive tetrahedron");
    for (const auto& lf : detail::kTetFaces) {
      int c = ++face_count[detail::face_key(t[lf[0]], t[lf[1]], t[lf[2]])];
      if (c > 2) throw InvalidMeshError("validate_mesh: non-conforming face");
    }
  }
}

// Mesh size over given node positions (vertex positions for P1 meshes; the
// fespace module reuses the per-element kernel for isoparametric nodes).
namespace detail {

inline double max_pairwise_distance(const Vec3* points, int n) {
  double h = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) h = std::max(h, norm(points[i] - points[j]));
  return h;
}

inline double inscribed_diameter(const SimplicialMesh& mesh, const std::array<int, 4>& t,
                                 const std::vector<Vec3>& pos) {
  if (mesh.simplex_dim == 2) {
    const Vec3 &a = pos[t[0]], &b = pos[t[1]], &c = pos[t[2]];
    double area = triangle_area(a, b, c);
    double perimeter = norm(b - a) + norm(c - b) + norm(a - c);
    return 4.0 * area / perimeter;
  }
  const Vec3 &a = pos[t[0]], &b = pos[t[1]], &c = pos[t[2]], &d = pos[t[3]];
  double volume = std::abs(tet_signed_volume(a, b, c, d));
  double faces = triangle_area(a, b, c) + triangle_area(a, b, d) + triangle_area(a, c, d) +
                 triangle_area(b, c, d);
  return 6.0 * volume / faces;
}

}  // namespace detail

inline MeshSize mesh_size(const SimplicialMesh& mesh, const std::vector<Vec3>& node_positions) {
  MeshSize size;
  size.h_min = 1e300;
  size.rho_min = 1e300;
  std::array<Vec3, 4> corner;
  for (const auto& t : mesh.simplices) {
    const int n = mesh.vertices_per_simplex();
    for (int i = 0; i < n; ++i) corner[i] = node_positions[t[i]];
    double h = detail::max_pairwise_distance(corner.data(), n);
    size.h_max = std::max(size.h_max, h);
    size.h_min = std::min(size.h_min, h);
    size.rho_min = std::min(size.rho_min, detail::inscribed_diameter(mesh, t, node_positions));
  }
  size.quasi_uniformity = size.h_max / size.rho_min;
  return size;
}

inline MeshSize mesh_size(const SimplicialMesh& mesh) { return mesh_size(mesh, mesh.vertices); }

// Refinement hierarchies used by the convergence studies: vertices stay on
// the unit sphere (all of them for surface meshes, the flagged ones for bulk
// meshes) by radial projection of each refinement's new midpoints.
inline SimplicialMesh sphere_surface_mesh(int level) {
  SimplicialMesh mesh = macro_sphere_surface();
  for (int l = 0; l < level; ++l) {
    mesh = refine_uniform(mesh);
    for (auto& v : mesh.vertices) v = normalized(v);
  }
  return mesh;
}

inline SimplicialMesh ball_bulk_mesh(int level) {
  SimplicialMesh mesh = macro_ball_bulk();
  for (int l = 0; l < level; ++l) {
    mesh = refine_uniform(mesh);
    for (int v = 0; v < mesh.vertex_count(); ++v) {
      if (mesh.boundary_vertex_flags[v]) mesh.vertices[v] = normalized(mesh.vertices[v]);
    }
  }
  return mesh;
}

}  // namespace evolfem
