#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "evolfem/geometry.hpp"
#include "evolfem/mesh.hpp"
#include "evolfem/refelem.hpp"
#include "evolfem/types.hpp"

namespace evolfem {

enum class SpaceKind { surface, bulk };

namespace detail {

// Global identity of a Lagrange node: the sorted (vertex, multiplicity) support
// of its lattice point. Elements sharing a face build identical keys for the
// shared nodes, so welding falls out of a single map lookup. At most dim+1
// entries are used; the rest stay at the (-1, 0) sentinel.
using NodeKey = std::array<std::pair<int, int>, 4>;

inline NodeKey node_key(const std::array<int, 4>& simplex, const LatticeIndex& m, int nverts) {
  NodeKey key;
  key.fill({-1, 0});
  int slot = 0;
  for (int i = 0; i < nverts; ++i) {
    if (m[i] > 0) key[slot++] = {simplex[i], m[i]};
  }
  std::sort(key.begin(), key.begin() + slot);
  return key;
}

}  // namespace detail

// Isoparametric Lagrange space on a moving domain. Connectivity, dof count and
// reference element are fixed for all time; only node positions move, via the
// closed-form flow applied to the initial positions.
struct EvolvingSpace {
  SpaceKind kind = SpaceKind::surface;
  int order = 1;
  ReferenceElement reference;
  SimplicialMesh mesh;
  DomainEvolution evolution;
  std::vector<std::vector<int>> element_dof_map;
  std::vector<Vec3> node_initial_positions;
  int dof_count = 0;
  // Retained for trace identification between a bulk space and the space built
  // on its boundary surface.
  std::map<detail::NodeKey, int> node_index;
};

namespace detail {

// Shared builder: the placement functor maps a node key to its initial
// position. Positions are computed once per key, so adjacent elements agree
// bitwise on shared nodes.
template <class PlaceNode>
EvolvingSpace build_space(SpaceKind kind, const SimplicialMesh& mesh, int order,
                          const DomainEvolution& evolution, PlaceNode&& place) {
  EvolvingSpace space;
  space.kind = kind;
  space.order = order;
  space.reference = make_reference(mesh.simplex_dim, order);
  space.mesh = mesh;
  space.evolution = evolution;
  const int nverts = mesh.simplex_dim + 1;
  // Vertex nodes first, in vertex order: dof v is mesh vertex v for every
  // order, and higher-order nodes follow in first-encounter order.
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    NodeKey key;
    key.fill({-1, 0});
    key[0] = {int(v), order};
    space.node_index.emplace(key, space.dof_count++);
    space.node_initial_positions.push_back(place(key));
  }
  space.element_dof_map.resize(mesh.simplices.size());
  for (std::size_t e = 0; e < mesh.simplices.size(); ++e) {
    auto& dofs = space.element_dof_map[e];
    dofs.reserve(space.reference.basis_count);
    for (const LatticeIndex& m : space.reference.multi_indices) {
      NodeKey key = node_key(mesh.simplices[e], m, nverts);
      auto [it, fresh] = space.node_index.try_emplace(key, space.dof_count);
      if (fresh) {
        space.node_initial_positions.push_back(place(key));
        ++space.dof_count;
      }
      dofs.push_back(it->second);
    }
  }
  return space;
}

inline Vec3 affine_point(const NodeKey& key, const std::vector<Vec3>& vertices, int order) {
  Vec3 x{};
  for (const auto& [v, m] : key) {
    if (v < 0) break;
    x += (double(m) / order) * vertices[v];
  }
  return x;
}

}  // namespace detail

// Lagrange nodes are the affine lattice points radially projected onto the
// unit sphere; mesh vertices are kept verbatim.
inline EvolvingSpace build_surface_space(const SimplicialMesh& mesh, int order,
                                         const DomainEvolution& evolution) {
  if (mesh.simplex_dim != 2) throw InvalidMeshError("build_surface_space: expected a triangle mesh");
  for (const Vec3& v : mesh.vertices) {
    if (std::abs(norm(v) - 1.0) > 1e-10)
      throw InvalidMeshError("build_surface_space: vertex off the unit sphere");
  }
  auto place = [&](const detail::NodeKey& key) {
    if (key[1].first < 0) return mesh.vertices[key[0].first];
    return initial_surface_projection(detail::affine_point(key, mesh.vertices, order));
  };
  return detail::build_space(SpaceKind::surface, mesh, order, evolution, place);
}

// Interior nodes stay at the affine lattice points; nodes supported on
// boundary vertices are moved by the blending map
//   x~  ->  x~ + lambda^{k+2} (y/|y| - y),
// where lambda is the total barycentric weight carried by boundary vertices
// and y the lambda-normalized boundary part. Nodes with lambda = 1 land
// exactly on the sphere, matching the surface-space placement.
inline EvolvingSpace build_bulk_space(const SimplicialMesh& mesh, int order,
                                      const DomainEvolution& evolution) {
  if (mesh.simplex_dim != 3) throw InvalidMeshError("build_bulk_space: expected a tetrahedral mesh");
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (mesh.boundary_vertex_flags[v] && std::abs(norm(mesh.vertices[v]) - 1.0) > 1e-10)
      throw InvalidMeshError("build_bulk_space: boundary vertex off the unit sphere");
  }
  auto place = [&](const detail::NodeKey& key) {
    if (key[1].first < 0) return mesh.vertices[key[0].first];
    Vec3 affine{};
    Vec3 boundary_part{};
    int flagged = 0;
    for (const auto& [v, m] : key) {
      if (v < 0) break;
      Vec3 term = (double(m) / order) * mesh.vertices[v];
      affine += term;
      if (mesh.boundary_vertex_flags[v]) {
        boundary_part += term;
        flagged += m;
      }
    }
    if (flagged == 0) return affine;
    double lambda = double(flagged) / order;
    Vec3 y = boundary_part / lambda;
    return affine + std::pow(lambda, order + 2) * (initial_surface_projection(y) - y);
  };
  return detail::build_space(SpaceKind::bulk, mesh, order, evolution, place);
}

// Affine lattice nodes with no projection or blending; used for flat fixtures
// and reference computations where the exact sphere geometry is irrelevant.
inline EvolvingSpace build_affine_space(const SimplicialMesh& mesh, int order,
                                        const DomainEvolution& evolution = DomainEvolution::stationary()) {
  if (mesh.simplex_dim != 2 && mesh.simplex_dim != 3)
    throw InvalidMeshError("build_affine_space: expected a triangle or tetrahedral mesh");
  SpaceKind kind = mesh.simplex_dim == 2 ? SpaceKind::surface : SpaceKind::bulk;
  auto place = [&](const detail::NodeKey& key) {
    if (key[1].first < 0) return mesh.vertices[key[0].first];
    return detail::affine_point(key, mesh.vertices, order);
  };
  return detail::build_space(kind, mesh, order, evolution, place);
}

// Node trajectories: the exact flow pushed through every initial node.
inline std::vector<Vec3> node_positions_at(const EvolvingSpace& space, double t) {
  std::vector<Vec3> positions(space.node_initial_positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i)
    positions[i] = space.evolution.flow(space.node_initial_positions[i], t);
  return positions;
}

// Nodal interpolant: coefficient i is the field evaluated at node i. Keeps
// the interpolation error at the full order of the space.
inline std::vector<double> interpolate_nodal(const EvolvingSpace& space, const AmbientField& f,
                                             double t) {
  const std::vector<Vec3> positions = node_positions_at(space, t);
  std::vector<double> alpha(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) alpha[i] = f.value(positions[i], t);
  return alpha;
}

// Reference basis values and gradients tabulated at the quadrature points;
// shared by every element using the same rule.
struct ReferenceTables {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::array<double, 3>>> gradients;
};

inline ReferenceTables tabulate_reference(const ReferenceElement& reference,
                                          const QuadratureRule& rule) {
  ReferenceTables tables;
  tables.values.reserve(rule.points.size());
  tables.gradients.reserve(rule.points.size());
  for (const Barycentric& p : rule.points) {
    tables.values.push_back(reference.eval_basis(p));
    tables.gradients.push_back(reference.eval_basis_gradients(p));
  }
  return tables;
}

// Everything assembly needs about one element at one time: the isoparametric
// map, its Jacobian, the measure factor and the physical basis gradients
// (tangential for surface elements, full for bulk elements), per quadrature
// point.
struct ElementGeometry {
  std::vector<Vec3> node_positions;
  std::vector<Vec3> position;                            // F_K at each quadrature point
  std::vector<std::array<Vec3, 3>> jacobian;             // columns dF/dx_j, dim used
  std::vector<std::array<double, 9>> gram;               // dim x dim, row major
  std::vector<double> sqrt_g;                            // surface: sqrt(det G); bulk: det J
  std::vector<std::vector<Vec3>> physical_basis_gradients;
  std::vector<Vec3> unit_normal;                         // surface kind only
};

inline ElementGeometry element_geometry(const EvolvingSpace& space, int element,
                                        const std::vector<Vec3>& global_positions,
                                        const QuadratureRule& rule,
                                        const ReferenceTables& tables) {
  const int dim = space.mesh.simplex_dim;
  const int nbasis = space.reference.basis_count;
  const auto& dofs = space.element_dof_map[element];
  ElementGeometry geo;
  geo.node_positions.resize(nbasis);
  for (int i = 0; i < nbasis; ++i) geo.node_positions[i] = global_positions[dofs[i]];

  const std::size_t nq = rule.points.size();
  geo.position.resize(nq);
  geo.jacobian.resize(nq);
  geo.gram.assign(nq, {});
  geo.sqrt_g.resize(nq);
  geo.physical_basis_gradients.assign(nq, std::vector<Vec3>(nbasis));
  if (space.kind == SpaceKind::surface) geo.unit_normal.resize(nq);

  for (std::size_t q = 0; q < nq; ++q) {
    const auto& values = tables.values[q];
    const auto& ref_grads = tables.gradients[q];
    Vec3 x{};
    std::array<Vec3, 3> J{};
    for (int i = 0; i < nbasis; ++i) {
      x += values[i] * geo.node_positions[i];
      for (int j = 0; j < dim; ++j) J[j] += ref_grads[i][j] * geo.node_positions[i];
    }
    geo.position[q] = x;
    geo.jacobian[q] = J;
    auto& G = geo.gram[q];
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) G[3 * a + b] = dot(J[a], J[b]);

    if (space.kind == SpaceKind::surface) {
      double det = G[0] * G[4] - G[1] * G[3];
      if (!(det > 1e-28)) throw DegenerateElementError("element_geometry: singular first fundamental form");
      double sg = std::sqrt(det);
      if (sg < 1e-14) throw DegenerateElementError("element_geometry: vanishing surface measure");
      geo.sqrt_g[q] = sg;
      geo.unit_normal[q] = normalized(cross(J[0], J[1]));
      for (int i = 0; i < nbasis; ++i) {
        // grad chi = J G^{-1} ghat
        double s0 = (G[4] * ref_grads[i][0] - G[1] * ref_grads[i][1]) / det;
        double s1 = (G[0] * ref_grads[i][1] - G[3] * ref_grads[i][0]) / det;
        geo.physical_basis_gradients[q][i] = s0 * J[0] + s1 * J[1];
      }
    } else {
      double det = dot(J[0], cross(J[1], J[2]));
      if (det < 1e-14) throw DegenerateElementError("element_geometry: non-positive Jacobian");
      geo.sqrt_g[q] = det;
      // Rows of J^{-1} from cofactors; grad chi = J^{-T} ghat.
      Vec3 r0 = cross(J[1], J[2]) / det;
      Vec3 r1 = cross(J[2], J[0]) / det;
      Vec3 r2 = cross(J[0], J[1]) / det;
      for (int i = 0; i < nbasis; ++i)
        geo.physical_basis_gradients[q][i] =
            ref_grads[i][0] * r0 + ref_grads[i][1] * r1 + ref_grads[i][2] * r2;
    }
  }
  return geo;
}

inline ElementGeometry element_geometry(const EvolvingSpace& space, int element, double t,
                                        const QuadratureRule& rule) {
  return element_geometry(space, element, node_positions_at(space, t), rule,
                          tabulate_reference(space.reference, rule));
}

// Total area (surface kind) or volume (bulk kind) of the discrete domain.
inline double discrete_measure(const EvolvingSpace& space, double t) {
  QuadratureRule rule = make_quadrature(space.mesh.simplex_dim, default_quadrature_degree(space.order));
  ReferenceTables tables = tabulate_reference(space.reference, rule);
  std::vector<Vec3> positions = node_positions_at(space, t);
  double total = 0.0;
  for (std::size_t e = 0; e < space.mesh.simplices.size(); ++e) {
    ElementGeometry geo = element_geometry(space, int(e), positions, rule, tables);
    for (std::size_t q = 0; q < rule.weights.size(); ++q) total += rule.weights[q] * geo.sqrt_g[q];
  }
  return total;
}

// Identification of the dofs of a space built on boundary_surface(bulk mesh)
// with the boundary dofs of the bulk space.
struct TraceMap {
  std::vector<int> surface_to_bulk;                // per surface dof
  std::vector<std::array<int, 2>> element_parent;  // per surface element: (tet, local face)
};

inline TraceMap build_trace_map(const EvolvingSpace& bulk_space, const EvolvingSpace& surface_space,
                                const BoundarySurface& boundary) {
  if (bulk_space.order != surface_space.order)
    throw InvalidMeshError("build_trace_map: spaces must share the polynomial order");
  TraceMap trace;
  trace.surface_to_bulk.assign(surface_space.dof_count, -1);
  for (const auto& [key, sdof] : surface_space.node_index) {
    detail::NodeKey bulk_key;
    bulk_key.fill({-1, 0});
    int slot = 0;
    for (const auto& [v, m] : key) {
      if (v < 0) break;
      bulk_key[slot++] = {boundary.vertex_to_bulk[v], m};
    }
    std::sort(bulk_key.begin(), bulk_key.begin() + slot);
    auto it = bulk_space.node_index.find(bulk_key);
    if (it == bulk_space.node_index.end())
      throw InvalidMeshError("build_trace_map: surface node has no bulk counterpart");
    if (norm(surface_space.node_initial_positions[sdof] -
             bulk_space.node_initial_positions[it->second]) > 1e-12)
      throw InvalidMeshError("build_trace_map: matched nodes disagree in position");
    trace.surface_to_bulk[sdof] = it->second;
  }
  trace.element_parent = boundary.parent;
  return trace;
}

namespace detail {

// Decomposition of the order-k principal lattice into k^dim affine
// sub-simplices (local basis indices), used only for display output.
inline std::vector<std::array<int, 4>> lattice_sub_simplices(const ReferenceElement& reference) {
  const int k = reference.order;
  const int dim = reference.dim;
  std::map<LatticeIndex, int> local;
  for (int i = 0; i < reference.basis_count; ++i) local[reference.multi_indices[i]] = i;
  auto at = [&](int a, int b, int c) {
    LatticeIndex m{k - a - b - c, a, b, c};
    return local.at(m);
  };
  std::vector<std::array<int, 4>> cells;
  if (dim == 2) {
    for (int i = 0; i + 1 <= k; ++i) {
      for (int j = 0; i + j + 1 <= k; ++j) {
        cells.push_back({at(i, j, 0), at(i + 1, j, 0), at(i, j + 1, 0), -1});
        if (i + j + 2 <= k)
          cells.push_back({at(i + 1, j, 0), at(i + 1, j + 1, 0), at(i, j + 1, 0), -1});
      }
    }
  } else {
    for (int i = 0; i <= k - 1; ++i) {
      for (int j = 0; i + j <= k - 1; ++j) {
        for (int l = 0; i + j + l <= k - 1; ++l) {
          cells.push_back({at(i, j, l), at(i + 1, j, l), at(i, j + 1, l), at(i, j, l + 1)});
          if (i + j + l <= k - 2) {
            int A = at(i + 1, j, l), B = at(i, j + 1, l), C = at(i, j, l + 1);
            int D = at(i + 1, j + 1, l), E = at(i + 1, j, l + 1), F = at(i, j + 1, l + 1);
            cells.push_back({C, D, A, B});
            cells.push_back({C, D, B, F});
            cells.push_back({C, D, F, E});
            cells.push_back({C, D, E, A});
            if (i + j + l <= k - 3) cells.push_back({D, E, at(i + 1, j + 1, l + 1), F});
          }
        }
      }
    }
  }
  return cells;
}

}  // namespace detail

// Legacy-ASCII VTK snapshot of the node cloud at time t with each curved
// element linearized into k^dim flat sub-simplices. An optional nodal scalar
// field is written as point data.
inline void write_space_vtk(const EvolvingSpace& space, double t,
                            const std::vector<double>& nodal_values, const std::string& path) {
  if (!nodal_values.empty() && int(nodal_values.size()) != space.dof_count)
    throw IoError("write_space_vtk: nodal value count does not match dof count");
  std::ofstream out(path);
  if (!out) throw IoError("write_space_vtk: cannot open '" + path + "'");
  std::vector<Vec3> positions = node_positions_at(space, t);
  auto cells = detail::lattice_sub_simplices(space.reference);
  const int corner_count = space.mesh.simplex_dim + 1;
  const std::size_t cell_count = cells.size() * space.mesh.simplices.size();

  out << "# vtk DataFile Version 3.0\n";
  out << "evolfem snapshot t=" << t << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << positions.size() << " double\n";
  char line[128];
  for (const Vec3& p : positions) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    out << line;
  }
  out << "CELLS " << cell_count << " " << cell_count * (corner_count + 1) << "\n";
  for (const auto& dofs : space.element_dof_map) {
    for (const auto& cell : cells) {
      out << corner_count;
      for (int c = 0; c < corner_count; ++c) out << " " << dofs[cell[c]];
      out << "\n";
    }
  }
  out << "CELL_TYPES " << cell_count << "\n";
  const int vtk_type = space.mesh.simplex_dim == 2 ? 5 : 10;
  for (std::size_t i = 0; i < cell_count; ++i) out << vtk_type << "\n";
  if (!nodal_values.empty()) {
    out << "POINT_DATA " << positions.size() << "\n";
    out << "SCALARS u double 1\nLOOKUP_TABLE default\n";
    for (double v : nodal_values) {
      std::snprintf(line, sizeof line, "%.17g\n", v);
      out << line;
    }
  }
  if (!out) throw IoError("write_space_vtk: write failed for '" + path + "'");
}

}  // namespace evolfem
