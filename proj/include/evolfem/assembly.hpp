#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "evolfem/fespace.hpp"
#include "evolfem/geometry.hpp"
#include "evolfem/types.hpp"

namespace evolfem {

// Square CSR matrix with sorted column indices per row. The symbolic pattern
// is computed once per space and only values change between time levels.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_offsets;
  std::vector<int> col_indices;
  std::vector<double> values;

  double& at(int i, int j) {
    const int* first = col_indices.data() + row_offsets[i];
    const int* last = col_indices.data() + row_offsets[i + 1];
    const int* it = std::lower_bound(first, last, j);
    if (it == last || *it != j) throw UsageError("SparseMatrix::at: entry outside the pattern");
    return values[it - col_indices.data()];
  }
  double get(int i, int j) const {
    const int* first = col_indices.data() + row_offsets[i];
    const int* last = col_indices.data() + row_offsets[i + 1];
    const int* it = std::lower_bound(first, last, j);
    return (it == last || *it != j) ? 0.0 : values[it - col_indices.data()];
  }
};

inline SparseMatrix make_pattern(int dof_count, const std::vector<std::vector<int>>& element_dofs) {
  std::vector<std::vector<int>> columns(dof_count);
  for (const auto& dofs : element_dofs)
    for (int i : dofs)
      for (int j : dofs) columns[i].push_back(j);
  SparseMatrix A;
  A.rows = A.cols = dof_count;
  A.row_offsets.assign(dof_count + 1, 0);
  for (int i = 0; i < dof_count; ++i) {
    auto& cols = columns[i];
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    A.row_offsets[i + 1] = A.row_offsets[i] + int(cols.size());
  }
  A.col_indices.reserve(A.row_offsets[dof_count]);
  for (int i = 0; i < dof_count; ++i)
    A.col_indices.insert(A.col_indices.end(), columns[i].begin(), columns[i].end());
  A.values.assign(A.col_indices.size(), 0.0);
  return A;
}

inline void write_matrix_market(const SparseMatrix& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_matrix_market: cannot open '" + path + "'");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.rows << " " << A.cols << " " << A.values.size() << "\n";
  char line[96];
  for (int i = 0; i < A.rows; ++i) {
    for (int idx = A.row_offsets[i]; idx < A.row_offsets[i + 1]; ++idx) {
      std::snprintf(line, sizeof line, "%d %d %.17g\n", i + 1, A.col_indices[idx] + 1, A.values[idx]);
      out << line;
    }
  }
  if (!out) throw IoError("write_matrix_market: write failed for '" + path + "'");
}

// PDE data evaluated ambiently at physical quadrature points. The normal
// argument carries the exact ambient normal on surface domains and is zero
// for bulk domains.
struct CoefficientSet {
  std::function<Mat3(const Vec3&, double, const Vec3&)> A;
  std::function<Vec3(const Vec3&, double, const Vec3&)> b;
  std::function<double(const Vec3&, double)> c;

  static CoefficientSet identity() {
    return {[](const Vec3&, double, const Vec3&) { return Mat3::identity(); },
            [](const Vec3&, double, const Vec3&) { return Vec3{}; },
            [](const Vec3&, double) { return 0.0; }};
  }
};

// Exact solution(s) and coefficients for manufactured right-hand sides. The
// surface fields are used only by the coupled assembly; alpha and beta are the
// coupling constants of the bulk-surface exchange term.
struct ManufacturedData {
  AmbientField solution;
  CoefficientSet coefficients = CoefficientSet::identity();
  AmbientField surface_solution = AmbientField::zero();
  CoefficientSet surface_coefficients = CoefficientSet::identity();
  double alpha = 1.0;
  double beta = 1.0;
};

namespace detail {

// Independent per-index work dispatched over a thread pool in fixed-size
// blocks. Every index writes only its own output slot, so scheduling cannot
// change results.
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    constexpr int block = 16;
    for (;;) {
      int begin = next.fetch_add(block);
      if (begin >= count) return;
      int end = std::min(begin + block, count);
      for (int i = begin; i < end; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min(threads, int(std::thread::hardware_concurrency() > 0
                                        ? std::thread::hardware_concurrency()
                                        : 1u));
  pool.reserve(spawn);
  for (int s = 0; s < spawn; ++s) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Assembles M(t), S(t) and the manufactured residual r(t) on one space. The
// sparsity pattern, quadrature rule and reference tables are cached at
// construction; local element contributions are computed in parallel and
// scattered serially in element order, so results do not depend on the thread
// count.
class Assembler {
 public:
  explicit Assembler(const EvolvingSpace& space, int quadrature_degree = 0, int threads = 1)
      : space_(&space),
        rule_(make_quadrature(space.mesh.simplex_dim,
                              quadrature_degree > 0 ? quadrature_degree
                                                    : default_quadrature_degree(space.order))),
        tables_(tabulate_reference(space.reference, rule_)),
        pattern_(make_pattern(space.dof_count, space.element_dof_map)),
        threads_(threads) {}

  const SparseMatrix& pattern() const { return pattern_; }
  SparseMatrix empty_matrix() const { return pattern_; }

  SparseMatrix mass(double t, double weight) const {
    SparseMatrix M = pattern_;
    assemble(t, nullptr, nullptr, weight, &M, nullptr, nullptr);
    return M;
  }

  SparseMatrix stiffness(double t, const CoefficientSet& coeffs, double weight) const {
    SparseMatrix S = pattern_;
    assemble(t, &coeffs, nullptr, weight, nullptr, &S, nullptr);
    return S;
  }

  std::vector<double> manufactured_rhs(double t, const ManufacturedData& data, double weight) const {
    std::vector<double> r(space_->dof_count, 0.0);
    assemble(t, &data.coefficients, &data.solution, weight, nullptr, nullptr, &r);
    return r;
  }

  // One geometry pass for the full implicit Euler data (M, S, r) at a time
  // level.
  void system(double t, const CoefficientSet& coeffs, const AmbientField& solution, double weight,
              SparseMatrix& M, SparseMatrix& S, std::vector<double>& r) const {
    M = pattern_;
    S = pattern_;
    r.assign(space_->dof_count, 0.0);
    assemble(t, &coeffs, &solution, weight, &M, &S, &r);
  }

 private:
  void assemble(double t, const CoefficientSet* coeffs, const AmbientField* solution, double weight,
                SparseMatrix* M, SparseMatrix* S, std::vector<double>* r) const {
    const EvolvingSpace& space = *space_;
    const int n = space.reference.basis_count;
    const int n_elements = int(space.mesh.simplices.size());
    const bool surface = space.kind == SpaceKind::surface;
    const std::vector<Vec3> positions = node_positions_at(space, t);

    // Per-element local storage: [mass n*n][stiffness n*n][rhs n].
    const int stride = n * n * 2 + n;
    std::vector<double> locals(std::size_t(stride) * n_elements);

    detail::parallel_for(n_elements, threads_, [&](int e) {
      double* mloc = locals.data() + std::size_t(stride) * e;
      double* sloc = mloc + n * n;
      double* rloc = sloc + n * n;
      ElementGeometry geo = element_geometry(space, e, positions, rule_, tables_);
      for (std::size_t q = 0; q < rule_.points.size(); ++q) {
        const double wq = weight * rule_.weights[q] * geo.sqrt_g[q];
        const auto& val = tables_.values[q];
        const auto& grad = geo.physical_basis_gradients[q];
        if (M) {
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) mloc[i * n + j] += wq * val[i] * val[j];
        }
        if (!S && !r) continue;

        const Vec3& x = geo.position[q];
        const Vec3 nu = surface ? space.evolution.ambient_normal(x, t) : Vec3{};
        const Mat3 Aq = coeffs->A(x, t, nu);
        const Vec3 bq = coeffs->b(x, t, nu);
        const double cq = coeffs->c(x, t);

        if (S) {
          for (int j = 0; j < n; ++j) {
            const Vec3 Agrad = Aq * grad[j];
            for (int i = 0; i < n; ++i)
              sloc[i * n + j] += wq * (dot(Agrad, grad[i]) + val[j] * dot(bq, grad[i]) +
                                       cq * val[j] * val[i]);
          }
        }
        if (r) {
          const double u = solution->value(x, t);
          const double du = space.evolution.material_derivative(*solution, x, t);
          const double divw = surface ? space.evolution.tangential_divergence_velocity(x, t)
                                      : space.evolution.bulk_divergence_velocity(x, t);
          const Vec3 gradu = surface ? space.evolution.tangential_gradient(*solution, x, t)
                                     : solution->spatial_gradient(x, t);
          const Vec3 flux = Aq * gradu + u * bq;
          const double load = du + u * divw;
          for (int i = 0; i < n; ++i)
            rloc[i] += wq * (load * val[i] + dot(flux, grad[i]) + cq * u * val[i]);
        }
      }
    });

    for (int e = 0; e < n_elements; ++e) {
      const auto& dofs = space.element_dof_map[e];
      const double* mloc = locals.data() + std::size_t(stride) * e;
      const double* sloc = mloc + n * n;
      const double* rloc = sloc + n * n;
      for (int i = 0; i < n; ++i) {
        if (M)
          for (int j = 0; j < n; ++j) M->at(dofs[i], dofs[j]) += mloc[i * n + j];
        if (S)
          for (int j = 0; j < n; ++j) S->at(dofs[i], dofs[j]) += sloc[i * n + j];
        if (r) (*r)[dofs[i]] += rloc[i];
      }
    }
  }

  const EvolvingSpace* space_;
  QuadratureRule rule_;
  ReferenceTables tables_;
  SparseMatrix pattern_;
  int threads_;
};

inline SparseMatrix assemble_mass(const EvolvingSpace& space, double t, double weight) {
  return Assembler(space).mass(t, weight);
}

inline SparseMatrix assemble_stiffness(const EvolvingSpace& space, double t,
                                       const CoefficientSet& coeffs, double weight) {
  return Assembler(space).stiffness(t, coeffs, weight);
}

inline std::vector<double> assemble_manufactured_rhs(const EvolvingSpace& space, double t,
                                                     const ManufacturedData& data, double weight) {
  return Assembler(space).manufactured_rhs(t, data, weight);
}

// Coupled block system in the fixed dof layout [bulk | surface]:
//   M = diag(alpha M_Omega, beta M_Gamma)
//   S = diag(alpha S_Omega, beta S_Gamma) + C
// where C is the Gram matrix of the exchange functional alpha phi - beta rho
// over the boundary. C and the exchange residual are assembled once on the
// surface space and scattered through the trace map, which is exact because
// boundary-face and surface geometries coincide nodally.
struct CoupledSystem {
  SparseMatrix M;
  SparseMatrix S;
  std::vector<double> r;
  int bulk_dofs = 0;
  int surface_dofs = 0;
};

class CoupledAssembler {
 public:
  CoupledAssembler(const EvolvingSpace& bulk, const EvolvingSpace& surf, const TraceMap& trace,
                   int quadrature_degree = 0, int threads = 1)
      : bulk_(&bulk),
        surf_(&surf),
        trace_(&trace),
        bulk_assembler_(bulk, quadrature_degree, threads),
        surf_assembler_(surf, quadrature_degree, threads) {
    if (int(trace.surface_to_bulk.size()) != surf.dof_count)
      throw InvalidMeshError("CoupledAssembler: trace map does not match the surface space");
    const int nb = bulk.dof_count;
    std::vector<std::vector<int>> lists = bulk.element_dof_map;
    for (const auto& dofs : surf.element_dof_map) {
      std::vector<int> offset_dofs;
      offset_dofs.reserve(2 * dofs.size());
      for (int d : dofs) offset_dofs.push_back(nb + d);
      // Exchange couples each surface element with the bulk trace dofs of the
      // same boundary face.
      for (int d : dofs) offset_dofs.push_back(trace.surface_to_bulk[d]);
      lists.push_back(std::move(offset_dofs));
    }
    pattern_ = make_pattern(nb + surf.dof_count, lists);
  }

  CoupledSystem system(double t, const ManufacturedData& data) const {
    const int nb = bulk_->dof_count;
    const int ns = surf_->dof_count;
    const double alpha = data.alpha;
    const double beta = data.beta;
    CoupledSystem out;
    out.bulk_dofs = nb;
    out.surface_dofs = ns;
    out.M = pattern_;
    out.S = pattern_;
    out.r.assign(nb + ns, 0.0);

    SparseMatrix Mb, Sb, Ms, Ss;
    std::vector<double> rb, rs;
    bulk_assembler_.system(t, data.coefficients, data.solution, alpha, Mb, Sb, rb);
    surf_assembler_.system(t, data.surface_coefficients, data.surface_solution, beta, Ms, Ss, rs);
    add_block(out.M, Mb, 0, 0);
    add_block(out.S, Sb, 0, 0);
    add_block(out.M, Ms, nb, nb);
    add_block(out.S, Ss, nb, nb);
    for (int i = 0; i < nb; ++i) out.r[i] += rb[i];
    for (int i = 0; i < ns; ++i) out.r[nb + i] += rs[i];

    // Exchange term: Gram matrix and residual of alpha u - beta v on the
    // boundary, tested against alpha chi - beta rho.
    SparseMatrix G = surf_assembler_.mass(t, 1.0);
    AmbientField mismatch{
        [&data](const Vec3& x, double s) {
          return data.alpha * data.solution.value(x, s) -
                 data.beta * data.surface_solution.value(x, s);
        },
        [](const Vec3&, double) { return Vec3{}; },
        [](const Vec3&, double) { return 0.0; }};
    std::vector<double> g = boundary_moment(t, mismatch);

    const auto& map = trace_->surface_to_bulk;
    for (int i = 0; i < ns; ++i) {
      for (int idx = G.row_offsets[i]; idx < G.row_offsets[i + 1]; ++idx) {
        const int j = G.col_indices[idx];
        const double v = G.values[idx];
        out.S.at(map[i], map[j]) += alpha * alpha * v;
        out.S.at(map[i], nb + j) -= alpha * beta * v;
        out.S.at(nb + i, map[j]) -= alpha * beta * v;
        out.S.at(nb + i, nb + j) += beta * beta * v;
      }
      out.r[map[i]] += alpha * g[i];
      out.r[nb + i] -= beta * g[i];
    }
    return out;
  }

 private:
  // \int_Gamma f rho_i over the surface space at time t.
  std::vector<double> boundary_moment(double t, const AmbientField& f) const {
    std::vector<double> g(surf_->dof_count, 0.0);
    QuadratureRule rule = make_quadrature(2, default_quadrature_degree(surf_->order));
    ReferenceTables tables = tabulate_reference(surf_->reference, rule);
    std::vector<Vec3> positions = node_positions_at(*surf_, t);
    for (std::size_t e = 0; e < surf_->mesh.simplices.size(); ++e) {
      ElementGeometry geo = element_geometry(*surf_, int(e), positions, rule, tables);
      const auto& dofs = surf_->element_dof_map[e];
      for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const double wq = rule.weights[q] * geo.sqrt_g[q] * f.value(geo.position[q], t);
        for (int i = 0; i < surf_->reference.basis_count; ++i)
          g[dofs[i]] += wq * tables.values[q][i];
      }
    }
    return g;
  }

  static void add_block(SparseMatrix& big, const SparseMatrix& small, int row_offset,
                        int col_offset) {
    for (int i = 0; i < small.rows; ++i)
      for (int idx = small.row_offsets[i]; idx < small.row_offsets[i + 1]; ++idx)
        big.at(row_offset + i, col_offset + small.col_indices[idx]) += small.values[idx];
  }

  const EvolvingSpace* bulk_;
  const EvolvingSpace* surf_;
  const TraceMap* trace_;
  Assembler bulk_assembler_;
  Assembler surf_assembler_;
  SparseMatrix pattern_;
};

inline CoupledSystem assemble_coupled(const EvolvingSpace& bulk, const EvolvingSpace& surf,
                                      const TraceMap& trace, double t,
                                      const ManufacturedData& data) {
  return CoupledAssembler(bulk, surf, trace).system(t, data);
}

}  // namespace evolfem
