#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "evolfem/assembly.hpp"
#include "evolfem/types.hpp"

namespace evolfem {

inline std::vector<double> spmv(const SparseMatrix& A, const std::vector<double>& x) {
  if (int(x.size()) != A.cols) throw UsageError("spmv: vector length does not match matrix columns");
  std::vector<double> y(A.rows, 0.0);
  for (int i = 0; i < A.rows; ++i) {
    double acc = 0.0;
    for (int idx = A.row_offsets[i]; idx < A.row_offsets[i + 1]; ++idx)
      acc += A.values[idx] * x[A.col_indices[idx]];
    y[i] = acc;
  }
  return y;
}

enum class Preconditioner { none, jacobi };

struct LinearSolverConfig {
  double relative_tolerance = 1e-10;
  int max_iterations = 2000;
  int restart = 50;
  Preconditioner preconditioner = Preconditioner::jacobi;
};

struct GmresResult {
  std::vector<double> x;
  int iterations = 0;
  // True residual norm |b - Ax| of the returned iterate.
  double residual = 0.0;
  // Residual entering each restart cycle, followed by the final residual.
  // Non-increasing: every cycle minimizes over a space containing the zero
  // correction.
  std::vector<double> restart_residuals;
};

namespace detail {

inline double dot_product(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2_vec(const std::vector<double>& a) { return std::sqrt(dot_product(a, a)); }

}  // namespace detail

// Restarted GMRES with right preconditioning, so the reported residual is the
// residual of the original system. Sequential throughout: repeated calls with
// identical inputs produce bit-identical iterates.
inline GmresResult gmres_solve(const SparseMatrix& A, const std::vector<double>& b,
                               const std::vector<double>& x0, const LinearSolverConfig& cfg) {
  if (!(cfg.relative_tolerance > 0.0)) throw ConfigError("gmres_solve: tolerance must be positive");
  if (cfg.restart < 1) throw ConfigError("gmres_solve: restart must be at least 1");
  if (cfg.max_iterations < 1) throw ConfigError("gmres_solve: max_iterations must be at least 1");
  if (A.rows != A.cols) throw UsageError("gmres_solve: matrix must be square");
  if (int(b.size()) != A.rows || int(x0.size()) != A.rows)
    throw UsageError("gmres_solve: vector length does not match the system size");

  const int n = A.rows;
  GmresResult result;
  const double b_norm = detail::norm2_vec(b);
  if (b_norm == 0.0) {
    // x = 0 is the exact solution and the only iterate meeting a zero target.
    result.x.assign(n, 0.0);
    result.restart_residuals.push_back(0.0);
    return result;
  }
  const double target = cfg.relative_tolerance * b_norm;

  // Jacobi uses the inverse diagonal; zero diagonal entries fall back to the
  // identity so the preconditioner is always well defined.
  std::vector<double> inv_diag;
  if (cfg.preconditioner == Preconditioner::jacobi) {
    inv_diag.assign(n, 1.0);
    for (int i = 0; i < n; ++i) {
      const double d = A.get(i, i);
      if (d != 0.0) inv_diag[i] = 1.0 / d;
    }
  }
  auto apply_precond = [&](std::vector<double>& v) {
    if (!inv_diag.empty())
      for (int i = 0; i < n; ++i) v[i] *= inv_diag[i];
  };

  const int m = std::min(cfg.restart, n);
  std::vector<std::vector<double>> basis(m + 1, std::vector<double>(n, 0.0));
  std::vector<double> hessenberg((m + 1) * m, 0.0);
  auto H = [&](int i, int j) -> double& { return hessenberg[j * (m + 1) + i]; };
  std::vector<double> givens_c(m, 0.0);
  std::vector<double> givens_s(m, 0.0);
  std::vector<double> g(m + 1, 0.0);

  result.x = x0;
  std::vector<double> residual_vec = spmv(A, result.x);
  for (int i = 0; i < n; ++i) residual_vec[i] = b[i] - residual_vec[i];
  double residual_norm = detail::norm2_vec(residual_vec);

  while (true) {
    result.restart_residuals.push_back(residual_norm);
    if (residual_norm <= target) {
      result.residual = residual_norm;
      return result;
    }
    if (result.iterations >= cfg.max_iterations)
      throw SolverError("gmres_solve: no convergence within max_iterations", residual_norm,
                        result.iterations);

    const double beta = residual_norm;
    for (int i = 0; i < n; ++i) basis[0][i] = residual_vec[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;

    int columns = 0;
    for (int j = 0; j < m; ++j) {
      // Arnoldi on the preconditioned operator, modified Gram-Schmidt.
      std::vector<double> z = basis[j];
      apply_precond(z);
      std::vector<double> w = spmv(A, z);
      for (int i = 0; i <= j; ++i) {
        const double h = detail::dot_product(w, basis[i]);
        H(i, j) = h;
        for (int l = 0; l < n; ++l) w[l] -= h * basis[i][l];
      }
      const double h_next = detail::norm2_vec(w);
      H(j + 1, j) = h_next;
      const bool breakdown = h_next == 0.0;
      if (!breakdown)
        for (int l = 0; l < n; ++l) basis[j + 1][l] = w[l] / h_next;

      for (int i = 0; i < j; ++i) {
        const double hi = H(i, j);
        const double hi1 = H(i + 1, j);
        H(i, j) = givens_c[i] * hi + givens_s[i] * hi1;
        H(i + 1, j) = -givens_s[i] * hi + givens_c[i] * hi1;
      }
      const double r = std::hypot(H(j, j), H(j + 1, j));
      givens_c[j] = r == 0.0 ? 1.0 : H(j, j) / r;
      givens_s[j] = r == 0.0 ? 0.0 : H(j + 1, j) / r;
      H(j, j) = r;
      H(j + 1, j) = 0.0;
      g[j + 1] = -givens_s[j] * g[j];
      g[j] = givens_c[j] * g[j];

      ++result.iterations;
      columns = j + 1;
      if (std::abs(g[j + 1]) <= target || result.iterations >= cfg.max_iterations || breakdown)
        break;
    }

    // Least-squares coefficients from the rotated upper-triangular system.
    std::vector<double> y(columns, 0.0);
    for (int i = columns - 1; i >= 0; --i) {
      double acc = g[i];
      for (int j = i + 1; j < columns; ++j) acc -= H(i, j) * y[j];
      y[i] = H(i, i) == 0.0 ? 0.0 : acc / H(i, i);
    }
    std::vector<double> update(n, 0.0);
    for (int j = 0; j < columns; ++j)
      for (int l = 0; l < n; ++l) update[l] += y[j] * basis[j][l];
    apply_precond(update);
    for (int l = 0; l < n; ++l) result.x[l] += update[l];

    residual_vec = spmv(A, result.x);
    for (int i = 0; i < n; ++i) residual_vec[i] = b[i] - residual_vec[i];
    residual_norm = detail::norm2_vec(residual_vec);
  }
}

// Produces M(t), S(t), r(t) on a fixed pattern for the implicit update at t.
using SystemCallback =
    std::function<void(double t, SparseMatrix& M, SparseMatrix& S, std::vector<double>& r)>;

struct TimeStepperState {
  double t = 0.0;
  std::vector<double> alpha;
  // Mass matrix at time t; the next step's right-hand side weights the old
  // coefficients with the old mass, which is what conserves 1^T M alpha.
  SparseMatrix M_current;
  int step_index = 0;
};

struct StepperStats {
  int gmres_iterations = 0;
  double last_residual = 0.0;
};

inline SystemCallback make_system(const Assembler& assembler, const CoefficientSet& coefficients,
                                  const AmbientField& solution) {
  return [&assembler, coefficients, solution](double t, SparseMatrix& M, SparseMatrix& S,
                                              std::vector<double>& r) {
    assembler.system(t, coefficients, solution, 1.0, M, S, r);
  };
}

inline SystemCallback make_system(const CoupledAssembler& assembler, const ManufacturedData& data) {
  return [&assembler, data](double t, SparseMatrix& M, SparseMatrix& S, std::vector<double>& r) {
    CoupledSystem sys = assembler.system(t, data);
    M = std::move(sys.M);
    S = std::move(sys.S);
    r = std::move(sys.r);
  };
}

inline TimeStepperState initial_state(const SystemCallback& system, std::vector<double> alpha0) {
  TimeStepperState state;
  state.alpha = std::move(alpha0);
  SparseMatrix S_unused;
  std::vector<double> r_unused;
  system(0.0, state.M_current, S_unused, r_unused);
  if (int(state.alpha.size()) != state.M_current.rows)
    throw UsageError("initial_state: coefficient vector does not match the assembled system");
  return state;
}

// Conservative implicit Euler: (M(t+tau) + tau S(t+tau)) alpha_new =
// M(t) alpha + tau r(t+tau). Stores M(t+tau) for the next step.
inline TimeStepperState implicit_euler_step(const SystemCallback& system, TimeStepperState state,
                                            double tau, const LinearSolverConfig& cfg,
                                            StepperStats* stats = nullptr) {
  if (!(tau > 0.0)) throw ConfigError("implicit_euler_step: step size must be positive");
  if (int(state.alpha.size()) != state.M_current.rows)
    throw UsageError("implicit_euler_step: state coefficients do not match the stored mass matrix");

  const double t_next = state.t + tau;
  SparseMatrix M;
  SparseMatrix S;
  std::vector<double> r;
  system(t_next, M, S, r);
  if (M.values.size() != S.values.size() || M.rows != S.rows || int(r.size()) != M.rows)
    throw UsageError("implicit_euler_step: mass and stiffness patterns differ");
  if (M.rows != state.M_current.rows)
    throw UsageError("implicit_euler_step: system size changed between time levels");

  std::vector<double> rhs = spmv(state.M_current, state.alpha);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += tau * r[i];

  SparseMatrix A = M;
  for (std::size_t k = 0; k < A.values.size(); ++k) A.values[k] += tau * S.values[k];

  GmresResult sol = gmres_solve(A, rhs, state.alpha, cfg);
  if (stats) {
    stats->gmres_iterations += sol.iterations;
    stats->last_residual = sol.residual;
  }
  state.t = t_next;
  state.alpha = std::move(sol.x);
  state.M_current = std::move(M);
  ++state.step_index;
  return state;
}

// Convenience form assembling from a single space per call; studies reuse an
// Assembler through make_system instead.
inline TimeStepperState implicit_euler_step(const EvolvingSpace& space,
                                            const ManufacturedData& data, TimeStepperState state,
                                            double tau, const LinearSolverConfig& cfg) {
  Assembler assembler(space);
  return implicit_euler_step(make_system(assembler, data.coefficients, data.solution),
                             std::move(state), tau, cfg);
}

inline TimeStepperState integrate(const SystemCallback& system, std::vector<double> alpha0,
                                  double final_time, int num_steps, const LinearSolverConfig& cfg,
                                  StepperStats* stats = nullptr) {
  if (num_steps < 1) throw ConfigError("integrate: need at least one step");
  if (!(final_time > 0.0)) throw ConfigError("integrate: final time must be positive");
  TimeStepperState state = initial_state(system, std::move(alpha0));
  const double tau = final_time / num_steps;
  for (int n = 0; n < num_steps; ++n)
    state = implicit_euler_step(system, std::move(state), tau, cfg, stats);
  return state;
}

}  // namespace evolfem
