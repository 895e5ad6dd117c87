#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "evolfem/assembly.hpp"
#include "evolfem/fespace.hpp"
#include "evolfem/mesh.hpp"
#include "evolfem/solver.hpp"
#include "support/oracles.hpp"

using namespace evolfem;

namespace {

SparseMatrix dense_to_csr(const std::vector<std::vector<double>>& dense) {
  SparseMatrix A;
  A.rows = int(dense.size());
  A.cols = A.rows > 0 ? int(dense[0].size()) : 0;
  A.row_offsets.assign(A.rows + 1, 0);
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) {
      if (dense[i][j] != 0.0) {
        A.col_indices.push_back(j);
        A.values.push_back(dense[i][j]);
      }
    }
    A.row_offsets[i + 1] = int(A.col_indices.size());
  }
  return A;
}

SparseMatrix identity_csr(int n) {
  SparseMatrix A;
  A.rows = A.cols = n;
  A.row_offsets.resize(n + 1);
  for (int i = 0; i <= n; ++i) A.row_offsets[i] = i;
  A.col_indices.resize(n);
  for (int i = 0; i < n; ++i) A.col_indices[i] = i;
  A.values.assign(n, 1.0);
  return A;
}

// SPD second-difference matrix: 2 on the diagonal, -1 off.
SparseMatrix tridiagonal_csr(int n) {
  std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    dense[i][i] = 2.0;
    if (i > 0) dense[i][i - 1] = -1.0;
    if (i + 1 < n) dense[i][i + 1] = -1.0;
  }
  return dense_to_csr(dense);
}

double total_mass(const SparseMatrix& M, const std::vector<double>& alpha) {
  std::vector<double> y = spmv(M, alpha);
  double total = 0.0;
  for (double v : y) total += v;
  return total;
}

AmbientField product_plus_one_field() {
  AmbientField f;
  f.value = [](const Vec3& x, double) { return 1.0 + x.y * x.z; };
  f.spatial_gradient = [](const Vec3& x, double) { return Vec3{0.0, x.z, x.y}; };
  f.time_derivative = [](const Vec3&, double) { return 0.0; };
  return f;
}

AmbientField separable_benchmark_field() {
  AmbientField f;
  f.value = [](const Vec3& x, double t) { return std::sin(t) * x.y * x.z; };
  f.spatial_gradient = [](const Vec3& x, double t) {
    return Vec3{0.0, std::sin(t) * x.z, std::sin(t) * x.y};
  };
  f.time_derivative = [](const Vec3& x, double t) { return std::cos(t) * x.y * x.z; };
  return f;
}

void scalar_system(double, SparseMatrix& M, SparseMatrix& S, std::vector<double>& r) {
  M = dense_to_csr({{1.0}});
  S = dense_to_csr({{1.0}});
  r = {0.0};
}

}  // namespace

TEST_CASE("spmv matches hand-computed products") {
  const SparseMatrix eye = identity_csr(4);
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  REQUIRE(spmv(eye, x) == x);

  SparseMatrix zero;
  zero.rows = zero.cols = 3;
  zero.row_offsets.assign(4, 0);
  const std::vector<double> z = spmv(zero, {1.0, 2.0, 3.0});
  for (double v : z) REQUIRE(v == 0.0);

  const SparseMatrix A = dense_to_csr({{2.0, 1.0}, {0.0, 3.0}});
  const std::vector<double> y = spmv(A, {1.0, 1.0});
  REQUIRE(y[0] == Catch::Approx(3.0));
  REQUIRE(y[1] == Catch::Approx(3.0));

  REQUIRE_THROWS_AS(spmv(A, {1.0, 2.0, 3.0}), UsageError);
}

TEST_CASE("gmres solves trivial systems immediately") {
  LinearSolverConfig cfg;

  SECTION("identity converges in at most one iteration") {
    const SparseMatrix eye = identity_csr(7);
    std::vector<double> b(7);
    for (int i = 0; i < 7; ++i) b[i] = std::sin(i + 1.0);
    for (Preconditioner p : {Preconditioner::none, Preconditioner::jacobi}) {
      cfg.preconditioner = p;
      const GmresResult sol = gmres_solve(eye, b, std::vector<double>(7, 0.0), cfg);
      REQUIRE(sol.iterations <= 1);
      for (int i = 0; i < 7; ++i) REQUIRE(sol.x[i] == Catch::Approx(b[i]).margin(1e-12));
    }
  }

  SECTION("one-by-one system") {
    const SparseMatrix A = dense_to_csr({{4.0}});
    const GmresResult sol = gmres_solve(A, {2.0}, {0.0}, cfg);
    REQUIRE(sol.x[0] == Catch::Approx(0.5).margin(1e-14));
  }

  SECTION("zero right-hand side returns the zero vector exactly") {
    const SparseMatrix A = tridiagonal_csr(5);
    const GmresResult sol = gmres_solve(A, std::vector<double>(5, 0.0),
                                        std::vector<double>(5, 1.0), cfg);
    REQUIRE(sol.iterations == 0);
    for (double v : sol.x) REQUIRE(v == 0.0);
  }
}

TEST_CASE("gmres matches a dense elimination oracle") {
  const int n = 50;
  const SparseMatrix A = tridiagonal_csr(n);
  std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int idx = A.row_offsets[i]; idx < A.row_offsets[i + 1]; ++idx)
      dense[i][A.col_indices[idx]] = A.values[idx];
  std::vector<double> b(n);
  for (int i = 0; i < n; ++i) b[i] = std::sin(i + 1.0);

  const std::vector<double> exact = oracles::dense_lu_solve(dense, b);
  LinearSolverConfig cfg;
  const GmresResult sol = gmres_solve(A, b, std::vector<double>(n, 0.0), cfg);

  for (int i = 0; i < n; ++i) REQUIRE(sol.x[i] == Catch::Approx(exact[i]).margin(1e-9));

  std::vector<double> res = spmv(A, sol.x);
  double res_norm = 0.0, b_norm = 0.0;
  for (int i = 0; i < n; ++i) {
    res_norm += (b[i] - res[i]) * (b[i] - res[i]);
    b_norm += b[i] * b[i];
  }
  REQUIRE(std::sqrt(res_norm) <= 1e-10 * std::sqrt(b_norm));
}

TEST_CASE("gmres restart residuals are monotone non-increasing") {
  const int n = 50;
  const SparseMatrix A = tridiagonal_csr(n);
  std::vector<double> b(n);
  for (int i = 0; i < n; ++i) b[i] = std::cos(0.3 * i);

  LinearSolverConfig cfg;
  cfg.restart = 5;
  const GmresResult sol = gmres_solve(A, b, std::vector<double>(n, 0.0), cfg);

  REQUIRE(sol.restart_residuals.size() >= 3);
  for (std::size_t c = 1; c < sol.restart_residuals.size(); ++c)
    REQUIRE(sol.restart_residuals[c] <= sol.restart_residuals[c - 1] * (1.0 + 1e-12));
  double b_norm = 0.0;
  for (double v : b) b_norm += v * v;
  REQUIRE(sol.restart_residuals.back() <= cfg.relative_tolerance * std::sqrt(b_norm));
}

TEST_CASE("gmres reports failure with residual and iteration count") {
  const SparseMatrix A = tridiagonal_csr(50);
  std::vector<double> b(50, 1.0);
  LinearSolverConfig cfg;
  cfg.max_iterations = 3;
  try {
    gmres_solve(A, b, std::vector<double>(50, 0.0), cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& err) {
    REQUIRE(err.iterations == 3);
    REQUIRE(err.residual > 0.0);
  }
}

TEST_CASE("gmres is deterministic and validates inputs") {
  const SparseMatrix A = tridiagonal_csr(30);
  std::vector<double> b(30);
  for (int i = 0; i < 30; ++i) b[i] = std::sin(2.0 * i + 0.5);
  LinearSolverConfig cfg;

  const GmresResult first = gmres_solve(A, b, std::vector<double>(30, 0.0), cfg);
  const GmresResult second = gmres_solve(A, b, std::vector<double>(30, 0.0), cfg);
  REQUIRE(first.x == second.x);
  REQUIRE(first.iterations == second.iterations);

  LinearSolverConfig bad = cfg;
  bad.relative_tolerance = 0.0;
  REQUIRE_THROWS_AS(gmres_solve(A, b, std::vector<double>(30, 0.0), bad), ConfigError);
  bad = cfg;
  bad.restart = 0;
  REQUIRE_THROWS_AS(gmres_solve(A, b, std::vector<double>(30, 0.0), bad), ConfigError);

  SparseMatrix rect = dense_to_csr({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  REQUIRE_THROWS_AS(gmres_solve(rect, {1.0, 2.0}, {0.0, 0.0}, cfg), UsageError);
  REQUIRE_THROWS_AS(gmres_solve(A, b, std::vector<double>(29, 0.0), cfg), UsageError);
}

TEST_CASE("scalar surrogate step reproduces the closed form") {
  LinearSolverConfig cfg;
  TimeStepperState state = initial_state(scalar_system, {1.0});
  REQUIRE(state.M_current.rows == 1);

  state = implicit_euler_step(scalar_system, std::move(state), 0.5, cfg);
  REQUIRE(state.alpha[0] == Catch::Approx(2.0 / 3.0).margin(1e-14));
  REQUIRE(state.t == Catch::Approx(0.5));
  REQUIRE(state.step_index == 1);

  REQUIRE_THROWS_AS(implicit_euler_step(scalar_system, std::move(state), 0.0, cfg), ConfigError);
}

TEST_CASE("stepper validates assembled system shapes") {
  LinearSolverConfig cfg;
  auto mismatched = [](double, SparseMatrix& M, SparseMatrix& S, std::vector<double>& r) {
    M = dense_to_csr({{1.0, 0.5}, {0.5, 1.0}});
    S = dense_to_csr({{1.0}});
    r = {0.0, 0.0};
  };
  auto start = [](double, SparseMatrix& M, SparseMatrix&, std::vector<double>&) {
    M = dense_to_csr({{1.0, 0.5}, {0.5, 1.0}});
  };
  TimeStepperState state = initial_state(start, {1.0, 1.0});
  REQUIRE_THROWS_AS(implicit_euler_step(mismatched, std::move(state), 0.1, cfg), UsageError);
  REQUIRE_THROWS_AS(initial_state(start, {1.0, 2.0, 3.0}), UsageError);
}

TEST_CASE("stationary geometry conserves the lumped functional") {
  EvolvingSpace space =
      build_surface_space(sphere_surface_mesh(1), 1, DomainEvolution::stationary());
  Assembler assembler(space);
  const SystemCallback system =
      make_system(assembler, CoefficientSet::identity(), AmbientField::zero());

  LinearSolverConfig cfg;
  StepperStats stats;
  TimeStepperState state =
      initial_state(system, interpolate_nodal(space, product_plus_one_field(), 0.0));
  const double initial_total = total_mass(state.M_current, state.alpha);
  REQUIRE(std::abs(initial_total) > 1.0);

  for (int n = 0; n < 4; ++n) {
    state = implicit_euler_step(system, std::move(state), 0.25, cfg, &stats);
    const double total = total_mass(state.M_current, state.alpha);
    REQUIRE(std::abs(total - initial_total) <= 1e-9 * std::abs(initial_total));
  }
  REQUIRE(stats.gmres_iterations > 0);
}

TEST_CASE("moving geometry conserves the total mass functional") {
  EvolvingSpace space = build_surface_space(sphere_surface_mesh(2), 1, DomainEvolution());
  Assembler assembler(space);
  const SystemCallback system =
      make_system(assembler, CoefficientSet::identity(), AmbientField::zero());

  LinearSolverConfig cfg;
  TimeStepperState state =
      initial_state(system, interpolate_nodal(space, product_plus_one_field(), 0.0));
  const double initial_total = total_mass(state.M_current, state.alpha);

  const int steps = 16;
  for (int n = 0; n < steps; ++n) {
    state = implicit_euler_step(system, std::move(state), 1.0 / steps, cfg);
    const double total = total_mass(state.M_current, state.alpha);
    REQUIRE(std::abs(total - initial_total) <= 1e-9 * std::abs(initial_total));
  }
}

TEST_CASE("integrate reproduces a single step and keeps zero data zero") {
  EvolvingSpace space = build_surface_space(sphere_surface_mesh(1), 1, DomainEvolution());
  Assembler assembler(space);
  const AmbientField exact = separable_benchmark_field();
  const SystemCallback system = make_system(assembler, CoefficientSet::identity(), exact);
  LinearSolverConfig cfg;

  const std::vector<double> alpha0(space.dof_count, 0.0);
  const TimeStepperState via_integrate = integrate(system, alpha0, 0.5, 1, cfg);
  TimeStepperState manual = initial_state(system, alpha0);
  manual = implicit_euler_step(system, std::move(manual), 0.5, cfg);
  REQUIRE(via_integrate.alpha == manual.alpha);
  REQUIRE(via_integrate.step_index == 1);

  const SystemCallback quiet = make_system(assembler, CoefficientSet::identity(),
                                           AmbientField::zero());
  const TimeStepperState rest = integrate(quiet, alpha0, 1.0, 4, cfg);
  for (double v : rest.alpha) REQUIRE(v == 0.0);

  REQUIRE_THROWS_AS(integrate(system, alpha0, 1.0, 0, cfg), ConfigError);
}

TEST_CASE("halving the time step halves the time discretization error") {
  EvolvingSpace space = build_surface_space(sphere_surface_mesh(1), 1, DomainEvolution());
  Assembler assembler(space);
  const AmbientField exact = separable_benchmark_field();
  const SystemCallback system = make_system(assembler, CoefficientSet::identity(), exact);
  LinearSolverConfig cfg;

  const std::vector<double> alpha0 = interpolate_nodal(space, exact, 0.0);
  const std::vector<double> a16 = integrate(system, alpha0, 1.0, 16, cfg).alpha;
  const std::vector<double> a32 = integrate(system, alpha0, 1.0, 32, cfg).alpha;
  const std::vector<double> a64 = integrate(system, alpha0, 1.0, 64, cfg).alpha;

  auto distance = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
  };
  const double coarse = distance(a16, a32);
  const double fine = distance(a32, a64);
  REQUIRE(fine > 0.0);
  const double ratio = coarse / fine;
  REQUIRE(ratio >= 1.6);
  REQUIRE(ratio <= 2.4);
}

TEST_CASE("time integration is deterministic") {
  EvolvingSpace space = build_surface_space(sphere_surface_mesh(1), 1, DomainEvolution());
  Assembler assembler(space);
  const SystemCallback system =
      make_system(assembler, CoefficientSet::identity(), separable_benchmark_field());
  LinearSolverConfig cfg;

  const std::vector<double> alpha0(space.dof_count, 0.0);
  const TimeStepperState first = integrate(system, alpha0, 1.0, 8, cfg);
  const TimeStepperState second = integrate(system, alpha0, 1.0, 8, cfg);
  REQUIRE(first.alpha == second.alpha);
}
