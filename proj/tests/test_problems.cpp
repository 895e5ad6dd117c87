#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "evolfem/problems.hpp"
#include "support/oracles.hpp"

using namespace evolfem;

namespace {

// Hand-coded derivatives of an ambient field against central differences at
// random points and times.
void check_field_derivatives(const AmbientField& f, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  const double times[] = {0.1, 0.35, 0.6, 0.85, 1.0};
  for (int p = 0; p < 100; ++p) {
    const Vec3 x{coord(rng), coord(rng), coord(rng)};
    for (double t : times) {
      const Vec3 grad = f.spatial_gradient(x, t);
      for (int c = 0; c < 3; ++c) {
        auto slice = [&](double s) {
          Vec3 y = x;
          y[c] = s;
          return f.value(y, t);
        };
        REQUIRE(grad[c] == Catch::Approx(oracles::central_difference(slice, x[c])).margin(1e-6));
      }
      auto in_time = [&](double s) { return f.value(x, s); };
      REQUIRE(f.time_derivative(x, t) ==
              Catch::Approx(oracles::central_difference(in_time, t)).margin(1e-6));
    }
  }
}

Vec3 random_unit(std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 v{gauss(rng), gauss(rng), gauss(rng)};
  while (norm(v) < 0.1) v = Vec3{gauss(rng), gauss(rng), gauss(rng)};
  return normalized(v);
}

}  // namespace

TEST_CASE("surface problem carries the published data") {
  const ProblemDefinition def = surface_problem();
  REQUIRE(def.id == "surface");
  REQUIRE(def.kind == ProblemKind::surface);
  REQUIRE(def.final_time == 1.0);
  REQUIRE(def.supported_orders == std::vector<int>{1, 2, 3});
  REQUIRE(def.evolution.amplitude() == Catch::Approx(0.25));

  const AmbientField& u = def.data.solution;
  REQUIRE(u.value({0.0, 1.0, 0.0}, 0.3) == 0.0);
  REQUIRE(u.value({0.0, 1.0, 1.0}, 1.5707963267948966) == Catch::Approx(1.0));

  REQUIRE(def.data.coefficients.c({0.0, 1.0, 0.5}, 0.2) == 0.0);
  REQUIRE(def.data.coefficients.c({0.7, 0.0, 0.1}, 0.9) == 0.0);

  const Mat3 A = def.data.coefficients.A({2.0, 0.0, 0.0}, 0.0, Vec3{});
  REQUIRE(A(0, 0) == Catch::Approx(5.0));
  REQUIRE(A(1, 1) == Catch::Approx(5.0));
  REQUIRE(A(2, 2) == Catch::Approx(5.0));
  REQUIRE(A(0, 1) == 0.0);
}

TEST_CASE("surface drift is tangential at random surface points") {
  const ProblemDefinition def = surface_problem();
  std::mt19937 rng(512);
  for (double t : {0.0, 0.45, 1.0}) {
    for (int p = 0; p < 100; ++p) {
      const Vec3 y = def.evolution.flow(random_unit(rng), t);
      const Vec3 nu = def.evolution.outward_normal(y, t);
      const Vec3 b = def.data.coefficients.b(y, t, nu);
      REQUIRE(std::abs(dot(b, nu)) <= 1e-13);
    }
  }
}

TEST_CASE("bulk problem carries the published data") {
  const ProblemDefinition def = bulk_problem();
  REQUIRE(def.id == "bulk");
  REQUIRE(def.kind == ProblemKind::bulk);
  REQUIRE(def.supported_orders == std::vector<int>{1, 2});

  const AmbientField& u = def.data.solution;
  const double half_pi = 1.5707963267948966;
  REQUIRE(u.value({0.0, 0.0, 0.7}, half_pi) == Catch::Approx(1.0));
  REQUIRE(u.value({0.3, -0.6, 0.2}, 0.0) == 0.0);

  const Vec3 grad = u.spatial_gradient({0.0, 0.0, 0.0}, half_pi);
  REQUIRE(std::abs(grad.x) <= 1e-15);
  REQUIRE(std::abs(grad.y) <= 1e-15);
  REQUIRE(std::abs(grad.z) <= 1e-15);

  REQUIRE(def.data.coefficients.c({0.0, 0.8, -0.1}, 0.5) == Catch::Approx(1.0));
  const Vec3 b = def.data.coefficients.b({0.2, 0.4, 0.6}, 0.5, Vec3{});
  REQUIRE(b.x == 1.0);
  REQUIRE(b.y == 2.0);
  REQUIRE(b.z == 0.0);
}

TEST_CASE("coupled problem carries the published data") {
  const ProblemDefinition def = coupled_problem();
  REQUIRE(def.id == "coupled");
  REQUIRE(def.kind == ProblemKind::coupled);
  REQUIRE(def.supported_orders == std::vector<int>{1, 2});
  REQUIRE(def.data.alpha == 1.0);
  REQUIRE(def.data.beta == 1.0);

  const AmbientField& u = def.data.solution;
  const AmbientField& v = def.data.surface_solution;
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int p = 0; p < 50; ++p) {
    const double s = coord(rng);
    const Vec3 x{s, coord(rng), s};
    const double t = 0.5 * (coord(rng) + 1.0);
    REQUIRE(def.data.alpha * u.value(x, t) - def.data.beta * v.value(x, t) ==
            Catch::Approx(0.0).margin(1e-15));
  }
  REQUIRE(v.value({0.0, 1.0, 0.0}, 0.8) == 0.0);

  for (const CoefficientSet* coeffs :
       {&def.data.coefficients, &def.data.surface_coefficients}) {
    const Mat3 A = coeffs->A({0.3, -0.2, 0.9}, 0.4, Vec3{0.0, 0.0, 1.0});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) REQUIRE(A(i, j) == (i == j ? 1.0 : 0.0));
    const Vec3 b = coeffs->b({0.3, -0.2, 0.9}, 0.4, Vec3{0.0, 0.0, 1.0});
    REQUIRE(norm(b) == 0.0);
    REQUIRE(coeffs->c({0.3, -0.2, 0.9}, 0.4) == 0.0);
  }
}

TEST_CASE("exact fields match finite differences") {
  check_field_derivatives(surface_problem().data.solution, 101);
  check_field_derivatives(bulk_problem().data.solution, 202);
  check_field_derivatives(coupled_problem().data.solution, 303);
  check_field_derivatives(coupled_problem().data.surface_solution, 404);
}

TEST_CASE("problems are reachable by id") {
  REQUIRE(problem_by_id("surface").kind == ProblemKind::surface);
  REQUIRE(problem_by_id("bulk").kind == ProblemKind::bulk);
  REQUIRE(problem_by_id("coupled").kind == ProblemKind::coupled);
  REQUIRE_THROWS_AS(problem_by_id("plate"), ConfigError);
}
