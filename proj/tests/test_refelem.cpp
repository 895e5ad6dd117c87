#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "evolfem/refelem.hpp"
#include "support/oracles.hpp"

using namespace evolfem;

namespace {

// Supported (dim, order) pairs: triangles carry k up to 3, tets up to 2,
// intervals are kept through 3 for completeness of the reference module.
const std::vector<std::pair<int, int>> kSupported = {
    {1, 1}, {1, 2}, {1, 3}, {2, 1}, {2, 2}, {2, 3}, {3, 1}, {3, 2}};

Barycentric random_barycentric(int dim, std::mt19937& rng) {
  // Uniform on the simplex via normalized exponentials.
  std::uniform_real_distribution<double> unif(1e-3, 1.0);
  Barycentric p{};
  double sum = 0.0;
  for (int c = 0; c <= dim; ++c) {
    p[c] = -std::log(unif(rng));
    sum += p[c];
  }
  for (int c = 0; c <= dim; ++c) p[c] /= sum;
  return p;
}

}  // namespace

TEST_CASE("lattice node counts match C(dim+k,k)") {
  CHECK(make_reference(2, 1).basis_count == 3);
  CHECK(make_reference(2, 2).basis_count == 6);
  CHECK(make_reference(3, 2).basis_count == 10);
  CHECK(make_reference(1, 3).basis_count == 4);
  CHECK(make_reference(2, 3).basis_count == 10);
  CHECK(make_reference(3, 1).basis_count == 4);
}

TEST_CASE("order-1 nodes are the simplex vertices in vertex order") {
  auto elem = make_reference(2, 1);
  REQUIRE(elem.nodes.size() == 3);
  for (int i = 0; i < 3; ++i) {
    for (int c = 0; c <= 2; ++c) CHECK(elem.nodes[i][c] == (c == i ? 1.0 : 0.0));
  }
}

TEST_CASE("node tuples are valid barycentric coordinates and pairwise distinct") {
  for (auto [dim, order] : kSupported) {
    auto elem = make_reference(dim, order);
    for (const auto& node : elem.nodes) {
      double sum = 0.0;
      for (int c = 0; c <= dim; ++c) {
        CHECK(node[c] >= 0.0);
        CHECK(node[c] <= 1.0);
        sum += node[c];
      }
      CHECK(sum == Catch::Approx(1.0).margin(1e-15));
    }
    for (size_t i = 0; i < elem.nodes.size(); ++i) {
      for (size_t j = i + 1; j < elem.nodes.size(); ++j) {
        double dist = 0.0;
        for (int c = 0; c <= dim; ++c) dist += std::abs(elem.nodes[i][c] - elem.nodes[j][c]);
        CHECK(dist > 1e-12);
      }
    }
  }
}

TEST_CASE("nodal property: chi_i(node_j) = delta_ij") {
  for (auto [dim, order] : kSupported) {
    auto elem = make_reference(dim, order);
    for (int j = 0; j < elem.basis_count; ++j) {
      auto values = elem.eval_basis(elem.nodes[j]);
      for (int i = 0; i < elem.basis_count; ++i) {
        CHECK(values[i] == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-13));
      }
    }
  }
}

TEST_CASE("partition of unity at 1000 random points per element") {
  std::mt19937 rng(2026);
  for (auto [dim, order] : kSupported) {
    auto elem = make_reference(dim, order);
    for (int trial = 0; trial < 1000; ++trial) {
      auto p = random_barycentric(dim, rng);
      auto values = elem.eval_basis(p);
      double sum = 0.0;
      for (double v : values) sum += v;
      REQUIRE(std::abs(sum - 1.0) <= 1e-13);
    }
  }
}

TEST_CASE("gradient rows sum to zero") {
  std::mt19937 rng(7);
  for (auto [dim, order] : kSupported) {
    auto elem = make_reference(dim, order);
    for (int trial = 0; trial < 50; ++trial) {
      auto grads = elem.eval_basis_gradients(random_barycentric(dim, rng));
      for (int j = 0; j < dim; ++j) {
        double sum = 0.0;
        for (const auto& g : grads) sum += g[j];
        REQUIRE(std::abs(sum) <= 1e-12);
      }
    }
  }
}

TEST_CASE("gradients match central finite differences of eval_basis") {
  std::mt19937 rng(11);
  for (auto [dim, order] : kSupported) {
    auto elem = make_reference(dim, order);
    for (int trial = 0; trial < 20; ++trial) {
      // Interior point so the difference stencil stays inside the simplex.
      Barycentric p = random_barycentric(dim, rng);
      for (int c = 0; c <= dim; ++c) p[c] = 0.2 / (dim + 1) + 0.8 * p[c];
      double shrink = 0.0;
      for (int c = 0; c <= dim; ++c) shrink += p[c];
      for (int c = 0; c <= dim; ++c) p[c] /= shrink;
      auto grads = elem.eval_basis_gradients(p);
      for (int i = 0; i < elem.basis_count; ++i) {
        for (int j = 1; j <= dim; ++j) {
          auto along = [&](double s) {
            Barycentric q = p;
            q[j] += s;
            q[0] -= s;  // moving coordinate j trades mass with lambda_0
            return elem.eval_basis(q)[i];
          };
          double fd = oracles::central_difference([&](double s) { return along(s); }, 0.0);
          REQUIRE(std::abs(fd - grads[i][j - 1]) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("P1 triangle gradients are the frozen reference values") {
  auto elem = make_reference(2, 1);
  auto grads = elem.eval_basis_gradients({0.4, 0.3, 0.3, 0.0});
  CHECK(grads[0][0] == Catch::Approx(-1.0));
  CHECK(grads[0][1] == Catch::Approx(-1.0));
  CHECK(grads[1][0] == Catch::Approx(1.0));
  CHECK(grads[1][1] == Catch::Approx(0.0).margin(1e-15));
  CHECK(grads[2][0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(grads[2][1] == Catch::Approx(1.0));
}

TEST_CASE("P2 interval: middle shape function has zero slope at the midpoint") {
  auto elem = make_reference(1, 2);
  // Descending lexicographic order puts the midpoint node second.
  CHECK(elem.nodes[1][0] == Catch::Approx(0.5));
  auto grads = elem.eval_basis_gradients({0.5, 0.5, 0.0, 0.0});
  CHECK(std::abs(grads[1][0]) <= 1e-13);
  auto values = elem.eval_basis({0.25, 0.75, 0.0, 0.0});
  CHECK(values[1] == Catch::Approx(4.0 * 0.75 * 0.25));  // 4 x (1-x)
}

TEST_CASE("unsupported reference element parameters are rejected") {
  CHECK_THROWS_AS(make_reference(0, 1), ConfigError);
  CHECK_THROWS_AS(make_reference(4, 1), ConfigError);
  CHECK_THROWS_AS(make_reference(2, 0), ConfigError);
  CHECK_THROWS_AS(make_reference(2, 4), ConfigError);
}

TEST_CASE("quadrature weights sum to the reference simplex volume") {
  for (int degree = 1; degree <= 12; ++degree) {
    for (int dim = 1; dim <= 3; ++dim) {
      auto rule = make_quadrature(dim, degree);
      double sum = 0.0;
      for (double w : rule.weights) {
        CHECK(w > 0.0);
        sum += w;
      }
      double volume = dim == 1 ? 1.0 : (dim == 2 ? 0.5 : 1.0 / 6.0);
      REQUIRE(std::abs(sum - volume) <= 1e-14);
    }
  }
}

TEST_CASE("quadrature integrates all monomials up to its degree exactly") {
  for (int dim = 1; dim <= 3; ++dim) {
    for (int degree = 1; degree <= 12; ++degree) {
      auto rule = make_quadrature(dim, degree);
      std::vector<int> a(dim, 0);
      // Enumerate exponent tuples with |a| <= degree.
      auto next = [&]() {
        int total = 0;
        for (int v : a) total += v;
        for (int i = dim - 1; i >= 0; --i) {
          if (total < degree) {
            a[i] += 1;
            return true;
          }
          total -= a[i];
          a[i] = 0;
        }
        return false;
      };
      bool more = true;
      while (more) {
        double exact = oracles::simplex_monomial_integral(a);
        double approx = 0.0;
        for (size_t q = 0; q < rule.points.size(); ++q) {
          double term = rule.weights[q];
          for (int i = 0; i < dim; ++i) term *= std::pow(rule.points[q][i + 1], a[i]);
          approx += term;
        }
        REQUIRE(std::abs(approx - exact) <= 1e-13 * std::max(1.0, std::abs(exact)));
        more = next();
      }
    }
  }
}

TEST_CASE("frozen quadrature spot values") {
  auto tri = make_quadrature(2, 2);
  double linear = 0.0;
  for (size_t q = 0; q < tri.points.size(); ++q) linear += tri.weights[q] * tri.points[q][1];
  CHECK(linear == Catch::Approx(1.0 / 6.0));  // int_T x over the unit triangle
  auto tet = make_quadrature(3, 1);
  double volume = 0.0;
  for (double w : tet.weights) volume += w;
  CHECK(volume == Catch::Approx(1.0 / 6.0));
}

TEST_CASE("unsupported quadrature parameters are rejected") {
  CHECK_THROWS_AS(make_quadrature(2, 13), ConfigError);
  CHECK_THROWS_AS(make_quadrature(0, 2), ConfigError);
  CHECK_THROWS_AS(make_quadrature(2, -1), ConfigError);
}
