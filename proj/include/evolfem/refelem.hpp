#pragma once

// Reference simplices: Lagrange lattices of order k, their shape functions,
// and quadrature rules on the unit interval/triangle/tetrahedron. This is the
// only place polynomial bases are defined; everything downstream consumes
// basis values and reference gradients evaluated here.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "evolfem/types.hpp"

namespace evolfem {

// Barycentric tuple; entries 0..dim are used, the rest stay zero.
using Barycentric = std::array<double, 4>;

// Multi-index over barycentric coordinates, |m| = order.
using LatticeIndex = std::array<int, 4>;

namespace detail {

// One-dimensional Lagrange factor P_m(t) = prod_{r<m} (k t - r)/(m - r)
// and its derivative with respect to t.
inline double lattice_factor(int k, int m, double t) {
  double p = 1.0;
  for (int r = 0; r < m; ++r) p *= (k * t - r) / double(m - r);
  return p;
}

inline double lattice_factor_derivative(int k, int m, double t) {
  double sum = 0.0;
  for (int s = 0; s < m; ++s) {
    double term = double(k) / double(m - s);
    for (int r = 0; r < m; ++r) {
      if (r == s) continue;
      term *= (k * t - r) / double(m - r);
    }
    sum += term;
  }
  return sum;
}

}  // namespace detail

struct ReferenceElement {
  int dim = 0;
  int order = 0;
  int basis_count = 0;
  // Lattice multi-indices in descending lexicographic order over
  // (m_0, ..., m_dim); node i of an order-1 element is vertex i.
  std::vector<LatticeIndex> multi_indices;
  // Lattice points m/k as barycentric tuples.
  std::vector<Barycentric> nodes;

  // Shape function values (chi_1(p), ..., chi_N(p)); partition of unity.
  std::vector<double> eval_basis(const Barycentric& p) const {
    std::vector<double> values(basis_count);
    for (int i = 0; i < basis_count; ++i) {
      double v = 1.0;
      for (int c = 0; c <= dim; ++c) v *= detail::lattice_factor(order, multi_indices[i][c], p[c]);
      values[i] = v;
    }
    return values;
  }

  // Gradients with respect to the dim reference coordinates x_j = lambda_j
  // (j = 1..dim, lambda_0 = 1 - sum). Rows sum to zero.
  std::vector<std::array<double, 3>> eval_basis_gradients(const Barycentric& p) const {
    std::vector<std::array<double, 3>> grads(basis_count, {0.0, 0.0, 0.0});
    std::array<double, 4> factor{}, dfactor{};
    for (int i = 0; i < basis_count; ++i) {
      for (int c = 0; c <= dim; ++c) {
        factor[c] = detail::lattice_factor(order, multi_indices[i][c], p[c]);
        dfactor[c] = detail::lattice_factor_derivative(order, multi_indices[i][c], p[c]);
      }
      std::array<double, 4> partial{};  // d chi / d lambda_c
      for (int c = 0; c <= dim; ++c) {
        double v = dfactor[c];
        for (int l = 0; l <= dim; ++l) {
          if (l == c) continue;
          v *= factor[l];
        }
        partial[c] = v;
      }
      for (int j = 1; j <= dim; ++j) grads[i][j - 1] = partial[j] - partial[0];
    }
    return grads;
  }
};

inline ReferenceElement make_reference(int dim, int order) {
  if (dim < 1 || dim > 3) throw ConfigError("make_reference: dim must be 1, 2 or 3");
  if (order < 1 || order > 3) throw ConfigError("make_reference: order must be 1, 2 or 3");
  ReferenceElement elem;
  elem.dim = dim;
  elem.order = order;
  // Enumerate |m| = order with m_0 first, descending lexicographically.
  LatticeIndex m{};
  auto recurse = [&](auto&& self, int coord, int rest) -> void {
    if (coord == dim) {
      m[coord] = rest;
      elem.multi_indices.push_back(m);
      return;
    }
    for (int v = rest; v >= 0; --v) {
      m[coord] = v;
      self(self, coord + 1, rest - v);
    }
  };
  recurse(recurse, 0, order);
  elem.basis_count = int(elem.multi_indices.size());
  elem.nodes.reserve(elem.basis_count);
  for (const auto& mi : elem.multi_indices) {
    Barycentric node{};
    for (int c = 0; c <= dim; ++c) node[c] = double(mi[c]) / double(order);
    elem.nodes.push_back(node);
  }
  return elem;
}

struct QuadratureRule {
  int dim = 0;
  int degree = 0;  // total polynomial degree integrated exactly
  std::vector<Barycentric> points;
  std::vector<double> weights;  // sum to the reference simplex volume
};

namespace detail {

// Gauss-Legendre nodes/weights on [0,1], exact through degree 2n-1.
// Newton iteration on the Legendre recurrence; deterministic to rounding.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= n; ++j) {
      double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = 0.5 * (1.0 - x);  // mirror so nodes ascend on [0,1]
    nodes[n - 1 - i] = 0.5 * (1.0 + x);
    weights[i] = 0.5 * w;
    weights[n - 1 - i] = 0.5 * w;
  }
}

}  // namespace detail

// Collapsed-coordinate Gauss product rules. The simplex is the image of the
// unit cube under the Duffy map; the map's polynomial Jacobian raises the
// required 1D degree per direction, accounted for below, so the rule is
// exact for all polynomials of total degree <= degree. Weights are positive.
inline QuadratureRule make_quadrature(int dim, int degree) {
  constexpr int kMaxDegree = 12;
  if (dim < 1 || dim > 3) throw ConfigError("make_quadrature: dim must be 1, 2 or 3");
  if (degree < 0 || degree > kMaxDegree)
    throw ConfigError("make_quadrature: degree must be in [0, 12]");
  if (degree == 0) degree = 1;

  QuadratureRule rule;
  rule.dim = dim;
  rule.degree = degree;
  auto points_for = [](int d) { return (d + 2) / 2; };  // ceil((d+1)/2)

  if (dim == 1) {
    std::vector<double> xs, ws;
    detail::gauss_legendre(points_for(degree), xs, ws);
    for (size_t i = 0; i < xs.size(); ++i) {
      rule.points.push_back({1.0 - xs[i], xs[i], 0.0, 0.0});
      rule.weights.push_back(ws[i]);
    }
  } else if (dim == 2) {
    std::vector<double> xu, wu, xv, wv;
    detail::gauss_legendre(points_for(degree + 1), xu, wu);
    detail::gauss_legendre(points_for(degree), xv, wv);
    for (size_t i = 0; i < xu.size(); ++i) {
      for (size_t j = 0; j < xv.size(); ++j) {
        const double x = xu[i];
        const double y = xv[j] * (1.0 - xu[i]);
        rule.points.push_back({1.0 - x - y, x, y, 0.0});
        rule.weights.push_back(wu[i] * wv[j] * (1.0 - xu[i]));
      }
    }
  } else {
    std::vector<double> xu, wu, xv, wv, xw, ww;
    detail::gauss_legendre(points_for(degree + 2), xu, wu);
    detail::gauss_legendre(points_for(degree + 1), xv, wv);
    detail::gauss_legendre(points_for(degree), xw, ww);
    for (size_t i = 0; i < xu.size(); ++i) {
      for (size_t j = 0; j < xv.size(); ++j) {
        for (size_t l = 0; l < xw.size(); ++l) {
          const double x = xu[i];
          const double y = xv[j] * (1.0 - xu[i]);
          const double z = xw[l] * (1.0 - xu[i]) * (1.0 - xv[j]);
          rule.points.push_back({1.0 - x - y - z, x, y, z});
          rule.weights.push_back(wu[i] * wv[j] * ww[l] * (1.0 - xu[i]) * (1.0 - xu[i]) *
                                 (1.0 - xv[j]));
        }
      }
    }
  }
  return rule;
}

// Default assembly quadrature degree for an order-k space.
inline int default_quadrature_degree(int order) { return 2 * order + 2; }

}  // namespace evolfem
