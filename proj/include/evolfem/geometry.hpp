#pragma once

// The prescribed evolving test domain: the unit ball/sphere carried into an
// anisotropically scaled ellipsoid by the closed-form flow
//   G(x,t) = (a(t)^{1/2} x1, x2, x3),   a(t) = 1 + amplitude * sin(t),
// together with an ambient-calculus evaluator for exact fields (tangential
// gradients, material derivatives, velocity divergences). Everything is a
// pure function of (x,t); the moving surface is the zero set of
//   psi(x,t) = x1^2/a(t) + x2^2 + x3^2 - 1.

#include <cmath>
#include <functional>

#include "evolfem/types.hpp"

namespace evolfem {

// Scalar field with hand-coded derivatives; each instance is cross-validated
// against finite differences in the test suite.
struct AmbientField {
  std::function<double(const Vec3&, double)> value;
  std::function<Vec3(const Vec3&, double)> spatial_gradient;
  std::function<double(const Vec3&, double)> time_derivative;

  static AmbientField zero() {
    return {[](const Vec3&, double) { return 0.0; },
            [](const Vec3&, double) { return Vec3{}; },
            [](const Vec3&, double) { return 0.0; }};
  }
  static AmbientField constant(double c) {
    return {[c](const Vec3&, double) { return c; },
            [](const Vec3&, double) { return Vec3{}; },
            [](const Vec3&, double) { return 0.0; }};
  }
};

class DomainEvolution {
 public:
  // amplitude 0.25 is the benchmark flow; amplitude 0 freezes the geometry
  // (identity flow, zero velocity), which several tests rely on.
  explicit DomainEvolution(double amplitude = 0.25) : amplitude_(amplitude) {}

  static DomainEvolution stationary() { return DomainEvolution(0.0); }

  double scale(double t) const { return 1.0 + amplitude_ * std::sin(t); }
  double scale_rate(double t) const { return amplitude_ * std::cos(t); }

  Vec3 flow(const Vec3& x, double t) const {
    return {std::sqrt(scale(t)) * x.x, x.y, x.z};
  }

  // w(x,t) = d/dt G(G^{-1}(x,t), t); only the x1 component moves.
  Vec3 velocity(const Vec3& x, double t) const {
    return {scale_rate(t) * x.x / (2.0 * scale(t)), 0.0, 0.0};
  }

  // Spatial velocity gradient; w is linear in x1, so this is constant in x.
  Mat3 velocity_gradient(double t) const {
    Mat3 g;
    g(0, 0) = scale_rate(t) / (2.0 * scale(t));
    return g;
  }

  double level_set(const Vec3& x, double t) const {
    return x.x * x.x / scale(t) + x.y * x.y + x.z * x.z - 1.0;
  }

  Vec3 level_set_gradient(const Vec3& x, double t) const {
    return {2.0 * x.x / scale(t), 2.0 * x.y, 2.0 * x.z};
  }

  // Unit normal of the level set through x, defined ambiently; used for
  // tangential coefficient fields at quadrature points of the discrete
  // surface, which sit near but not exactly on Gamma(t).
  Vec3 ambient_normal(const Vec3& x, double t) const {
    return normalized(level_set_gradient(x, t));
  }

  // Outward unit normal of Gamma(t); requires the point to lie on Gamma(t).
  Vec3 outward_normal(const Vec3& x, double t) const {
    if (std::abs(level_set(x, t)) > 1e-8)
      throw DomainError("outward_normal: point is not on the moving surface");
    return ambient_normal(x, t);
  }

  // grad_Gamma f = (I - nu nu^T) grad f, evaluated with the ambient normal.
  Vec3 tangential_gradient(const AmbientField& f, const Vec3& x, double t) const {
    return tangential_gradient_ambient(f.spatial_gradient(x, t), x, t);
  }

  Vec3 tangential_gradient_ambient(const Vec3& grad, const Vec3& x, double t) const {
    Vec3 nu = ambient_normal(x, t);
    return grad - dot(grad, nu) * nu;
  }

  // div_Gamma w = div w - nu^T (grad w) nu.
  double tangential_divergence_velocity(const Vec3& x, double t) const {
    double dw = scale_rate(t) / (2.0 * scale(t));
    Vec3 nu = ambient_normal(x, t);
    return dw - dw * nu.x * nu.x;
  }

  double bulk_divergence_velocity(const Vec3&, double t) const {
    return scale_rate(t) / (2.0 * scale(t));
  }

  // Material derivative along the flow: d*f = dt f + w . grad f.
  double material_derivative(const AmbientField& f, const Vec3& x, double t) const {
    return f.time_derivative(x, t) + dot(velocity(x, t), f.spatial_gradient(x, t));
  }

  double amplitude() const { return amplitude_; }

 private:
  double amplitude_;
};

// Closest-point projection onto the initial surface Gamma_0 (the unit
// sphere): p(x,0) = x/|x| inside the narrow band where this is well defined.
inline Vec3 initial_surface_projection(const Vec3& x) {
  double r = norm(x);
  if (r <= 0.5) throw DomainError("initial_surface_projection: point too far from the sphere");
  return x / r;
}

}  // namespace evolfem
