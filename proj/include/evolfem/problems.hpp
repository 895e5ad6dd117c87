#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "evolfem/assembly.hpp"
#include "evolfem/geometry.hpp"
#include "evolfem/types.hpp"

namespace evolfem {

enum class ProblemKind { surface, bulk, coupled };

// Self-contained benchmark definition: evolution, coefficients, exact
// solution(s), coupling constants, horizon. Single-domain problems keep their
// data in solution/coefficients; the coupled problem additionally fills the
// surface fields.
struct ProblemDefinition {
  std::string id;
  ProblemKind kind = ProblemKind::surface;
  DomainEvolution evolution;
  ManufacturedData data;
  double final_time = 1.0;
  std::vector<int> supported_orders;
};

namespace detail {

inline AmbientField product_field_yz() {
  AmbientField f;
  f.value = [](const Vec3& x, double t) { return std::sin(t) * x.y * x.z; };
  f.spatial_gradient = [](const Vec3& x, double t) {
    return Vec3{0.0, std::sin(t) * x.z, std::sin(t) * x.y};
  };
  f.time_derivative = [](const Vec3& x, double t) { return std::cos(t) * x.y * x.z; };
  return f;
}

}  // namespace detail

// Evolving surface benchmark: anisotropic diffusion in x1, tangentially
// projected constant drift, bounded reaction, u = sin(t) x2 x3.
inline ProblemDefinition surface_problem() {
  ProblemDefinition def;
  def.id = "surface";
  def.kind = ProblemKind::surface;
  def.supported_orders = {1, 2, 3};

  def.data.coefficients.A = [](const Vec3& x, double, const Vec3&) {
    return Mat3::scaled_identity(1.0 + x.x * x.x);
  };
  def.data.coefficients.b = [](const Vec3&, double, const Vec3& nu) {
    const Vec3 b0{1.0, 2.0, 0.0};
    return b0 - dot(b0, nu) * nu;
  };
  def.data.coefficients.c = [](const Vec3& x, double) { return std::sin(x.x * x.y); };
  def.data.solution = detail::product_field_yz();
  return def;
}

// Evolving bulk benchmark: the same diffusion profile, unprojected drift,
// u = sin(t) cos(pi x1) cos(pi x2). The Neumann datum induced by the exact
// solution is absorbed by the weak residual functional.
inline ProblemDefinition bulk_problem() {
  ProblemDefinition def;
  def.id = "bulk";
  def.kind = ProblemKind::bulk;
  def.supported_orders = {1, 2};

  def.data.coefficients.A = [](const Vec3& x, double, const Vec3&) {
    return Mat3::scaled_identity(1.0 + x.x * x.x);
  };
  def.data.coefficients.b = [](const Vec3&, double, const Vec3&) { return Vec3{1.0, 2.0, 0.0}; };
  def.data.coefficients.c = [](const Vec3& x, double) { return std::cos(x.x * x.y); };

  const double pi = 3.14159265358979323846;
  def.data.solution.value = [pi](const Vec3& x, double t) {
    return std::sin(t) * std::cos(pi * x.x) * std::cos(pi * x.y);
  };
  def.data.solution.spatial_gradient = [pi](const Vec3& x, double t) {
    return Vec3{-pi * std::sin(t) * std::sin(pi * x.x) * std::cos(pi * x.y),
                -pi * std::sin(t) * std::cos(pi * x.x) * std::sin(pi * x.y), 0.0};
  };
  def.data.solution.time_derivative = [pi](const Vec3& x, double t) {
    return std::cos(t) * std::cos(pi * x.x) * std::cos(pi * x.y);
  };
  return def;
}

// Coupled bulk-surface benchmark: pure diffusion with unit exchange
// constants, u = sin(t) x1 x2 in the bulk, v = sin(t) x2 x3 on the surface.
inline ProblemDefinition coupled_problem() {
  ProblemDefinition def;
  def.id = "coupled";
  def.kind = ProblemKind::coupled;
  def.supported_orders = {1, 2};
  def.data.alpha = 1.0;
  def.data.beta = 1.0;

  def.data.coefficients = CoefficientSet::identity();
  def.data.solution.value = [](const Vec3& x, double t) { return std::sin(t) * x.x * x.y; };
  def.data.solution.spatial_gradient = [](const Vec3& x, double t) {
    return Vec3{std::sin(t) * x.y, std::sin(t) * x.x, 0.0};
  };
  def.data.solution.time_derivative = [](const Vec3& x, double t) {
    return std::cos(t) * x.x * x.y;
  };

  def.data.surface_coefficients = CoefficientSet::identity();
  def.data.surface_solution = detail::product_field_yz();
  return def;
}

inline ProblemDefinition problem_by_id(const std::string& id) {
  if (id == "surface") return surface_problem();
  if (id == "bulk") return bulk_problem();
  if (id == "coupled") return coupled_problem();
  throw ConfigError("problem_by_id: unknown problem '" + id + "'");
}

}  // namespace evolfem
