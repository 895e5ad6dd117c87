#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evolfem/assembly.hpp"
#include "evolfem/fespace.hpp"
#include "evolfem/mesh.hpp"
#include "evolfem/problems.hpp"
#include "evolfem/solver.hpp"
#include "evolfem/types.hpp"

namespace evolfem {

inline constexpr const char* kVersion = "v0.1.0";
inline constexpr const char* kSchemeId = "conservative-IE";

enum class ReportFormat { table, csv, json };

struct StudyConfig {
  std::string problem = "surface";
  int order = 1;
  int min_level = 0;
  int max_level = 0;
  double tau0 = 1.0;
  double final_time = 1.0;
  LinearSolverConfig solver;
  int quadrature_degree = 0;  // 0 selects the 2k+2 default
  ReportFormat format = ReportFormat::table;
  std::string output_path;  // empty writes to stdout
  int vtk_every = 0;        // 0 disables snapshots
  int threads = 1;
};

struct LevelResult {
  int level = 0;
  double h = 0.0;
  double tau = 0.0;
  int steps = 0;
  int dofs = 0;
  std::optional<double> err_bulk;
  std::optional<double> err_surf;
  std::optional<double> eoc_bulk;
  std::optional<double> eoc_surf;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
  long gmres_iterations = 0;
  bool failed = false;
  std::string failure;

  friend bool operator==(const LevelResult&, const LevelResult&) = default;
};

struct ConvergenceReport {
  std::string problem;
  int order = 0;
  std::string scheme = kSchemeId;
  int quadrature_degree = 0;
  std::string version = kVersion;
  std::string timestamp;
  std::vector<LevelResult> levels;

  friend bool operator==(const ConvergenceReport&, const ConvergenceReport&) = default;
};

// L2 distance on the discrete domain between the coefficient field and the
// smooth ambient exact field, both evaluated at the physical quadrature
// points. The gap to a lifted comparison is the geometric consistency error,
// one order above the discretization error.
inline double l2_error_at_final_time(const EvolvingSpace& space, const std::vector<double>& alpha,
                                     const AmbientField& exact, double t,
                                     int quadrature_degree = 0) {
  if (int(alpha.size()) != space.dof_count)
    throw UsageError("l2_error_at_final_time: coefficient count does not match the space");
  const QuadratureRule rule =
      make_quadrature(space.mesh.simplex_dim, quadrature_degree > 0
                                                  ? quadrature_degree
                                                  : default_quadrature_degree(space.order));
  const ReferenceTables tables = tabulate_reference(space.reference, rule);
  const std::vector<Vec3> positions = node_positions_at(space, t);

  double acc = 0.0;
  for (std::size_t e = 0; e < space.mesh.simplices.size(); ++e) {
    const ElementGeometry geo = element_geometry(space, int(e), positions, rule, tables);
    const auto& dofs = space.element_dof_map[e];
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      double discrete = 0.0;
      for (std::size_t i = 0; i < dofs.size(); ++i)
        discrete += tables.values[q][i] * alpha[dofs[i]];
      const double diff = discrete - exact.value(geo.position[q], t);
      acc += rule.weights[q] * geo.sqrt_g[q] * diff * diff;
    }
  }
  return std::sqrt(acc);
}

// Coupled variant on the stacked [bulk | surface] coefficient layout.
inline std::pair<double, double> l2_error_at_final_time(
    const EvolvingSpace& bulk, const EvolvingSpace& surface, const std::vector<double>& stacked,
    const AmbientField& exact_bulk, const AmbientField& exact_surface, double t,
    int quadrature_degree = 0) {
  if (int(stacked.size()) != bulk.dof_count + surface.dof_count)
    throw UsageError("l2_error_at_final_time: stacked coefficients do not match the spaces");
  const std::vector<double> alpha(stacked.begin(), stacked.begin() + bulk.dof_count);
  const std::vector<double> beta(stacked.begin() + bulk.dof_count, stacked.end());
  return {l2_error_at_final_time(bulk, alpha, exact_bulk, t, quadrature_degree),
          l2_error_at_final_time(surface, beta, exact_surface, t, quadrature_degree)};
}

namespace detail {

inline std::optional<double> pair_eoc(double e_prev, double e_cur, double h_prev, double h_cur) {
  if (!(e_prev > 0.0) || !(e_cur > 0.0) || !(h_prev > 0.0) || !(h_cur > 0.0) || h_prev == h_cur)
    return std::nullopt;
  return std::log(e_cur / e_prev) / std::log(h_cur / h_prev);
}

}  // namespace detail

// eoc_j = log(E_j / E_{j-1}) / log(h_j / h_{j-1}); non-positive entries yield
// the undefined marker instead of an exception so reports can still print.
inline std::vector<std::optional<double>> compute_eoc(const std::vector<double>& errors,
                                                      const std::vector<double>& hs) {
  if (errors.size() != hs.size() || errors.size() < 2)
    throw UsageError("compute_eoc: need two sequences of equal length at least 2");
  std::vector<std::optional<double>> eoc(errors.size() - 1);
  for (std::size_t j = 1; j < errors.size(); ++j)
    eoc[j - 1] = detail::pair_eoc(errors[j - 1], errors[j], hs[j - 1], hs[j]);
  return eoc;
}

inline std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

namespace detail {

inline std::string vtk_basename(const StudyConfig& cfg) {
  if (cfg.output_path.empty()) return "evolfem";
  const std::size_t dot = cfg.output_path.find_last_of('.');
  const std::size_t slash = cfg.output_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return cfg.output_path;
  return cfg.output_path.substr(0, dot);
}

inline std::string vtk_path(const std::string& base, int level, int step,
                            const char* suffix = "") {
  char name[64];
  std::snprintf(name, sizeof name, "_L%d%s_%04d.vtk", level, suffix, step);
  return base + name;
}

}  // namespace detail

// Refinement loop: level j runs on j uniform refinements of the macro mesh
// with tau_j = tau0 * 2^{-(k+1)j}, so the expected h^{k+1} and tau rates
// match. Solver failures mark the level and the study continues.
inline ConvergenceReport run_study(const StudyConfig& cfg) {
  if (cfg.min_level < 0 || cfg.min_level > cfg.max_level)
    throw ConfigError("run_study: need 0 <= min_level <= max_level");
  if (!(cfg.tau0 > 0.0)) throw ConfigError("run_study: tau0 must be positive");
  if (!(cfg.final_time > 0.0)) throw ConfigError("run_study: final_time must be positive");
  if (cfg.threads < 1) throw ConfigError("run_study: threads must be at least 1");
  if (cfg.vtk_every < 0) throw ConfigError("run_study: vtk_every must be non-negative");

  const ProblemDefinition def = problem_by_id(cfg.problem);
  if (std::find(def.supported_orders.begin(), def.supported_orders.end(), cfg.order) ==
      def.supported_orders.end())
    throw ConfigError("run_study: order " + std::to_string(cfg.order) +
                      " is not supported by problem '" + cfg.problem + "'");

  ConvergenceReport report;
  report.problem = cfg.problem;
  report.order = cfg.order;
  report.quadrature_degree =
      cfg.quadrature_degree > 0 ? cfg.quadrature_degree : default_quadrature_degree(cfg.order);
  report.timestamp = iso_timestamp();

  const std::string vtk_base = detail::vtk_basename(cfg);

  for (int level = cfg.min_level; level <= cfg.max_level; ++level) {
    LevelResult row;
    row.level = level;
    const double tau_nominal = cfg.tau0 * std::pow(2.0, -double((cfg.order + 1) * level));
    row.steps = std::max(1, int(std::lround(cfg.final_time / tau_nominal)));
    row.tau = cfg.final_time / row.steps;

    using clock = std::chrono::steady_clock;
    double assembly_seconds = 0.0;
    auto timed = [&assembly_seconds](SystemCallback inner) {
      return SystemCallback(
          [&assembly_seconds, inner](double t, SparseMatrix& M, SparseMatrix& S,
                                     std::vector<double>& r) {
            const auto start = clock::now();
            inner(t, M, S, r);
            assembly_seconds += std::chrono::duration<double>(clock::now() - start).count();
          });
    };

    try {
      StepperStats stats;
      if (def.kind == ProblemKind::coupled) {
        const SimplicialMesh bulk_mesh = ball_bulk_mesh(level);
        const BoundarySurface boundary = boundary_surface(bulk_mesh);
        const EvolvingSpace bulk = build_bulk_space(bulk_mesh, cfg.order, def.evolution);
        const EvolvingSpace surface =
            build_surface_space(boundary.mesh, cfg.order, def.evolution);
        const TraceMap trace = build_trace_map(bulk, surface, boundary);
        row.h = mesh_size(bulk_mesh).h_max;
        row.dofs = bulk.dof_count + surface.dof_count;

        const CoupledAssembler assembler(bulk, surface, trace, cfg.quadrature_degree,
                                         cfg.threads);
        const SystemCallback system = timed(make_system(assembler, def.data));
        std::vector<double> alpha0 = interpolate_nodal(bulk, def.data.solution, 0.0);
        const std::vector<double> beta0 =
            interpolate_nodal(surface, def.data.surface_solution, 0.0);
        alpha0.insert(alpha0.end(), beta0.begin(), beta0.end());

        const auto level_start = clock::now();
        TimeStepperState state = initial_state(system, std::move(alpha0));
        auto snapshot = [&](int step) {
          const std::vector<double> u(state.alpha.begin(),
                                      state.alpha.begin() + bulk.dof_count);
          const std::vector<double> v(state.alpha.begin() + bulk.dof_count, state.alpha.end());
          write_space_vtk(bulk, state.t, u, detail::vtk_path(vtk_base, level, step, "_bulk"));
          write_space_vtk(surface, state.t, v,
                          detail::vtk_path(vtk_base, level, step, "_surf"));
        };
        if (cfg.vtk_every > 0) snapshot(0);
        for (int n = 0; n < row.steps; ++n) {
          state = implicit_euler_step(system, std::move(state), row.tau, cfg.solver, &stats);
          if (cfg.vtk_every > 0 &&
              (state.step_index % cfg.vtk_every == 0 || n + 1 == row.steps))
            snapshot(state.step_index);
        }
        const double total = std::chrono::duration<double>(clock::now() - level_start).count();
        row.assembly_seconds = assembly_seconds;
        row.solve_seconds = std::max(0.0, total - assembly_seconds);
        row.gmres_iterations = stats.gmres_iterations;

        const auto errors = l2_error_at_final_time(bulk, surface, state.alpha,
                                                   def.data.solution, def.data.surface_solution,
                                                   cfg.final_time, cfg.quadrature_degree);
        row.err_bulk = errors.first;
        row.err_surf = errors.second;
      } else {
        const bool is_bulk = def.kind == ProblemKind::bulk;
        const SimplicialMesh mesh =
            is_bulk ? ball_bulk_mesh(level) : sphere_surface_mesh(level);
        const EvolvingSpace space = is_bulk
                                        ? build_bulk_space(mesh, cfg.order, def.evolution)
                                        : build_surface_space(mesh, cfg.order, def.evolution);
        row.h = mesh_size(mesh).h_max;
        row.dofs = space.dof_count;

        const Assembler assembler(space, cfg.quadrature_degree, cfg.threads);
        const SystemCallback system =
            timed(make_system(assembler, def.data.coefficients, def.data.solution));

        const auto level_start = clock::now();
        TimeStepperState state =
            initial_state(system, interpolate_nodal(space, def.data.solution, 0.0));
        if (cfg.vtk_every > 0)
          write_space_vtk(space, state.t, state.alpha, detail::vtk_path(vtk_base, level, 0));
        for (int n = 0; n < row.steps; ++n) {
          state = implicit_euler_step(system, std::move(state), row.tau, cfg.solver, &stats);
          if (cfg.vtk_every > 0 &&
              (state.step_index % cfg.vtk_every == 0 || n + 1 == row.steps))
            write_space_vtk(space, state.t, state.alpha,
                            detail::vtk_path(vtk_base, level, state.step_index));
        }
        const double total = std::chrono::duration<double>(clock::now() - level_start).count();
        row.assembly_seconds = assembly_seconds;
        row.solve_seconds = std::max(0.0, total - assembly_seconds);
        row.gmres_iterations = stats.gmres_iterations;

        const double error = l2_error_at_final_time(space, state.alpha, def.data.solution,
                                                    cfg.final_time, cfg.quadrature_degree);
        if (is_bulk)
          row.err_bulk = error;
        else
          row.err_surf = error;
      }
    } catch (const SolverError& err) {
      row.failed = true;
      row.failure = err.what();
      row.err_bulk.reset();
      row.err_surf.reset();
    }
    report.levels.push_back(std::move(row));
  }

  for (std::size_t i = 1; i < report.levels.size(); ++i) {
    const LevelResult& prev = report.levels[i - 1];
    LevelResult& cur = report.levels[i];
    if (prev.err_bulk && cur.err_bulk)
      cur.eoc_bulk = detail::pair_eoc(*prev.err_bulk, *cur.err_bulk, prev.h, cur.h);
    if (prev.err_surf && cur.err_surf)
      cur.eoc_surf = detail::pair_eoc(*prev.err_surf, *cur.err_surf, prev.h, cur.h);
  }
  return report;
}

namespace detail {

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Fixed column set regardless of problem kind; absent quantities stay empty.
inline std::string render_csv(const ConvergenceReport& report) {
  std::string out = "level,h,tau,steps,dofs,err_bulk,err_surf,eoc_bulk,eoc_surf,assembly_s,"
                    "solve_s,gmres_iters\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? detail::format_g17(*v) : std::string();
  };
  for (const LevelResult& row : report.levels) {
    out += std::to_string(row.level) + ',' + detail::format_g17(row.h) + ',' +
           detail::format_g17(row.tau) + ',' + std::to_string(row.steps) + ',' +
           std::to_string(row.dofs) + ',' + cell(row.err_bulk) + ',' + cell(row.err_surf) + ',' +
           cell(row.eoc_bulk) + ',' + cell(row.eoc_surf) + ',' +
           detail::format_g17(row.assembly_seconds) + ',' +
           detail::format_g17(row.solve_seconds) + ',' + std::to_string(row.gmres_iterations) +
           '\n';
  }
  return out;
}

inline std::string render_table(const ConvergenceReport& report) {
  const bool bulk_column = report.problem != "surface";
  const bool surf_column = report.problem != "bulk";
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line,
                "# problem=%s order=%d scheme=%s quadrature=%d version=%s timestamp=%s\n",
                report.problem.c_str(), report.order, report.scheme.c_str(),
                report.quadrature_degree, report.version.c_str(), report.timestamp.c_str());
  out += line;

  std::snprintf(line, sizeof line, "%5s %12s %12s %6s %8s", "level", "h", "tau", "steps", "dofs");
  out += line;
  if (bulk_column) {
    std::snprintf(line, sizeof line, " %13s %9s", "err_bulk", "eoc");
    out += line;
  }
  if (surf_column) {
    std::snprintf(line, sizeof line, " %13s %9s", "err_surf", "eoc");
    out += line;
  }
  out += '\n';

  auto error_cells = [&](const std::optional<double>& err, const std::optional<double>& eoc,
                         bool failed) {
    std::string cells;
    char buf[64];
    if (err)
      std::snprintf(buf, sizeof buf, " %13.5e", *err);
    else
      std::snprintf(buf, sizeof buf, " %13s", failed ? "failed" : "");
    cells += buf;
    if (eoc)
      std::snprintf(buf, sizeof buf, " %9.5f", *eoc);
    else
      std::snprintf(buf, sizeof buf, " %9s", "---");
    cells += buf;
    return cells;
  };

  for (const LevelResult& row : report.levels) {
    std::snprintf(line, sizeof line, "%5d %12.5e %12.5e %6d %8d", row.level, row.h, row.tau,
                  row.steps, row.dofs);
    out += line;
    if (bulk_column) out += error_cells(row.err_bulk, row.eoc_bulk, row.failed);
    if (surf_column) out += error_cells(row.err_surf, row.eoc_surf, row.failed);
    out += '\n';
  }
  return out;
}

inline nlohmann::json report_to_json(const ConvergenceReport& report) {
  nlohmann::json j;
  j["metadata"] = {{"problem", report.problem},
                   {"order", report.order},
                   {"scheme", report.scheme},
                   {"quadrature_degree", report.quadrature_degree},
                   {"version", report.version},
                   {"timestamp", report.timestamp}};
  j["levels"] = nlohmann::json::array();
  auto cell = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  for (const LevelResult& row : report.levels) {
    j["levels"].push_back({{"level", row.level},
                           {"h", row.h},
                           {"tau", row.tau},
                           {"steps", row.steps},
                           {"dofs", row.dofs},
                           {"err_bulk", cell(row.err_bulk)},
                           {"err_surf", cell(row.err_surf)},
                           {"eoc_bulk", cell(row.eoc_bulk)},
                           {"eoc_surf", cell(row.eoc_surf)},
                           {"assembly_s", row.assembly_seconds},
                           {"solve_s", row.solve_seconds},
                           {"gmres_iters", row.gmres_iterations},
                           {"failed", row.failed},
                           {"failure", row.failure}});
  }
  return j;
}

inline ConvergenceReport report_from_json(const nlohmann::json& j) {
  ConvergenceReport report;
  const nlohmann::json& meta = j.at("metadata");
  report.problem = meta.at("problem").get<std::string>();
  report.order = meta.at("order").get<int>();
  report.scheme = meta.at("scheme").get<std::string>();
  report.quadrature_degree = meta.at("quadrature_degree").get<int>();
  report.version = meta.at("version").get<std::string>();
  report.timestamp = meta.at("timestamp").get<std::string>();
  auto cell = [](const nlohmann::json& v) {
    return v.is_null() ? std::optional<double>() : std::optional<double>(v.get<double>());
  };
  for (const nlohmann::json& r : j.at("levels")) {
    LevelResult row;
    row.level = r.at("level").get<int>();
    row.h = r.at("h").get<double>();
    row.tau = r.at("tau").get<double>();
    row.steps = r.at("steps").get<int>();
    row.dofs = r.at("dofs").get<int>();
    row.err_bulk = cell(r.at("err_bulk"));
    row.err_surf = cell(r.at("err_surf"));
    row.eoc_bulk = cell(r.at("eoc_bulk"));
    row.eoc_surf = cell(r.at("eoc_surf"));
    row.assembly_seconds = r.at("assembly_s").get<double>();
    row.solve_seconds = r.at("solve_s").get<double>();
    row.gmres_iterations = r.at("gmres_iters").get<long>();
    row.failed = r.at("failed").get<bool>();
    row.failure = r.at("failure").get<std::string>();
    report.levels.push_back(std::move(row));
  }
  return report;
}

inline void emit_report(const ConvergenceReport& report, ReportFormat format,
                        const std::string& path) {
  std::string body;
  switch (format) {
    case ReportFormat::table: body = render_table(report); break;
    case ReportFormat::csv: body = render_csv(report); break;
    case ReportFormat::json: body = report_to_json(report).dump(2) + '\n'; break;
  }
  if (path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("emit_report: cannot open '" + path + "'");
  out << body;
  if (!out) throw IoError("emit_report: write failed for '" + path + "'");
}

}  // namespace evolfem
