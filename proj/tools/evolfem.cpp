// Convergence-study CLI: wires a StudyConfig from flags and an optional
// key = value config file, runs the refinement loop, emits the report.
// Exit codes: 0 success, 1 invalid configuration, 2 at least one level failed.
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "evolfem/harness.hpp"

namespace {

std::string trim(const std::string& s) {
  const std::size_t first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const std::size_t last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// key = value lines; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw evolfem::ConfigError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw evolfem::ConfigError("config file line " + std::to_string(lineno) +
                                 " is not 'key = value'");
    pairs[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return pairs;
}

template <typename T>
void parse_value(const std::string& key, const std::string& value, T& out) {
  std::istringstream stream(value);
  if (!(stream >> out))
    throw evolfem::ConfigError("config value for '" + key + "' is not valid: '" + value + "'");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace evolfem;
  CLI::App app{"Convergence studies for parabolic equations on evolving domains"};

  std::string problem;
  std::string format = "table";
  std::string out_path;
  std::string config_path;
  int order = 0;
  int min_level = -1;
  int max_level = -1;
  int quad_degree = 0;
  int vtk_every = 0;
  int threads = 1;
  double tau0 = 1.0;
  double final_time = 1.0;
  double solver_tol = 1e-10;

  app.add_option("--problem", problem, "Problem id: surface | bulk | coupled");
  app.add_option("--order", order, "Isoparametric polynomial order k");
  app.add_option("--min-level", min_level, "Coarsest refinement level");
  app.add_option("--max-level", max_level, "Finest refinement level");
  app.add_option("--tau0", tau0, "Base time step (default 1.0)");
  app.add_option("--final-time", final_time, "Time horizon T (default 1.0)");
  app.add_option("--solver-tol", solver_tol, "GMRES relative tolerance (default 1e-10)");
  app.add_option("--quad-degree", quad_degree, "Quadrature degree override (default 2k+2)");
  app.add_option("--format", format, "Report format: table | csv | json");
  app.add_option("--out", out_path, "Report path (default stdout)");
  app.add_option("--vtk-every", vtk_every, "Write VTK snapshots every N steps");
  app.add_option("--threads", threads, "Assembly threads (default 1)");
  app.add_option("--config", config_path, "key = value file; explicit flags take precedence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (!config_path.empty()) {
      const auto unset = [&](const char* flag) { return app.count(flag) == 0; };
      for (const auto& [key, value] : read_config_file(config_path)) {
        if (key == "problem") {
          if (unset("--problem")) problem = value;
        } else if (key == "order") {
          if (unset("--order")) parse_value(key, value, order);
        } else if (key == "min-level") {
          if (unset("--min-level")) parse_value(key, value, min_level);
        } else if (key == "max-level") {
          if (unset("--max-level")) parse_value(key, value, max_level);
        } else if (key == "tau0") {
          if (unset("--tau0")) parse_value(key, value, tau0);
        } else if (key == "final-time") {
          if (unset("--final-time")) parse_value(key, value, final_time);
        } else if (key == "solver-tol") {
          if (unset("--solver-tol")) parse_value(key, value, solver_tol);
        } else if (key == "quad-degree") {
          if (unset("--quad-degree")) parse_value(key, value, quad_degree);
        } else if (key == "format") {
          if (unset("--format")) format = value;
        } else if (key == "out") {
          if (unset("--out")) out_path = value;
        } else if (key == "vtk-every") {
          if (unset("--vtk-every")) parse_value(key, value, vtk_every);
        } else if (key == "threads") {
          if (unset("--threads")) parse_value(key, value, threads);
        } else {
          throw ConfigError("unknown config key '" + key + "'");
        }
      }
    }

    if (problem.empty()) throw ConfigError("missing --problem");
    if (order <= 0) throw ConfigError("missing or invalid --order");
    if (min_level < 0) throw ConfigError("missing or invalid --min-level");
    if (max_level < 0) throw ConfigError("missing or invalid --max-level");

    StudyConfig cfg;
    cfg.problem = problem;
    cfg.order = order;
    cfg.min_level = min_level;
    cfg.max_level = max_level;
    cfg.tau0 = tau0;
    cfg.final_time = final_time;
    cfg.solver.relative_tolerance = solver_tol;
    cfg.quadrature_degree = quad_degree;
    cfg.output_path = out_path;
    cfg.vtk_every = vtk_every;
    cfg.threads = threads;
    if (format == "table") {
      cfg.format = ReportFormat::table;
    } else if (format == "csv") {
      cfg.format = ReportFormat::csv;
    } else if (format == "json") {
      cfg.format = ReportFormat::json;
    } else {
      throw ConfigError("unknown --format '" + format + "'");
    }

    const ConvergenceReport report = run_study(cfg);
    emit_report(report, cfg.format, cfg.output_path);
    for (const LevelResult& row : report.levels) {
      if (row.failed) {
        std::fprintf(stderr, "evolfem: level %d failed: %s\n", row.level, row.failure.c_str());
        return 2;
      }
    }
    return 0;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "evolfem: %s\n", err.what());
    return 1;
  }
}
