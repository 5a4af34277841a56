// Command-line driver: solve a configured problem, render its frames, inspect dumps.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "omt/dump.hpp"
#include "omt/errors.hpp"
#include "omt/render.hpp"
#include "omt/run_io.hpp"

namespace fs = std::filesystem;
using namespace omt;

namespace {

void print_metrics(const Metrics& m) {
  std::cout << "  residual              " << m.residual << "\n"
            << "  cost                  " << m.cost << "\n"
            << "  degenerate cells      " << m.degenerate_cells << "\n"
            << "  max mass deviation    " << m.max_mass_deviation << "\n"
            << "  max obstacle fraction " << m.max_obstacle_fraction << "\n"
            << "  max |u|               " << m.max_control << "\n"
            << "  max bound excess      " << m.max_control_excess << "\n"
            << "  terminal L1 gap       " << m.terminal_l1_gap << "\n";
}

struct SolveArgs {
  std::string config;
  std::optional<int> max_iter;
  std::optional<double> tol;
  std::optional<std::string> algorithm;
  std::optional<std::string> out;
  bool quiet = false;
};

int solve(const SolveArgs& a) {
  ProblemConfig cfg = load_config(a.config);
  if (a.max_iter) cfg.uzawa.max_iter = cfg.dr.max_iter = *a.max_iter;
  if (a.tol) cfg.uzawa.stop_tol = cfg.dr.stop_tol = *a.tol;
  if (a.algorithm) cfg.algorithm = algorithm_from_string(*a.algorithm);
  if (a.out) cfg.output_dir = *a.out;
  const Scenario sc = build_scenario(cfg);
  const Grid& g = sc.problem.grid;
  if (!a.quiet) {
    std::cerr << "solving " << a.config << ": " << to_string(cfg.algorithm) << " on " << g.nt();
    for (int n : g.nx()) std::cerr << " x " << n;
    std::cerr << " cells\n";
  }
  const RunOutcome out = run_scenario(sc, [&](int it) {
    if (!a.quiet && it % 100 == 0) std::cerr << "  iteration " << it << "\n";
  });
  const RunManifest m = write_run(cfg.output_dir, sc, out);
  std::cout << (out.report.converged ? "converged" : "max_iter reached") << " after " << out.report.iterations
            << " iterations (" << out.report.wall_seconds << " s); output in " << cfg.output_dir << "\n";
  print_metrics(m.summary);
  return out.report.converged ? 0 : 2;
}

int info(const std::string& path) {
  if (fs::is_directory(path)) {
    const RunManifest m = read_manifest(path);
    std::cout << "run " << path << ": " << to_string(m.algorithm) << ", " << m.report.iterations << " iterations, "
              << (m.report.converged ? "converged" : "not converged") << ", " << m.frames.size() << " frames\n"
              << "stored summary\n";
    print_metrics(m.summary);
    const Recomputed r = recompute_from_dir(path);
    std::cout << "recomputed from dumps\n";
    print_metrics(r.metrics);
    return 0;
  }
  const FieldDump d = read_dump(path);
  std::cout << path << ": OMTF v" << kDumpVersion << ", dims";
  for (auto n : d.dims) std::cout << " " << n;
  const auto [lo, hi] = std::minmax_element(d.data.begin(), d.data.end());
  double sum = 0.0;
  for (double v : d.data) sum += v;
  std::cout << "\n  min " << *lo << "  max " << *hi << "  mean " << sum / d.data.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained optimal mass transport solver"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve_cmd = app.add_subcommand("solve", "Run the configured algorithm and write dumps");
  solve_cmd->add_option("config", sa.config, "TOML problem configuration")->required();
  solve_cmd->add_option("--max-iter", sa.max_iter, "Iteration limit");
  solve_cmd->add_option("--tol", sa.tol, "Stopping tolerance");
  solve_cmd->add_option("--algorithm", sa.algorithm, "uzawa_direct | uzawa_indirect | dr");
  solve_cmd->add_option("--out", sa.out, "Output directory");
  solve_cmd->add_flag("--quiet", sa.quiet, "No progress output");

  std::string render_dir, field = "rho", scale = "fixed";
  RenderOptions ro;
  auto* render_cmd = app.add_subcommand("render", "Write PPM heatmaps for every frame of a run");
  render_cmd->add_option("dir", render_dir, "Run directory")->required();
  render_cmd->add_option("--field", field, "rho | u")->check(CLI::IsMember({"rho", "u"}));
  render_cmd->add_option("--scale", scale, "fixed | auto")->check(CLI::IsMember({"fixed", "auto"}));
  render_cmd->add_flag("--obstacle", ro.obstacle, "Draw the obstacle in grey");
  render_cmd->add_option("--pixel", ro.pixel, "Pixels per cell");
  render_cmd->add_option("--out", ro.out_dir, "Image directory (default <dir>/render)");

  std::string info_path;
  auto* info_cmd = app.add_subcommand("info", "Describe a dump file or a run directory");
  info_cmd->add_option("path", info_path, "Dump file or run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve_cmd) return solve(sa);
    if (*render_cmd) {
      ro.field = field == "u" ? RenderOptions::Field::u : RenderOptions::Field::rho;
      ro.scale = scale == "auto" ? RenderOptions::Scale::automatic : RenderOptions::Scale::fixed;
      for (const std::string& p : render_run(render_dir, ro)) std::cout << p << "\n";
      return 0;
    }
    if (*info_cmd) return info(info_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
