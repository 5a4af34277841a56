#include "omt/run_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "omt/dump.hpp"
#include "omt/errors.hpp"

namespace omt {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Metrics, residual, cost, degenerate_cells, mass0, max_mass_deviation,
                                   max_obstacle_fraction, max_control, max_control_excess, terminal_l1_gap,
                                   rho_floor)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunReport, iterations, converged, residual, cost, change, wall_seconds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FrameFiles, t, rho, m, u)

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(const char* field, std::size_t j) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frames/%s_%03zu.omtf", field, j);
  return buf;
}

}  // namespace

RunManifest write_run(const std::string& dir, const Scenario& sc, const RunOutcome& out) {
  const Problem& p = sc.problem;
  const Grid& g = p.grid;
  const Formulation form = formulation_of(out.algorithm);
  fs::create_directories(fs::path(dir) / "frames");

  RunManifest m;
  m.algorithm = out.algorithm;
  m.config_toml = config_to_toml(sc.config);
  m.report = out.report;
  m.summary = compute_metrics(sc, out.mu, form);
  m.mu = "mu.omtf";
  m.mu_pointwise = "mu_pointwise.omtf";
  m.rho0 = "rho0.omtf";
  m.rhoT = "rhoT.omtf";
  m.obstacle = "obstacle.omtf";
  auto at = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  write_dump(at(m.mu), to_dump(out.mu));
  write_dump(at(m.mu_pointwise), to_dump(out.mu_pointwise));
  write_dump(at(m.rho0), to_dump(p.rho0));
  write_dump(at(m.rhoT), to_dump(p.rhoT));
  write_dump(at(m.obstacle), to_dump(sc.obstacle_mask));

  const FluxField phys = physical_flux(p, out.mu, form);
  const int n = p.model.n, r = p.model.r;
  const auto times = frame_times(g.T(), sc.config.cadence);
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double t = times[j];
    const SpaceSlice rho = density_frame(p, phys, t);
    const std::vector<SpaceSlice> mom = momentum_frame(p, phys, t);
    FieldDump md{{static_cast<std::uint64_t>(n)}, {}}, ud{{static_cast<std::uint64_t>(r)}, {}};
    for (int i : g.nx()) {
      md.dims.push_back(static_cast<std::uint64_t>(i));
      ud.dims.push_back(static_cast<std::uint64_t>(i));
    }
    for (const SpaceSlice& s : mom) md.data.insert(md.data.end(), s.values().begin(), s.values().end());
    ud.data.assign(static_cast<std::size_t>(r) * g.space_cells(), 0.0);
    SmallVec mv(n);
    for (std::size_t k = 0; k < g.space_cells(); ++k) {
      for (int i = 0; i < n; ++i) mv(i) = mom[i][k];
      const SmallVec u = recover_control(p.model, t, cell_state(g, k), rho[k], mv, m.summary.rho_floor);
      for (int i = 0; i < r; ++i) ud.data[i * g.space_cells() + k] = u(i);
    }
    FrameFiles f{t, frame_name("rho", j), frame_name("m", j), frame_name("u", j)};
    write_dump(at(f.rho), to_dump(rho));
    write_dump(at(f.m), md);
    write_dump(at(f.u), ud);
    m.frames.push_back(f);
  }

  json j{{"format", "omt-run"},
         {"version", 1},
         {"algorithm", to_string(m.algorithm)},
         {"grid", {{"T", g.T()}, {"nt", g.nt()}, {"nx", g.nx()}}},
         {"config", m.config_toml},
         {"report", m.report},
         {"summary", m.summary},
         {"fields",
          {{"mu", m.mu}, {"mu_pointwise", m.mu_pointwise}, {"rho0", m.rho0}, {"rhoT", m.rhoT}, {"obstacle", m.obstacle}}},
         {"frames", m.frames}};
  std::ofstream os(at("manifest.json"));
  if (!os) throw FormatError("cannot write manifest in '" + dir + "'");
  os << j.dump(1) << "\n";
  return m;
}

RunManifest read_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw FormatError("no manifest.json in '" + dir + "'");
  try {
    const json j = json::parse(in);
    if (j.at("format") != "omt-run") throw FormatError(path.string() + ": not a run manifest");
    RunManifest m;
    m.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    m.config_toml = j.at("config").get<std::string>();
    m.report = j.at("report").get<RunReport>();
    m.summary = j.at("summary").get<Metrics>();
    m.frames = j.at("frames").get<std::vector<FrameFiles>>();
    const json& f = j.at("fields");
    m.mu = f.at("mu");
    m.mu_pointwise = f.at("mu_pointwise");
    m.rho0 = f.at("rho0");
    m.rhoT = f.at("rhoT");
    m.obstacle = f.at("obstacle");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Recomputed recompute_from_dir(const std::string& dir) {
  const RunManifest m = read_manifest(dir);
  Scenario sc = build_scenario(parse_config(m.config_toml, (fs::path(dir) / "manifest.json").string()));
  FluxField mu = flux_from_dump(read_dump((fs::path(dir) / m.mu).string()), sc.problem.grid);
  Metrics metrics = compute_metrics(sc, mu, formulation_of(m.algorithm));
  return {std::move(sc), std::move(mu), metrics};
}

}  // namespace omt
