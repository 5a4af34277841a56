#include "omt/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "omt/dump.hpp"
#include "omt/errors.hpp"

namespace omt {

ProblemConfig build_double_integrator_scenario(double k_bound, double radius, double cap) {
  ProblemConfig c;
  c.T = 1.0;
  c.nt = 32;
  c.nx = {64, 64};
  c.system = "double_integrator";
  c.rho0.kind = c.rhoT.kind = DensitySpec::Kind::disc;
  c.rho0.center = {0.25, 0.4};
  c.rhoT.center = {0.75, 0.6};
  c.rho0.radius = c.rhoT.radius = radius;
  c.rho0.value = c.rhoT.value = 10.0;
  c.normalize = true;
  c.cap = cap;
  c.floor = 0.0;
  c.obstacles = {ObstacleSpec{{0.5, 0.5}, {0.05}, 0.0}};
  c.input_bounds = {k_bound};
  c.algorithm = Algorithm::uzawa_indirect;
  c.cadence = 0.2;
  c.output_dir = "benchmark_k" + std::to_string(static_cast<int>(std::lround(k_bound)));
  return c;
}

namespace {

SystemModel make_model(const ProblemConfig& c) {
  const int n = static_cast<int>(c.nx.size());
  if (c.system == "double_integrator") {
    if (n != 2) throw InvalidParameters("the double integrator needs a 2-D grid");
    return SystemModel::double_integrator();
  }
  if (c.system == "single_integrator") return SystemModel::single_integrator(n);
  if (c.system == "linear") {
    if (c.A.rows() != n || c.A.cols() != n || c.B.rows() != n)
      throw InvalidParameters("linear system: A must be n x n and B n x r with n = grid dimension");
    return SystemModel::linear(c.A, c.B);
  }
  throw InvalidParameters("unknown system '" + c.system + "'");
}

double coord(const std::vector<double>& v, int i, const char* what) {
  if (v.empty()) throw InvalidParameters(std::string(what) + " is missing");
  return v.size() == 1 ? v[0] : v.at(i);
}

SpaceSlice rasterize(const Grid& g, const DensitySpec& d) {
  SpaceSlice out(g);
  const int n = g.space_dim();
  for (const auto* v : {&d.center, &d.lo, &d.hi})
    if (v->size() > 1 && static_cast<int>(v->size()) != n)
      throw InvalidParameters("density coordinates do not match the grid dimension");
  if (d.kind == DensitySpec::Kind::file) {
    const FieldDump dump = read_dump(d.path);
    std::vector<std::uint64_t> want(g.nx().begin(), g.nx().end());
    if (dump.dims != want) throw InvalidParameters("density file '" + d.path + "' does not match the grid");
    std::copy(dump.data.begin(), dump.data.end(), out.values().begin());
  } else {
    for (std::size_t k = 0; k < g.space_cells(); ++k) {
      const auto x = g.x_center(k);
      double v = 0.0;
      switch (d.kind) {
        case DensitySpec::Kind::uniform: v = d.value; break;
        case DensitySpec::Kind::disc: {
          double r2 = 0.0;
          for (int i = 0; i < n; ++i) r2 += std::pow(x[i] - coord(d.center, i, "disc center"), 2);
          v = r2 < d.radius * d.radius ? d.value : 0.0;
          break;
        }
        case DensitySpec::Kind::box: {
          bool in = true;
          for (int i = 0; i < n; ++i) in = in && x[i] >= coord(d.lo, i, "box lo") && x[i] <= coord(d.hi, i, "box hi");
          v = in ? d.value : 0.0;
          break;
        }
        case DensitySpec::Kind::gaussian: {
          double r2 = 0.0;
          for (int i = 0; i < n; ++i) r2 += std::pow(x[i] - coord(d.center, i, "gaussian center"), 2);
          v = d.value * std::exp(-0.5 * r2 / (d.sigma * d.sigma));
          break;
        }
        case DensitySpec::Kind::file: break;
      }
      out[k] = v;
    }
  }
  for (double v : out.values())
    if (!std::isfinite(v) || v < 0.0) throw InvalidParameters("densities must be finite and nonnegative");
  return out;
}

bool in_obstacle(const ObstacleSpec& o, const std::array<double, kMaxSpaceDim>& x, int n) {
  for (int i = 0; i < n; ++i)
    if (std::abs(x[i] - coord(o.center, i, "obstacle center")) > coord(o.half_width, i, "obstacle half_width") + 1e-12)
      return false;
  return true;
}

}  // namespace

Scenario build_scenario(const ProblemConfig& cfg) {
  if (cfg.nx.empty() || static_cast<int>(cfg.nx.size()) > kMaxSpaceDim)
    throw InvalidParameters("grid must have between 1 and 3 spatial axes");
  if (!(cfg.T > 0.0) || cfg.nt < 2) throw InvalidParameters("grid needs T > 0 and nt >= 2");
  for (int n : cfg.nx)
    if (n < 2) throw InvalidParameters("every spatial axis needs at least 2 cells");
  if (!(cfg.cadence > 0.0)) throw InvalidParameters("output cadence must be positive");
  const Grid g(cfg.T, cfg.nt, cfg.nx);
  const int n = g.space_dim();
  Scenario sc{cfg, Problem{g, make_model(cfg), rasterize(g, cfg.rho0), rasterize(g, cfg.rhoT), {}}, SpaceSlice(g)};
  Problem& p = sc.problem;

  const double m0 = mass(p.rho0), mT = mass(p.rhoT);
  if (!(m0 > 0.0) || !(mT > 0.0)) throw InvalidParameters("both densities need positive mass");
  if (cfg.normalize)
    for (double& v : p.rhoT.values()) v *= m0 / mT;

  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    const auto x = g.x_center(k);
    for (const ObstacleSpec& o : cfg.obstacles)
      if (in_obstacle(o, x, n)) sc.obstacle_mask[k] = 1.0;
  }
  if (cfg.cap || !cfg.obstacles.empty()) {
    SpaceSlice h(g, cfg.cap.value_or(1e300));
    for (std::size_t k = 0; k < g.space_cells(); ++k) {
      const auto x = g.x_center(k);
      for (const ObstacleSpec& o : cfg.obstacles)
        if (in_obstacle(o, x, n)) h[k] = std::min(h[k], o.cap);
    }
    p.constraints.upper = broadcast(g, h);
  }
  if (cfg.floor) p.constraints.lower = ScalarField(g, *cfg.floor);

  const int r = p.model.r;
  if (!cfg.input_bounds.empty()) {
    if (static_cast<int>(cfg.input_bounds.size()) != r)
      throw InvalidParameters("input bounds: expected " + std::to_string(r) + " values");
    p.constraints.input = box_input_bounds(cfg.input_bounds);
  }
  for (const InputHalfspace& h : cfg.halfspaces) {
    if (static_cast<int>(h.a.size()) != r) throw InvalidParameters("input halfspace has the wrong length");
    p.constraints.input.push_back(h);
  }

  validate_problem(p);
  // Surfaces EmptyFeasibleSet / UnsupportedForDR before any work is done.
  compile_constraints(p.model, p.constraints, g, formulation_of(cfg.algorithm));
  if (cfg.algorithm == Algorithm::uzawa_direct || cfg.algorithm == Algorithm::uzawa_indirect) {
    const ParamCheck pc = validate_params(cfg.uzawa);
    if (!pc.ok) throw InvalidParameters("step sizes rejected: " + pc.message);
  }
  return sc;
}

std::vector<double> frame_times(double T, double cadence) {
  const int count = std::max(1, static_cast<int>(std::lround(T / cadence)));
  std::vector<double> out;
  for (int j = 0; j <= count; ++j) out.push_back(T * j / count);
  return out;
}

namespace {

// Values at the layer interfaces t_j = j dt, j = 0..nt, for one component.
std::vector<SpaceSlice> interface_frames(const Grid& g, std::span<const double> layers, const SpaceSlice& first,
                                         const SpaceSlice& last) {
  std::vector<SpaceSlice> out(g.nt() + 1, SpaceSlice(g));
  out[0] = first;
  out[g.nt()] = last;
  const std::size_t S = g.space_cells();
  for (int j = 1; j < g.nt(); ++j)
    for (std::size_t k = 0; k < S; ++k) out[j][k] = 0.5 * (layers[(j - 1) * S + k] + layers[j * S + k]);
  return out;
}

SpaceSlice interpolate(const Grid& g, const std::vector<SpaceSlice>& frames, double t) {
  const double s = std::clamp(t / g.dt(), 0.0, static_cast<double>(g.nt()));
  const int j = std::min(static_cast<int>(std::floor(s)), g.nt() - 1);
  const double w = s - j;
  SpaceSlice out(g);
  for (std::size_t k = 0; k < g.space_cells(); ++k) out[k] = (1.0 - w) * frames[j][k] + w * frames[j + 1][k];
  return out;
}

std::vector<SpaceSlice> density_interfaces(const FluxField& mu_phys) {
  const Grid& g = mu_phys.grid();
  const EtaField a = apply_A(mu_phys);
  return interface_frames(g, mu_phys.component(0), a.first, a.last);
}

SpaceSlice layer_slice(const Grid& g, std::span<const double> v, int it) {
  SpaceSlice s(g);
  std::copy_n(v.begin() + it * g.space_cells(), g.space_cells(), s.values().begin());
  return s;
}

}  // namespace

SpaceSlice density_frame(const Problem& p, const FluxField& mu_phys, double t) {
  require_same_grid(p.grid, mu_phys.grid());
  return interpolate(p.grid, density_interfaces(mu_phys), t);
}

std::vector<SpaceSlice> momentum_frame(const Problem& p, const FluxField& mu_phys, double t) {
  const Grid& g = p.grid;
  std::vector<SpaceSlice> out;
  for (int c = 1; c < g.components(); ++c) {
    auto m = mu_phys.component(c);
    const auto frames = interface_frames(g, m, layer_slice(g, m, 0), layer_slice(g, m, g.nt() - 1));
    out.push_back(interpolate(g, frames, t));
  }
  return out;
}

SmallVec recover_control(const SystemModel& model, double t, const SmallVec& x, double rho, const SmallVec& m,
                         double floor) {
  if (!(rho > floor)) return SmallVec::Zero(model.r);
  return pseudo_inverse(model.B(t, x)) * (m / rho - model.f(t, x));
}

Metrics compute_metrics(const Scenario& sc, const FluxField& mu, Formulation formulation) {
  const Problem& p = sc.problem;
  const Grid& g = p.grid;
  require_same_grid(g, mu.grid());
  Metrics out;
  out.residual = continuity_residual(p, mu, formulation);
  const CostEstimate est = estimate_cost(p, mu, formulation);
  out.cost = est.cost;
  out.degenerate_cells = est.degenerate_cells;

  const FluxField phys = physical_flux(p, mu, formulation);
  out.mass0 = mass(p.rho0);
  const auto frames = density_interfaces(phys);
  for (const SpaceSlice& f : frames) {
    out.max_mass_deviation = std::max(out.max_mass_deviation, std::abs(mass(f) - out.mass0) / out.mass0);
    double obs = 0.0;
    for (std::size_t k = 0; k < g.space_cells(); ++k) obs += sc.obstacle_mask[k] * std::max(f[k], 0.0);
    out.max_obstacle_fraction = std::max(out.max_obstacle_fraction, obs * g.space_volume() / out.mass0);
  }
  double l1 = 0.0, l1T = 0.0;
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    l1 += std::abs(frames.back()[k] - p.rhoT[k]);
    l1T += std::abs(p.rhoT[k]);
  }
  out.terminal_l1_gap = l1 / l1T;

  auto rho = phys.component(0);
  out.rho_floor = 1e-6 * *std::max_element(rho.begin(), rho.end());
  const int n = p.model.n;
  const bool constant_bdag = p.model.B_constant;
  const SmallMat bdag_c = constant_bdag ? pseudo_inverse(p.model.B(0.0, cell_state(g, 0))) : SmallMat();
  bool have_bounds = false;
  double excess = -std::numeric_limits<double>::infinity();
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    if (!(rho[cell] > out.rho_floor)) continue;
    const double t = g.t_center(g.time_index(cell));
    const SmallVec x = cell_state(g, cell);
    SmallVec m(n);
    for (int i = 0; i < n; ++i) m(i) = phys.at(i + 1, cell);
    const SmallMat bd = constant_bdag ? bdag_c : pseudo_inverse(p.model.B(t, x));
    const SmallVec u = bd * (m / rho[cell] - p.model.f(t, x));
    out.max_control = std::max(out.max_control, u.norm());
    for (const InputHalfspace& h : p.constraints.input) {
      double s = h.b;
      for (std::size_t i = 0; i < h.a.size(); ++i) s += h.a[i] * u(i);
      excess = std::max(excess, s);
      have_bounds = true;
    }
  }
  out.max_control_excess = have_bounds ? excess : 0.0;
  return out;
}

RunOutcome run_scenario(const Scenario& sc, const std::function<void(int)>& tick) {
  RunOutcome out;
  out.algorithm = sc.config.algorithm;
  if (sc.config.algorithm == Algorithm::dr) {
    DRResult r = run_dr(sc.problem, sc.config.dr, [&](int it, const DRState&) {
      if (tick) tick(it);
    });
    out.mu = std::move(r.state.mu_bar);
    out.mu_pointwise = std::move(r.state.mu_prox);
    out.report = std::move(r.report);
  } else {
    UzawaResult r = run_uzawa(sc.problem, formulation_of(sc.config.algorithm), sc.config.uzawa,
                              [&](int it, const UzawaState&) {
                                if (tick) tick(it);
                              });
    out.mu = std::move(r.state.mu);
    out.mu_pointwise = out.mu;
    out.report = std::move(r.report);
  }
  return out;
}

}  // namespace omt
