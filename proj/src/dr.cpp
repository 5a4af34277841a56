#include "omt/dr.hpp"

#include <chrono>
#include <cmath>

#include "omt/errors.hpp"

namespace omt {

double inner(const EtaField& a, const EtaField& b) {
  return inner(a.interior, b.interior) + inner(a.first, b.first) + inner(a.last, b.last);
}

EtaField apply_A(const FluxField& mu) {
  const Grid& g = mu.grid();
  if (g.nt() < 2) throw InvalidParameters("splitting needs at least two time layers");
  EtaField out(g);
  out.interior = divergence(mu);
  auto first = out.interior.layer(0);
  auto last = out.interior.layer(g.nt() - 1);
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    out.first[k] = g.dt() * first[k];
    out.last[k] = -g.dt() * last[k];
    first[k] = 0.0;
    last[k] = 0.0;
  }
  return out;
}

FluxField apply_A_adjoint(const EtaField& eta) {
  const Grid& g = eta.interior.grid();
  ScalarField lam = eta.interior;
  auto first = lam.layer(0);
  auto last = lam.layer(g.nt() - 1);
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    first[k] = eta.first[k];
    last[k] = -eta.last[k];
  }
  FluxField out = gradient(lam);
  out *= -1.0;
  return out;
}

DRContext::DRContext(const Problem& problem, const DRParams& params)
    : problem_(problem), params_(params) {
  const Grid& g = problem.grid;
  if (g.nt() < 2) throw InvalidParameters("splitting needs at least two time layers");
  const SystemModel& model = problem.model;
  constraints_ = compile_constraints(model, problem.constraints, g, Formulation::dr);

  theta_ = EtaField(g);
  theta_.first = problem.rho0;
  theta_.last = problem.rhoT;

  const int d = g.components(), n = model.n, rows = constraints_.rows;
  q_ = CoefficientField(g);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    SmallMat m = SmallMat::Identity(d, d);
    for (int k = 0; k < rows; ++k) {
      const Eigen::Map<const SmallVec> a(constraints_.row(cell, k), d);
      m += a * a.transpose();
    }
    if (!params.literal_q) m = m.ldlt().solve(SmallMat::Identity(d, d));
    auto dst = q_.at(cell);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) dst[i * d + j] = m(i, j);
  }

  prox_shared_ = ProxMData(pseudo_inverse(model.B(0.0, cell_state(g, 0))), SmallVec::Zero(n));
  f_.resize(g.cells() * n);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const SmallVec f = model.f(g.t_center(g.time_index(cell)), cell_state(g, cell));
    for (int i = 0; i < n; ++i) f_[cell * n + i] = f(i);
  }
}

std::vector<double> DRContext::apply_R(const FluxField& mu) const {
  const Grid& g = problem_.grid;
  const int d = g.components(), rows = constraints_.rows;
  std::vector<double> out(g.cells() * rows);
  for (std::size_t cell = 0; cell < g.cells(); ++cell)
    for (int k = 0; k < rows; ++k) {
      const double* a = constraints_.row(cell, k);
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += a[c] * mu.at(c, cell);
      out[cell * rows + k] = s;
    }
  return out;
}

FluxField DRContext::apply_RT(const std::vector<double>& xi) const {
  const Grid& g = problem_.grid;
  const int d = g.components(), rows = constraints_.rows;
  FluxField out(g);
  for (std::size_t cell = 0; cell < g.cells(); ++cell)
    for (int k = 0; k < rows; ++k) {
      const double* a = constraints_.row(cell, k);
      const double x = xi[cell * rows + k];
      for (int c = 0; c < d; ++c) out.at(c, cell) += a[c] * x;
    }
  return out;
}

Triple DRContext::prox_F(const FluxField& muhat, const EtaField&, const std::vector<double>& xihat) const {
  const Grid& g = problem_.grid;
  const int d = g.components(), n = problem_.model.n;
  Triple out{FluxField(g), theta_, xihat};
  SmallVec v(d);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    for (int c = 0; c < d; ++c) v(c) = muhat.at(c, cell);
    const ProxMData data(prox_shared_, Eigen::Map<const SmallVec>(f_.data() + cell * n, n));
    const SmallVec p = prox_M_point(v, data, params_.prox_m);
    for (int c = 0; c < d; ++c) out.mu.at(c, cell) = p(c);
  }
  clamp_cap(out.xi, constraints_.rhs);
  return out;
}

namespace {

FluxField apply_coef(const CoefficientField& q, const FluxField& v) {
  const Grid& g = v.grid();
  const int d = g.components();
  FluxField out(g);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    auto m = q.at(cell);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += m[i * d + j] * v.at(j, cell);
      out.at(i, cell) = s;
    }
  }
  return out;
}

}  // namespace

// Stationarity gives mu~ = Q(v + G L) with v = mu + R'xi, where L carries the
// multiplier of the interior rows and +-the trace multipliers on the boundary
// layers. Eliminating mu~ leaves s L - D(Q G L) = D(Q v) - b with s = 1 inside
// and 1/dt on the boundary layers.
Triple DRContext::prox_N(const FluxField& mu, const EtaField& eta, const std::vector<double>& xi,
                         ScalarField* warm, SolveReport* report) const {
  const Grid& g = problem_.grid;
  require_same_grid(g, mu.grid());
  FluxField v = apply_RT(xi);
  v += mu;

  ScalarField rhs = divergence(apply_coef(q_, v));
  {
    auto first = rhs.layer(0);
    auto last = rhs.layer(g.nt() - 1);
    const double inv_dt = 1.0 / g.dt();
    for (int it = 1; it + 1 < g.nt(); ++it) {
      auto r = rhs.layer(it);
      auto e = eta.interior.layer(it);
      for (std::size_t k = 0; k < r.size(); ++k) r[k] -= e[k];
    }
    for (std::size_t k = 0; k < g.space_cells(); ++k) {
      first[k] -= eta.first[k] * inv_dt;
      last[k] += eta.last[k] * inv_dt;
    }
  }

  const ScreenedOperator op{q_, 1.0, 1.0 / g.dt() - 1.0, 1.0};
  EllipticOptions opts = params_.elliptic;
  opts.method = EllipticOptions::Method::cg;
  if (warm && warm->size() == g.cells()) opts.initial_guess = warm;
  const ScalarField lam = solve_screened(op, rhs, opts, report);
  if (warm) *warm = lam;

  v += gradient(lam);
  Triple out{apply_coef(q_, v), EtaField(), {}};
  out.eta = apply_A(out.mu);
  out.xi = apply_R(out.mu);
  return out;
}

DRState DRContext::initial_state() const {
  const Grid& g = problem_.grid;
  DRState s;
  s.mu = FluxField(g);
  auto rho = s.mu.component(0);
  for (int it = 0; it < g.nt(); ++it) {
    const double t = g.t_center(it) / g.T();
    for (std::size_t k = 0; k < g.space_cells(); ++k)
      rho[it * g.space_cells() + k] = (1.0 - t) * problem_.rho0[k] + t * problem_.rhoT[k];
  }
  s.mu_bar = s.mu;
  s.mu_prox = s.mu;
  s.eta = s.eta_bar = theta_;
  s.xi = apply_R(s.mu);
  clamp_cap(s.xi, constraints_.rhs);
  s.xi_bar = s.xi;
  s.lambda = ScalarField(g);
  return s;
}

double dr_step(DRState& s, const DRContext& ctx) {
  const Grid& g = ctx.problem().grid;

  // 1. reflections
  FluxField muhat = s.mu_bar;
  muhat *= 2.0;
  muhat -= s.mu;
  std::vector<double> xihat(s.xi.size());
  for (std::size_t i = 0; i < xihat.size(); ++i) xihat[i] = 2.0 * s.xi_bar[i] - s.xi[i];
  EtaField etahat(g);
  {
    auto a = etahat.interior.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 2.0 * s.eta_bar.interior[i] - s.eta.interior[i];
    for (std::size_t k = 0; k < g.space_cells(); ++k) {
      etahat.first[k] = 2.0 * s.eta_bar.first[k] - s.eta.first[k];
      etahat.last[k] = 2.0 * s.eta_bar.last[k] - s.eta.last[k];
    }
  }

  // 2. z += prox_F(zhat) - zbar
  Triple f = ctx.prox_F(muhat, etahat, xihat);
  FluxField inc = f.mu;
  inc -= s.mu_bar;
  s.mu += inc;
  {
    auto e = s.eta.interior.values();
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += f.eta.interior[i] - s.eta_bar.interior[i];
    for (std::size_t k = 0; k < g.space_cells(); ++k) {
      s.eta.first[k] += f.eta.first[k] - s.eta_bar.first[k];
      s.eta.last[k] += f.eta.last[k] - s.eta_bar.last[k];
    }
  }
  double inc2 = inner(inc, inc);
  {
    EtaField de(g);
    auto a = de.interior.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = f.eta.interior[i] - s.eta_bar.interior[i];
    for (std::size_t k = 0; k < g.space_cells(); ++k) {
      de.first[k] = f.eta.first[k] - s.eta_bar.first[k];
      de.last[k] = f.eta.last[k] - s.eta_bar.last[k];
    }
    inc2 += inner(de, de);
  }
  for (std::size_t i = 0; i < s.xi.size(); ++i) {
    const double d = f.xi[i] - s.xi_bar[i];
    inc2 += g.cell_volume() * d * d;
    s.xi[i] += d;
  }
  s.mu_prox = std::move(f.mu);

  // 3-4. projection
  Triple bar = ctx.prox_N(s.mu, s.eta, s.xi, &s.lambda);
  s.mu_bar = std::move(bar.mu);
  s.eta_bar = std::move(bar.eta);
  s.xi_bar = std::move(bar.xi);
  return std::sqrt(inc2);
}

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

DRResult run_dr(const Problem& problem, const DRParams& params, const DRObserver& observer) {
  if (params.max_iter < 0 || !(params.stop_tol > 0.0)) throw InvalidParameters("max_iter >= 0 and stop_tol > 0 required");
  validate_problem(problem);
  const auto start = std::chrono::steady_clock::now();
  const DRContext ctx(problem, params);
  DRResult res{ctx.initial_state(), {}, {}};
  RunReport& rep = res.report;
  for (int it = 1; it <= params.max_iter; ++it) {
    const FluxField prev = res.state.mu_bar;
    res.increment.push_back(dr_step(res.state, ctx));
    if (!all_finite(res.state.mu.raw()) || !all_finite(res.state.mu_bar.raw()))
      throw DivergenceDetected("non-finite iterate at iteration " + std::to_string(it));
    FluxField diff = res.state.mu_bar;
    diff -= prev;
    const double change = norm(diff) / std::max(norm(prev), 1e-300);
    const double residual = continuity_residual(problem, res.state.mu_bar, Formulation::dr);
    rep.iterations = it;
    rep.change.push_back(change);
    rep.residual.push_back(residual);
    rep.cost.push_back(estimate_cost(problem, res.state.mu_bar, Formulation::dr).cost);
    if (observer) observer(it, res.state);
    if (change < params.stop_tol) {
      rep.converged = true;
      break;
    }
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace omt
