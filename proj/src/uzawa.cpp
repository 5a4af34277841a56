#include "omt/uzawa.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "omt/errors.hpp"

namespace omt {

ParamCheck validate_params(const UzawaParams& p) {
  ParamCheck out;
  const double cross = std::abs(p.rho_r * p.r - p.rho_s * p.s);
  out.first = 2.0 * p.s - p.rho_r - p.rho_s * p.s * p.s - cross;
  out.second = 2.0 * p.r - p.rho_r * p.r * p.r - p.rho_s - cross;
  out.duals_frozen = (p.rho_r == 0.0 && p.rho_s == 0.0);
  std::ostringstream msg;
  if (!(p.r > 0.0 && p.s > 0.0 && p.rho_r >= 0.0 && p.rho_s >= 0.0)) {
    msg << "r, s must be positive and rho_r, rho_s nonnegative";
  } else if (!(out.first > 0.0)) {
    msg << "2s - rho_r - rho_s s^2 - |rho_r r - rho_s s| = " << out.first << " must be > 0";
  } else if (!(out.second > 0.0)) {
    msg << "2r - rho_r r^2 - rho_s - |rho_r r - rho_s s| = " << out.second << " must be > 0";
  } else {
    out.ok = true;
    if (out.duals_frozen) msg << "warning: rho_r = rho_s = 0, the dual variables never move";
  }
  out.message = msg.str();
  return out;
}

UzawaContext::UzawaContext(const Problem& problem, Formulation formulation, const UzawaParams& params)
    : problem_(problem), formulation_(formulation), params_(params) {
  if (formulation == Formulation::dr) throw InvalidParameters("Uzawa drivers take direct or indirect variables");
  const Grid& g = problem.grid;
  const SystemModel& model = problem.model;
  constraints_ = compile_constraints(model, problem.constraints, g, formulation);
  const int n = model.n, d = n + 1;

  if (formulation == Formulation::indirect) {
    kf_shared_ = model.B_constant;
    if (kf_shared_) {
      const KfParams kp = kf_params(model, 0.0, cell_state(g, 0), params.kf);
      kf_.emplace_back(kp.c, kp.gram);
      kf_c_.resize(g.cells() * n);
    }
    for (std::size_t cell = 0; cell < g.cells(); ++cell) {
      const KfParams kp = kf_params(model, g.t_center(g.time_index(cell)), cell_state(g, cell), params.kf);
      if (kf_shared_)
        for (int i = 0; i < n; ++i) kf_c_[cell * n + i] = kp.c(i);
      else
        kf_.emplace_back(kp.c, kp.gram);
    }
  } else {
    ptilde_.resize(g.cells() * d * d);
    coef_ = CoefficientField(g);
    ptilde_identity_ = true;
    for (std::size_t cell = 0; cell < g.cells(); ++cell) {
      const SmallMat pt = assemble_Ptilde(model, g.t_center(g.time_index(cell)), cell_state(g, cell));
      const SmallMat c = pt.transpose() * pt;
      auto dst = coef_.at(cell);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          ptilde_[(cell * d + i) * d + j] = pt(i, j);
          dst[i * d + j] = c(i, j);
        }
      ptilde_identity_ = ptilde_identity_ && pt.isIdentity(0.0);
    }
    if (ptilde_identity_)
      coef_ = CoefficientField::identity(g);
    else
      coef_.validate_spd();
  }
}

UzawaState UzawaContext::initial_state() const {
  const Grid& g = problem_.grid;
  UzawaState s{ScalarField(g), FluxField(g), FluxField(g), FluxField(g), FluxField(g), FluxField(g)};
  auto rho = s.mu.component(0);
  for (int it = 0; it < g.nt(); ++it) {
    const double t = g.t_center(it) / g.T();
    for (std::size_t k = 0; k < g.space_cells(); ++k)
      rho[it * g.space_cells() + k] = (1.0 - t) * problem_.rho0[k] + t * problem_.rhoT[k];
  }
  return s;
}

ScalarField UzawaContext::solve_multiplier(const UzawaState& s) const {
  const Grid& g = problem_.grid;
  const double r = params_.r;
  FluxField flux = s.p;
  flux *= -r;
  flux += s.nu;
  EllipticOptions opts = params_.elliptic;
  opts.initial_guess = &s.phi;
  if (formulation_ == Formulation::indirect || ptilde_identity_)
    return solve_poisson_neumann(divergence(flux), problem_.rho0, problem_.rhoT, r, opts);
  const int d = g.components();
  FluxField lifted(g);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const double* pt = ptilde_.data() + cell * d * d;
    for (int j = 0; j < d; ++j) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i) acc += pt[i * d + j] * flux.at(i, cell);
      lifted.at(j, cell) = acc;
    }
  }
  return solve_elliptic_varcoeff(coef_, lifted, problem_.rho0, problem_.rhoT, r, opts);
}

FluxField UzawaContext::lifted_gradient(const ScalarField& phi) const {
  FluxField grad = gradient(phi);
  if (formulation_ == Formulation::indirect || ptilde_identity_) return grad;
  const Grid& g = problem_.grid;
  const int d = g.components();
  FluxField out(g);
  double v[kMaxSpaceDim + 1];
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const double* pt = ptilde_.data() + cell * d * d;
    for (int i = 0; i < d; ++i) v[i] = grad.at(i, cell);
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += pt[i * d + j] * v[j];
      out.at(i, cell) = acc;
    }
  }
  return out;
}

void UzawaContext::project_dual_cell(const double* in, double* out, std::size_t cell) const {
  const int n = problem_.model.n;
  ParaboloidPoint q;
  q.a = in[0];
  q.b = Eigen::Map<const Eigen::VectorXd>(in + 1, n);
  ParaboloidPoint res;
  if (formulation_ == Formulation::direct) {
    res = proj_K(q);
  } else if (kf_shared_) {
    const KfSet set(kf_[0], Eigen::Map<const Eigen::VectorXd>(kf_c_.data() + cell * n, n));
    res = proj_Kf(q, set);
  } else {
    res = proj_Kf(q, kf_[cell]);
  }
  out[0] = res.a;
  for (int i = 0; i < n; ++i) out[1 + i] = res.b(i);
}

namespace {

void step(UzawaState& s, const UzawaContext& ctx) {
  const UzawaParams& prm = ctx.params();
  const double r = prm.r, sp = prm.s, rr = prm.rho_r, rs = prm.rho_s;

  // 1. multiplier
  s.phi = ctx.solve_multiplier(s);
  const FluxField E = ctx.lifted_gradient(s.phi);

  // 2-3. p and nu, both from the previous p, nu
  {
    auto p = s.p.raw();
    auto nu = s.nu.raw();
    auto mu = s.mu.raw();
    auto e = E.raw();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double p0 = p[i], nu0 = nu[i];
      p[i] = p0 - rr * (mu[i] - nu0 + r * (p0 - e[i]));
      nu[i] = nu0 + rs * (e[i] - p0 - sp * (nu0 - mu[i]));
    }
  }

  // 4-6. q, b and eta
  const Grid& g = s.mu.grid();
  const int d = g.components();
  double w[kMaxSpaceDim + 1], q[kMaxSpaceDim + 1];
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    for (int c = 0; c < d; ++c) w[c] = s.b.at(c, cell) + s.eta.at(c, cell) / r;
    ctx.project_dual_cell(w, q, cell);
    for (int c = 0; c < d; ++c) {
      double& b = s.b.at(c, cell);
      double& eta = s.eta.at(c, cell);
      const double b0 = b, eta0 = eta, mu = s.mu.at(c, cell);
      b = b0 - rr * (eta0 - mu + r * (b0 - q[c]));
      eta = eta0 + rs * (b0 - q[c] - sp * (eta0 - mu));
    }
  }

  // 7. mu
  const CompiledConstraints& cc = ctx.constraints();
  SmallVec anchor(d);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    for (int c = 0; c < d; ++c)
      anchor(c) = 0.5 * (s.nu.at(c, cell) + s.eta.at(c, cell) + (s.p.at(c, cell) - s.b.at(c, cell)) / sp);
    const SmallVec mu = project_polyhedron(anchor, cc, cell);
    for (int c = 0; c < d; ++c) s.mu.at(c, cell) = mu(c);
  }
}

bool all_finite(const FluxField& f) {
  for (double v : f.raw())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

void step_indirect(UzawaState& state, const UzawaContext& ctx) {
  if (ctx.formulation() != Formulation::indirect) throw InvalidParameters("step_indirect needs an indirect context");
  step(state, ctx);
}

void step_direct(UzawaState& state, const UzawaContext& ctx) {
  if (ctx.formulation() != Formulation::direct) throw InvalidParameters("step_direct needs a direct context");
  step(state, ctx);
}

UzawaResult run_uzawa(const Problem& problem, Formulation formulation, const UzawaParams& params,
                      const UzawaObserver& observer) {
  const ParamCheck check = validate_params(params);
  if (!check.ok) throw InvalidParameters("step sizes rejected: " + check.message);
  if (params.max_iter < 0 || !(params.stop_tol > 0.0)) throw InvalidParameters("max_iter >= 0 and stop_tol > 0 required");
  validate_problem(problem);

  const auto start = std::chrono::steady_clock::now();
  const UzawaContext ctx(problem, formulation, params);
  UzawaResult res{ctx.initial_state(), {}};
  RunReport& rep = res.report;
  for (int it = 1; it <= params.max_iter; ++it) {
    const FluxField prev = res.state.mu;
    step(res.state, ctx);
    if (!all_finite(res.state.mu) || !all_finite(res.state.nu) || !all_finite(res.state.eta))
      throw DivergenceDetected("non-finite iterate at iteration " + std::to_string(it));
    FluxField diff = res.state.mu;
    diff -= prev;
    const double change = norm(diff) / std::max(norm(prev), 1e-300);
    const double residual = continuity_residual(problem, res.state.mu, formulation);
    rep.iterations = it;
    rep.change.push_back(change);
    rep.residual.push_back(residual);
    rep.cost.push_back(estimate_cost(problem, res.state.mu, formulation).cost);
    if (observer) observer(it, res.state);
    if (change < params.stop_tol && residual < 10.0 * params.stop_tol) {
      rep.converged = true;
      break;
    }
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace omt
