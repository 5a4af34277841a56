#include <cmath>
#include <random>

#include "doctest.h"
#include "dr_dense.hpp"
#include "omt/dr.hpp"
#include "omt/errors.hpp"
#include "omt/uzawa.hpp"
#include "oracle.hpp"

using namespace omt;
using drdense::Vec;

namespace {

SpaceSlice bump(const Grid& g, double c, double w) {
  SpaceSlice s(g);
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    const double x = g.x_center(k)[0];
    s[k] = std::exp(-0.5 * std::pow((x - c) / w, 2));
  }
  const double m = mass(s);
  for (double& v : s.values()) v /= m;
  return s;
}

Problem box_1d(int nt, int nx) {
  Grid g(1.0, nt, {nx});
  Problem p{g, SystemModel::single_integrator(1), bump(g, 0.3, 0.15), bump(g, 0.7, 0.15), {}};
  p.constraints.input = box_input_bounds({1.0});
  p.constraints.upper = ScalarField(g, 3.0);
  return p;
}

Problem di_2d(int nt, int nx) {
  Grid g(1.0, nt, {nx, nx});
  Problem p{g, SystemModel::double_integrator(), SpaceSlice(g, 1.0), SpaceSlice(g, 1.0), {}};
  p.constraints.input = box_input_bounds({1.0});
  p.constraints.upper = ScalarField(g, 2.0);
  for (std::size_t c = 0; c < g.cells(); ++c)
    if (g.index(c, 1) == 2 && g.index(c, 2) == 3) p.constraints.upper->values()[c] = 0.0;
  return p;
}

double rel_gap(const Grid& g, int rows, const Vec& a, const Vec& b) {
  return drdense::wnorm(g, rows, a - b) / std::max(drdense::wnorm(g, rows, b), 1e-300);
}

}  // namespace

TEST_CASE("apply_A on simple fields") {
  Grid g(1.0, 5, {4});
  FluxField mu(g);
  EtaField a = apply_A(mu);
  CHECK(norm(a.interior) == 0.0);
  CHECK(norm(a.first) == 0.0);
  for (double& v : mu.component(0)) v = 2.5;
  a = apply_A(mu);
  CHECK(norm(a.interior) <= 1e-14);
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    CHECK(a.first[k] == doctest::Approx(2.5));
    CHECK(a.last[k] == doctest::Approx(2.5));
  }
}

TEST_CASE("A mu = theta is the discrete continuity equation") {
  Problem p = box_1d(6, 5);
  const Grid& g = p.grid;
  std::mt19937_64 rng(4);
  FluxField mu(g);
  std::normal_distribution<double> nd;
  for (double& v : mu.raw()) v = nd(rng);
  const EtaField a = apply_A(mu);
  ScalarField dmu = divergence(mu);
  dmu -= continuity_target(p);
  const DRContext ctx(p, {});
  for (int it = 0; it < g.nt(); ++it)
    for (std::size_t k = 0; k < g.space_cells(); ++k) {
      const std::size_t c = it * g.space_cells() + k;
      if (it == 0)
        CHECK(a.first[k] - ctx.theta().first[k] == doctest::Approx(g.dt() * dmu[c]));
      else if (it == g.nt() - 1)
        CHECK(a.last[k] - ctx.theta().last[k] == doctest::Approx(-g.dt() * dmu[c]));
      else
        CHECK(a.interior[c] == doctest::Approx(dmu[c]));
    }
}

TEST_CASE("apply_A adjoint") {
  for (const Grid& g : {Grid(1.0, 6, {5}), Grid(2.0, 4, {3, 5})}) {
    const auto n = static_cast<int>(g.cells() * g.components());
    const auto m = static_cast<int>(drdense::eta_size(g));
    auto fwd = [&](const Vec& x) {
      FluxField mu(g);
      for (int i = 0; i < n; ++i) mu.raw()[i] = x(i);
      return drdense::flatten(apply_A(mu));
    };
    auto adj = [&](const Vec& y) {
      const FluxField r = apply_A_adjoint(drdense::eta_from(g, y));
      return Vec(Eigen::Map<const Vec>(r.raw().data(), n));
    };
    Vec wx = Vec::Constant(n, g.cell_volume());
    Vec wy(m);
    wy.head(g.cells()).setConstant(g.cell_volume());
    wy.tail(2 * g.space_cells()).setConstant(g.space_volume());
    CHECK(oracle::adjoint_check(fwd, adj, n, m, 20, wx, wy) <= 1e-12);
    auto broken = [&](const Vec& y) {
      Vec r = adj(y);
      r(1) *= 1.01;
      return r;
    };
    CHECK(oracle::adjoint_check(fwd, broken, n, m, 20, wx, wy) > 1e-6);
  }
}

TEST_CASE("Q inverts I + R'R") {
  Problem p = di_2d(4, 4);
  const DRContext ctx(p, {});
  const CompiledConstraints& cc = ctx.constraints();
  const int d = cc.dim;
  double worst = 0.0;
  for (std::size_t cell = 0; cell < p.grid.cells(); ++cell) {
    SmallMat m = SmallMat::Identity(d, d);
    for (int k = 0; k < cc.rows; ++k) {
      const Eigen::Map<const SmallVec> a(cc.row(cell, k), d);
      m += a * a.transpose();
    }
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> q(
        ctx.Q(cell).data(), d, d);
    worst = std::max(worst, (m * q - SmallMat::Identity(d, d)).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("prox_F is separable") {
  Problem p = box_1d(5, 4);
  const Grid& g = p.grid;
  const DRContext ctx(p, {});
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  FluxField muhat(g);
  for (double& v : muhat.raw()) v = nd(rng);
  EtaField etahat(g);
  for (double& v : etahat.interior.values()) v = nd(rng);
  std::vector<double> xihat(g.cells() * ctx.rows());
  for (std::size_t i = 0; i < xihat.size(); ++i) xihat[i] = ctx.constraints().rhs[i] - std::abs(nd(rng));

  const Triple out = ctx.prox_F(muhat, etahat, xihat);
  CHECK(drdense::flatten(out.eta) == drdense::flatten(ctx.theta()));
  CHECK(out.xi == xihat);

  std::vector<double> over = xihat;
  for (double& v : over) v += 10.0;
  const Triple capped = ctx.prox_F(muhat, etahat, over);
  for (std::size_t i = 0; i < over.size(); ++i) CHECK(capped.xi[i] == ctx.constraints().rhs[i]);

  const oracle::Mat Bdag = oracle::Mat::Identity(1, 1);
  for (std::size_t c = 0; c < g.cells(); c += 3) {
    const Vec v = Vec{{muhat.at(0, c), muhat.at(1, c)}};
    const Vec ref = oracle::brute_prox_M(v, Bdag, Vec::Zero(1));
    CHECK(std::abs(out.mu.at(0, c) - ref(0)) <= 1e-6);
    CHECK(std::abs(out.mu.at(1, c) - ref(1)) <= 1e-6);
  }
}

TEST_CASE("prox_N matches the dense projection") {
  for (const Problem& p : {box_1d(8, 8), di_2d(6, 6)}) {
    const Grid& g = p.grid;
    const DRContext ctx(p, {});
    const auto proj = drdense::make_projection(ctx);
    std::mt19937_64 rng(17);
    double worst = 0.0, worst_idem = 0.0, worst_dense_idem = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Vec z = drdense::random_vec(proj.size(), rng);
      const Triple in = drdense::triple_from(g, ctx.rows(), z);
      const Triple out = ctx.prox_N(in.mu, in.eta, in.xi);
      const Vec ref = proj.project(z);
      const Vec got = drdense::flatten(out);
      worst = std::max(worst, rel_gap(g, ctx.rows(), got, ref));
      const Triple again = ctx.prox_N(out.mu, out.eta, out.xi);
      worst_idem = std::max(worst_idem, rel_gap(g, ctx.rows(), drdense::flatten(again), got));
      worst_dense_idem = std::max(worst_dense_idem, rel_gap(g, ctx.rows(), proj.project(ref), ref));
    }
    MESSAGE("grid " << g.cells() << " cells: relative gap " << worst << ", idempotence " << worst_idem);
    CHECK(worst <= 1e-6);
    CHECK(worst_idem <= 1e-8);
    CHECK(worst_dense_idem <= 1e-10);

    const Triple zero = ctx.prox_N(FluxField(g), EtaField(g), std::vector<double>(g.cells() * ctx.rows()));
    CHECK(drdense::flatten(zero).norm() == 0.0);
  }
}

TEST_CASE("literal recovery coefficient is not a projection") {
  Problem p = box_1d(8, 8);
  DRParams prm;
  prm.literal_q = true;
  const DRContext lit(p, prm);
  const auto proj = drdense::make_projection(lit);
  std::mt19937_64 rng(5);
  const Vec z = drdense::random_vec(proj.size(), rng);
  const Triple in = drdense::triple_from(p.grid, lit.rows(), z);
  const Triple out = lit.prox_N(in.mu, in.eta, in.xi);
  const double gap = rel_gap(p.grid, lit.rows(), drdense::flatten(out), proj.project(z));
  MESSAGE("literal variant relative gap " << gap);
  CHECK(gap > 1e-3);
}

TEST_CASE("step bookkeeping") {
  Problem p = box_1d(8, 8);
  const DRContext ctx(p, {});
  DRState s = ctx.initial_state();
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (double& v : s.eta.interior.values()) v = nd(rng);
  for (double& v : s.eta_bar.first.values()) v = nd(rng);
  const EtaField eta0 = s.eta, bar0 = s.eta_bar;
  dr_step(s, ctx);
  // eta+ = eta + theta - eta_bar, whatever the reflection was.
  for (std::size_t i = 0; i < p.grid.cells(); ++i)
    CHECK(s.eta.interior[i] == doctest::Approx(eta0.interior[i] - bar0.interior[i]));
  for (std::size_t k = 0; k < p.grid.space_cells(); ++k)
    CHECK(s.eta.first[k] == doctest::Approx(eta0.first[k] + p.rho0[k] - bar0.first[k]));
  // Pointwise-feasible side.
  for (std::size_t c = 0; c < p.grid.cells(); ++c) {
    CHECK(s.mu_prox.at(0, c) >= 0.0);
    CHECK(std::abs(s.mu_prox.at(1, c)) <= s.mu_prox.at(0, c) + 1e-12);
  }
  // Projected side satisfies the linear constraints.
  const EtaField a = apply_A(s.mu_bar);
  CHECK(drdense::flatten(a) == drdense::flatten(s.eta_bar));
  CHECK(ctx.apply_R(s.mu_bar) == s.xi_bar);
}

TEST_CASE("static density is the zero-transport optimum") {
  Grid g(1.0, 16, {16, 16});
  Problem p{g, SystemModel::single_integrator(2), SpaceSlice(g, 1.0), SpaceSlice(g, 1.0), {}};
  DRParams prm;
  prm.max_iter = 200;
  const DRResult res = run_dr(p, prm);
  CHECK(res.report.iterations <= 200);
  CHECK(res.report.residual.back() < 1e-4);
  double worst_rho = 0.0, worst_m = 0.0;
  for (std::size_t c = 0; c < g.cells(); ++c) {
    worst_rho = std::max(worst_rho, std::abs(res.state.mu_bar.at(0, c) - 1.0));
    for (int k = 1; k < 3; ++k) worst_m = std::max(worst_m, std::abs(res.state.mu_bar.at(k, c)));
  }
  CHECK(worst_rho <= 1e-6);
  CHECK(worst_m <= 1e-6);
}

TEST_CASE("max_iter = 0 returns the initialization") {
  Problem p = box_1d(8, 8);
  DRParams prm;
  prm.max_iter = 0;
  const DRResult res = run_dr(p, prm);
  CHECK(res.report.iterations == 0);
  CHECK(res.report.residual.empty());
  const DRState init = DRContext(p, prm).initial_state();
  CHECK(drdense::flatten(Triple{res.state.mu_bar, res.state.eta_bar, res.state.xi_bar}) ==
        drdense::flatten(Triple{init.mu_bar, init.eta_bar, init.xi_bar}));
}

TEST_CASE("fixed-point increments do not grow") {
  Problem p = box_1d(16, 16);
  DRParams prm;
  prm.max_iter = 50;
  prm.stop_tol = 1e-14;
  const DRResult res = run_dr(p, prm);
  REQUIRE(res.increment.size() == 50);
  // The initial bars are not projections of the initial point, so the governing
  // sequence starts at the first projected iterate.
  for (std::size_t i = 2; i < res.increment.size(); ++i)
    CHECK(res.increment[i] <= res.increment[i - 1] * (1.0 + 1e-6) + 1e-9);
  CHECK(res.increment.back() < 0.5 * res.increment[1]);
}

TEST_CASE("DR and Uzawa agree on free transport") {
  Grid g(1.0, 32, {32});
  Problem p{g, SystemModel::single_integrator(1), bump(g, 0.3, 0.07), bump(g, 0.7, 0.07), {}};
  DRParams dp;
  dp.max_iter = 1000;
  const DRResult dr = run_dr(p, dp);
  UzawaParams up;
  up.max_iter = 1000;
  const UzawaResult uz = run_uzawa(p, Formulation::indirect, up);
  const double cd = estimate_cost(p, dr.state.mu_bar, Formulation::dr).cost;
  const double cu = estimate_cost(p, uz.state.mu, Formulation::indirect).cost;
  MESSAGE("dr cost " << cd << " residual " << dr.report.residual.back() << " iterations " << dr.report.iterations
                     << "; uzawa cost " << cu);
  CHECK(std::abs(cd - cu) <= 0.05 * cu);
}

TEST_CASE("DR rejects state-dependent input matrices") {
  Grid g(1.0, 4, {4, 4});
  SystemModel m = SystemModel::single_integrator(2);
  m.B_constant = false;
  Problem p{g, m, SpaceSlice(g, 1.0), SpaceSlice(g, 1.0), {}};
  CHECK_THROWS_AS(DRContext(p, {}), UnsupportedForDR);
}
