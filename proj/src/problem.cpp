#include "omt/problem.hpp"

#include <cmath>
#include <string>

#include "omt/errors.hpp"

namespace omt {

namespace {

constexpr double kRhoFloor = 1e-12;

// Per-cell input energy density (rho |u|^2 / 2) at a cell with rho > floor.
struct Integrand {
  const Problem& p;
  Formulation formulation;
  bool constant_bdag;
  SmallMat bdag;

  Integrand(const Problem& p_, Formulation f) : p(p_), formulation(f), constant_bdag(p_.model.B_constant) {
    if (constant_bdag) bdag = pseudo_inverse(p.model.B(0.0, cell_state(p.grid, 0)));
  }

  double operator()(std::size_t cell, const SmallVec& mu) const {
    const int n = p.model.n;
    const double rho = mu(0);
    if (formulation == Formulation::direct) {
      const double mu2 = mu.segment(1, p.model.r).squaredNorm();
      return 0.5 * mu2 / rho;
    }
    const double t = p.grid.t_center(p.grid.time_index(cell));
    const SmallVec x = cell_state(p.grid, cell);
    const SmallMat bd = constant_bdag ? bdag : pseudo_inverse(p.model.B(t, x));
    const SmallVec u = bd * (mu.tail(n) - rho * p.model.f(t, x));
    return 0.5 * u.squaredNorm() / rho;
  }
};

SmallVec cell_mu(const FluxField& mu, std::size_t cell) {
  SmallVec v(mu.components());
  for (int c = 0; c < mu.components(); ++c) v(c) = mu.at(c, cell);
  return v;
}

}  // namespace

void validate_problem(const Problem& p) {
  require_same_grid(p.grid, p.rho0.grid());
  require_same_grid(p.grid, p.rhoT.grid());
  if (p.model.n != p.grid.space_dim()) throw InvalidParameters("model dimension does not match the grid");
  for (const SpaceSlice* s : {&p.rho0, &p.rhoT})
    for (double v : s->values())
      if (!std::isfinite(v) || v < 0.0) throw InvalidParameters("densities must be finite and nonnegative");
  const double m0 = mass(p.rho0), mT = mass(p.rhoT);
  if (!(m0 > 0.0)) throw InvalidParameters("initial density has zero mass");
  if (std::abs(m0 - mT) > 1e-9 * m0)
    throw InvalidParameters("initial and terminal masses differ: " + std::to_string(m0) + " vs " + std::to_string(mT));
}

ScalarField continuity_target(const Problem& p) {
  const Grid& g = p.grid;
  ScalarField theta(g);
  auto first = theta.layer(0);
  auto last = theta.layer(g.nt() - 1);
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    first[k] = p.rho0[k] / g.dt();
    last[k] = -p.rhoT[k] / g.dt();
  }
  return theta;
}

FluxField physical_flux(const Problem& p, const FluxField& mu, Formulation formulation) {
  if (formulation != Formulation::direct) return mu;
  const Grid& g = p.grid;
  FluxField out(g);
  const int d = g.components();
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const SmallMat pt = assemble_Ptilde(p.model, g.t_center(g.time_index(cell)), cell_state(g, cell));
    const SmallVec v = pt.transpose() * cell_mu(mu, cell);
    for (int c = 0; c < d; ++c) out.at(c, cell) = v(c);
  }
  return out;
}

double continuity_residual(const Problem& p, const FluxField& mu, Formulation formulation) {
  ScalarField r = divergence(physical_flux(p, mu, formulation));
  const ScalarField theta = continuity_target(p);
  r -= theta;
  return norm(r) / norm(theta);
}

double compute_cost(const Problem& p, const FluxField& mu, Formulation formulation) {
  const Integrand integrand(p, formulation);
  double total = 0.0;
  for (std::size_t cell = 0; cell < p.grid.cells(); ++cell) {
    const SmallVec v = cell_mu(mu, cell);
    if (v(0) <= kRhoFloor) {
      if (v.tail(v.size() - 1).norm() > 1e-10)
        throw InfeasibleKinetic("momentum without density at cell " + std::to_string(cell));
      continue;
    }
    total += integrand(cell, v);
  }
  return total * p.grid.cell_volume();
}

CostEstimate estimate_cost(const Problem& p, const FluxField& mu, Formulation formulation) {
  const Integrand integrand(p, formulation);
  CostEstimate out;
  for (std::size_t cell = 0; cell < p.grid.cells(); ++cell) {
    const SmallVec v = cell_mu(mu, cell);
    if (v(0) <= kRhoFloor) {
      if (v.tail(v.size() - 1).norm() > 1e-10) ++out.degenerate_cells;
      continue;
    }
    out.cost += integrand(cell, v);
  }
  out.cost *= p.grid.cell_volume();
  return out;
}

std::vector<double> layer_masses(const FluxField& mu_phys) {
  const Grid& g = mu_phys.grid();
  std::vector<double> out(g.nt(), 0.0);
  auto rho = mu_phys.component(0);
  for (int it = 0; it < g.nt(); ++it) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.space_cells(); ++k) s += rho[it * g.space_cells() + k];
    out[it] = s * g.space_volume();
  }
  return out;
}

}  // namespace omt
