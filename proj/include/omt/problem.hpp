#pragma once

#include <string>
#include <vector>

#include "omt/dynamics.hpp"

namespace omt {

/// Density steering problem on a grid: transport rho0 to rhoT under the model
/// and constraints at minimal control energy.
struct Problem {
  Grid grid;
  SystemModel model;
  SpaceSlice rho0;
  SpaceSlice rhoT;
  ConstraintSpec constraints;
};

/// Throws InvalidParameters on mismatched grids, negative or non-finite
/// densities, or unequal masses (relative 1e-9).
void validate_problem(const Problem& p);

/// Right-hand side of the discrete continuity equation D mu = theta:
/// rho0/dt on the first time layer, -rhoT/dt on the last, 0 elsewhere.
ScalarField continuity_target(const Problem& p);

/// (rho, rho v) from the solver variables: identity for indirect/DR variables,
/// P~^T mu for direct variables (rho, rho u, rho v_aux).
FluxField physical_flux(const Problem& p, const FluxField& mu, Formulation formulation);

/// |D mu_phys - theta| / |theta| with cell-volume weights.
double continuity_residual(const Problem& p, const FluxField& mu, Formulation formulation);

/// Control energy: integral of |u|^2 rho / 2, i.e. |B^+(m - rho f)|^2 / (2 rho)
/// for indirect variables and |m_u|^2 / (2 rho) for direct ones.
/// Cells with rho <= 1e-12 must carry |m| <= 1e-10 or InfeasibleKinetic is thrown.
double compute_cost(const Problem& p, const FluxField& mu, Formulation formulation);

/// Same integrand, but cells with rho <= 1e-12 are skipped and counted instead of throwing.
struct CostEstimate {
  double cost = 0.0;
  std::size_t degenerate_cells = 0;
};
CostEstimate estimate_cost(const Problem& p, const FluxField& mu, Formulation formulation);

/// Per-time-layer densities recovered by the scheme: rho at each cell layer.
std::vector<double> layer_masses(const FluxField& mu_phys);

struct RunReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual;   // continuity residual per iteration
  std::vector<double> cost;       // cost per iteration
  std::vector<double> change;     // relative change of the reported iterate
  double wall_seconds = 0.0;
};

}  // namespace omt
