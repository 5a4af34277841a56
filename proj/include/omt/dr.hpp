#pragma once

#include <functional>
#include <vector>

#include "omt/elliptic.hpp"
#include "omt/pointwise.hpp"
#include "omt/problem.hpp"

namespace omt {

/// Values of the operator A: the space-time divergence on interior time layers
/// (zero on the first and last layer) and the boundary traces of rho.
struct EtaField {
  ScalarField interior;
  SpaceSlice first, last;

  explicit EtaField(const Grid& g) : interior(g), first(g), last(g) {}
  EtaField() = default;
};

/// Weighted inner product: cell volume on `interior`, space volume on the traces.
double inner(const EtaField& a, const EtaField& b);

/// A mu. The traces are dt (D mu) on the first layer and -dt (D mu) on the last
/// one, so {A mu = (0, rho0, rhoT)} is exactly D mu = continuity_target.
EtaField apply_A(const FluxField& mu);
/// Adjoint of apply_A for the weighted inner products.
FluxField apply_A_adjoint(const EtaField& eta);

struct DRParams {
  int max_iter = 2000;
  double stop_tol = 1e-5;
  EllipticOptions elliptic{1e-10};
  ProxMVariant prox_m = ProxMVariant::exact;
  /// Recover mu with (I + R'R) instead of its inverse Q, as printed. Not a projection.
  bool literal_q = false;
};

struct DRState {
  FluxField mu;
  EtaField eta;
  std::vector<double> xi;  // cells x rows
  FluxField mu_bar;
  EtaField eta_bar;
  std::vector<double> xi_bar;
  /// Last prox_F output for mu; satisfies the pointwise constraints.
  FluxField mu_prox;
  /// Warm start for the prox_N multiplier.
  ScalarField lambda;
};

struct Triple {
  FluxField mu;
  EtaField eta;
  std::vector<double> xi;
};

class DRContext {
 public:
  DRContext(const Problem& problem, const DRParams& params);

  const Problem& problem() const { return problem_; }
  const DRParams& params() const { return params_; }
  const CompiledConstraints& constraints() const { return constraints_; }
  int rows() const { return constraints_.rows; }
  /// (0, rho0, rhoT).
  const EtaField& theta() const { return theta_; }
  /// Q = (I + R'R)^-1 per cell, row-major (n+1)^2.
  std::span<const double> Q(std::size_t cell) const { return q_.at(cell); }

  std::vector<double> apply_R(const FluxField& mu) const;
  FluxField apply_RT(const std::vector<double>& xi) const;

  /// Separable prox: prox_M per cell, theta, and the cap clamp.
  Triple prox_F(const FluxField& muhat, const EtaField& etahat, const std::vector<double>& xihat) const;
  /// Projection onto {A mu = eta, R mu = xi} in the weighted norm. `warm` is
  /// used as the initial multiplier and overwritten with the solution.
  Triple prox_N(const FluxField& mu, const EtaField& eta, const std::vector<double>& xi,
                ScalarField* warm = nullptr, SolveReport* report = nullptr) const;

  /// mu = mu_bar = linear interpolation, eta = eta_bar = theta, xi = xi_bar = clamp(R mu).
  DRState initial_state() const;

 private:
  Problem problem_;
  DRParams params_;
  CompiledConstraints constraints_;
  EtaField theta_;
  CoefficientField q_;     // operator and recovery coefficient
  ProxMData prox_shared_;
  std::vector<double> f_;  // cells x n
};

/// One iteration: reflect, prox_F, prox_N. Returns the weighted norm of the
/// fixed-point increment prox_F(2 z_bar - z) - z_bar over all of (mu, eta, xi).
double dr_step(DRState& state, const DRContext& ctx);

struct DRResult {
  DRState state;
  RunReport report;
  std::vector<double> increment;
};

using DRObserver = std::function<void(int, const DRState&)>;

/// Iterates until the relative change of mu_bar is below stop_tol or max_iter.
/// The reported solution is mu_bar.
DRResult run_dr(const Problem& problem, const DRParams& params, const DRObserver& observer = {});

}  // namespace omt
