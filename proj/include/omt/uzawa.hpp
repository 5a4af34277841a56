#pragma once

#include <functional>
#include <memory>
#include <string>

#include "omt/elliptic.hpp"
#include "omt/pointwise.hpp"
#include "omt/problem.hpp"

namespace omt {

struct UzawaParams {
  double r = 1.0;
  double s = 1.0;
  double rho_r = 0.5;
  double rho_s = 0.5;
  int max_iter = 2000;
  double stop_tol = 1e-5;
  EllipticOptions elliptic{};
  KfVariant kf = KfVariant::drift;
};

struct ParamCheck {
  bool ok = false;
  double first = 0.0;   // 2s - rho_r - rho_s s^2 - |rho_r r - rho_s s|
  double second = 0.0;  // 2r - rho_r r^2 - rho_s - |rho_r r - rho_s s|
  bool duals_frozen = false;
  std::string message;
};

/// Checks the step-size conditions; ok iff both quantities are strictly positive.
ParamCheck validate_params(const UzawaParams& p);

struct UzawaState {
  ScalarField phi;
  FluxField p, b, mu, nu, eta;
};

/// Per-cell data shared by all iterations of one run.
class UzawaContext {
 public:
  UzawaContext(const Problem& problem, Formulation formulation, const UzawaParams& params);

  const Problem& problem() const { return problem_; }
  Formulation formulation() const { return formulation_; }
  const UzawaParams& params() const { return params_; }
  const CompiledConstraints& constraints() const { return constraints_; }

  /// phi = p = b = nu = eta = 0; mu = (linear interpolation of rho, 0).
  UzawaState initial_state() const;

  /// The multiplier phi for the current state.
  ScalarField solve_multiplier(const UzawaState& s) const;
  /// E phi: the gradient, or P~ times the gradient for direct variables.
  FluxField lifted_gradient(const ScalarField& phi) const;
  /// Dual projection (onto K or K_f) at one cell.
  void project_dual_cell(const double* in, double* out, std::size_t cell) const;

 private:
  Problem problem_;
  Formulation formulation_;
  UzawaParams params_;
  CompiledConstraints constraints_;
  // Indirect: K_f data (shared spectral data when B is constant).
  std::vector<KfSet> kf_;
  std::vector<double> kf_c_;  // cells x n, used with kf_[0] when shared
  bool kf_shared_ = false;
  // Direct: P~ per cell (row-major (n+1)^2) and the coefficient P~^T P~.
  std::vector<double> ptilde_;
  bool ptilde_identity_ = false;
  CoefficientField coef_;
};

void step_indirect(UzawaState& state, const UzawaContext& ctx);
void step_direct(UzawaState& state, const UzawaContext& ctx);

struct UzawaResult {
  UzawaState state;
  RunReport report;
};

/// Called after every iteration with the iteration index (1-based).
using UzawaObserver = std::function<void(int, const UzawaState&)>;

/// Runs the direct or indirect iteration until both the relative change of
/// mu and the continuity residual meet stop_tol (residual against 10 stop_tol),
/// or max_iter. Throws InvalidParameters for rejected step sizes and
/// DivergenceDetected on non-finite iterates.
UzawaResult run_uzawa(const Problem& problem, Formulation formulation, const UzawaParams& params,
                      const UzawaObserver& observer = {});

}  // namespace omt
