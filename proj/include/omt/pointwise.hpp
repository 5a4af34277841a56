#pragma once

#include "omt/dynamics.hpp"

namespace omt {

/// (a, b) with scalar part a and vector part b.
struct ParaboloidPoint {
  double a = 0.0;
  SmallVec b;
};

/// Euclidean projection onto K = {(a, b): a + |b|^2/2 <= 0}.
ParaboloidPoint proj_K(const ParaboloidPoint& q);

/// K_f = {(alpha, beta): alpha + c.beta + beta' G beta / 2 <= 0} with its
/// spectral data, reusable across cells that share G.
struct KfSet {
  SmallVec c;
  SmallMat gram;
  SmallMat basis;   // eigenvectors of G
  SmallVec lambda;  // eigenvalues of G, clipped at 0
  bool plain = false;  // c = 0 and G = I, i.e. the set is K

  KfSet() = default;
  KfSet(const SmallVec& c, const SmallMat& gram);
  /// Reuse the eigen-decomposition of `shared` with a different c.
  KfSet(const KfSet& shared, const SmallVec& c);
  double value(const ParaboloidPoint& q) const;
};

ParaboloidPoint proj_Kf(const ParaboloidPoint& q, const KfSet& set);
ParaboloidPoint proj_Kf(const ParaboloidPoint& q, const SmallVec& c, const SmallMat& gram);

enum class ProxMVariant {
  /// Exact prox of M: the rho-equation uses the new rho in the denominator.
  exact,
  /// Denominator frozen at the anchor rho-hat, as printed.
  literal,
};

/// Data of M(rho, m) = |B^+(m - rho f)|^2 / (2 rho).
struct ProxMData {
  SmallVec f;
  SmallMat basis;   // eigenvectors of W = B^+' B^+
  SmallVec lambda;  // eigenvalues of W
  double fWf = 0.0;

  ProxMData() = default;
  ProxMData(const SmallMat& Bdag, const SmallVec& f);
  ProxMData(const ProxMData& shared, const SmallVec& f);
  /// M at (rho, m) = mu; +inf outside the domain, lower-semicontinuous at rho = 0.
  double M(const SmallVec& mu) const;
};

/// argmin_mu |mu - muhat|^2/2 + M(mu), mu = (rho, m).
SmallVec prox_M_point(const SmallVec& muhat, const ProxMData& data, ProxMVariant variant = ProxMVariant::exact);
SmallVec prox_M_point(const SmallVec& muhat, const SmallMat& Bdag, const SmallVec& f,
                      ProxMVariant variant = ProxMVariant::exact);

/// Euclidean projection onto {mu: A mu <= c}, A given row-major (rows x dim).
/// Dual active-set method; exact up to rounding. Throws ProjectionFailure if the
/// set is empty or the active set cycles.
SmallVec project_polyhedron(const SmallVec& mu, const double* A, const double* c, int rows);
SmallVec project_polyhedron(const SmallVec& mu, const CompiledConstraints& cc, std::size_t cell);

/// Componentwise min(xi, gamma).
void clamp_cap(std::span<double> xi, std::span<const double> gamma);

}  // namespace omt
