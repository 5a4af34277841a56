#pragma once

#include <span>
#include <string>
#include <vector>

#include "omt/grid.hpp"

namespace omt {

struct EllipticOptions {
  enum class Method { automatic, cg, dct };

  double tol = 1e-8;  ///< relative residual
  int max_iter = 0;   ///< 0 selects 10 * sqrt(cells)
  Method method = Method::automatic;
  /// Optional warm start for the iterative path.
  const ScalarField* initial_guess = nullptr;
};

struct SolveReport {
  std::string method;
  int iterations = 0;
  double relative_residual = 0.0;
  /// Quadratic energy 0.5 x'Ax - b'x after every CG iteration.
  std::vector<double> energy;
};

/// Symmetric (n+1)x(n+1) matrix per cell, stored densely.
class CoefficientField {
 public:
  CoefficientField() = default;
  explicit CoefficientField(const Grid& g);
  static CoefficientField identity(const Grid& g);

  const Grid& grid() const { return grid_; }
  int dim() const { return d_; }
  bool is_identity() const { return identity_; }
  std::span<double> at(std::size_t cell) { identity_ = false; return {m_.data() + cell * d_ * d_, std::size_t(d_ * d_)}; }
  std::span<const double> at(std::size_t cell) const { return {m_.data() + cell * d_ * d_, std::size_t(d_ * d_)}; }

  /// Throws NonSPDCoefficient when a cell is not symmetric positive definite.
  void validate_spd(double tol = 1e-10) const;

 private:
  Grid grid_;
  int d_ = 0;
  bool identity_ = false;
  std::vector<double> m_;
};

/// Data on the spatial faces x_i = 0 (lo) and x_i = 1 (hi).
/// Entry [i][k] is indexed by the cell index with axis i+1 removed (face_index).
struct FaceData {
  std::vector<std::vector<double>> lo, hi;
  static FaceData zeros(const Grid& g);
};

std::size_t face_index(const Grid& g, int axis, std::size_t cell);

/// y = shift*phi + boundary_mass*(phi on the first and last time layers)
///     - scale * divergence(coef * gradient(phi)).
struct ScreenedOperator {
  CoefficientField coef;
  double shift = 0.0;
  double boundary_mass = 0.0;
  double scale = 1.0;
};

ScalarField apply(const ScreenedOperator& op, const ScalarField& phi);

/// Solves op(phi) = rhs. With shift = boundary_mass = 0 the operator is the pure
/// Neumann one: rhs is projected onto mean zero and the returned phi is mean-zero.
ScalarField solve_screened(const ScreenedOperator& op, const ScalarField& rhs,
                           const EllipticOptions& opts = {}, SolveReport* report = nullptr);

/// -r L phi = rhs - b0/dt (first time layer) + bT/dt (last time layer), homogeneous
/// Neumann on spatial faces, mean-zero solution.
ScalarField solve_poisson_neumann(const ScalarField& rhs, const SpaceSlice& b0, const SpaceSlice& bT,
                                  double r, const EllipticOptions& opts = {},
                                  SolveReport* report = nullptr);

/// -r D(coef G phi) = D(rhs_flux) - b0/dt (first layer) + bT/dt (last layer).
ScalarField solve_elliptic_varcoeff(const CoefficientField& coef, const FluxField& rhs_flux,
                                    const SpaceSlice& b0, const SpaceSlice& bT, double r,
                                    const EllipticOptions& opts = {},
                                    SolveReport* report = nullptr);

/// -Delta phi + phi = rhs with d_t phi - phi = s0 at t = 0, d_t phi + phi = sT at
/// t = T and d_i phi = side on the spatial faces.
ScalarField solve_helmholtz_robin(const ScalarField& rhs, const SpaceSlice& s0, const SpaceSlice& sT,
                                  const FaceData& side, const EllipticOptions& opts = {},
                                  SolveReport* report = nullptr);

/// Operator of solve_helmholtz_robin, exposed for symmetry checks.
ScreenedOperator helmholtz_robin_operator(const Grid& g);

}  // namespace omt
