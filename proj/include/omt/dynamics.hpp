#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "omt/grid.hpp"

namespace omt {

// Small dense types sized for n <= 3 (n+1 <= 4); no heap allocation.
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxSpaceDim + 1, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSpaceDim + 1, kMaxSpaceDim + 1>;

/// dx/dt = f(t,x) + B(t,x) u with x in R^n, u in R^r.
struct SystemModel {
  std::string name;
  int n = 0;
  int r = 0;
  std::function<SmallVec(double t, const SmallVec& x)> f;
  std::function<SmallMat(double t, const SmallVec& x)> B;
  bool B_constant = false;
  bool Bdagf_constant = false;

  static SystemModel double_integrator();
  /// f = 0, B = I_n.
  static SystemModel single_integrator(int n);
  /// f = A x with constant B.
  static SystemModel linear(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

  SmallVec drift(double t, const SmallVec& x) const { return f(t, x); }
  SmallMat input(double t, const SmallVec& x) const { return B(t, x); }
};

/// (B^T B)^{-1} B^T. Throws RankDeficient if B is not of full column rank.
SmallMat pseudo_inverse(const SmallMat& B);

/// Orthonormal basis of range(B)^perp, picked greedily from the identity columns.
SmallMat complete_basis(const SmallMat& B);

/// P = [1 f^T; 0 B^T], (r+1) x (n+1).
SmallMat assemble_P(const SystemModel& model, double t, const SmallVec& x);
/// P~ = [1 f^T; 0 [B B2]^T], (n+1) x (n+1).
SmallMat assemble_Ptilde(const SystemModel& model, double t, const SmallVec& x);

enum class KfVariant {
  /// c = f: the support function is |B^+(m - rho f)|^2/(2 rho) restricted to
  /// m - rho f in range(B), i.e. the controlled dynamics.
  drift,
  /// c = B B^+ f as printed; only differs when f leaves range(B).
  range_projected,
};

struct KfParams {
  SmallVec c;
  SmallMat gram;  // B B^T
};

/// K_f = {(alpha, beta): alpha + c.beta + beta' Gram beta / 2 <= 0}.
KfParams kf_params(const SystemModel& model, double t, const SmallVec& x,
                   KfVariant variant = KfVariant::drift);

/// Spatial coordinates of a cell as a SmallVec of length n.
SmallVec cell_state(const Grid& g, std::size_t cell);

/// a.u + b <= 0.
struct InputHalfspace {
  std::vector<double> a;
  double b = 0.0;
};

/// |u_i| <= k_i as halfspaces.
std::vector<InputHalfspace> box_input_bounds(const std::vector<double>& k);

struct ConstraintSpec {
  std::vector<InputHalfspace> input;
  /// Density bounds g <= rho <= h; g defaults to 0, h to +inf.
  std::optional<ScalarField> lower;
  std::optional<ScalarField> upper;
};

/// Broadcast a spatial field to every time layer.
ScalarField broadcast(const Grid& g, const SpaceSlice& s);

enum class Formulation { direct, indirect, dr };

/// Per-cell halfspaces a.mu <= c in (rho, m) coordinates, rows unit-normalized.
/// Every cell carries the same number of rows, stored densely.
struct CompiledConstraints {
  Grid grid;
  Formulation formulation = Formulation::indirect;
  int dim = 0;
  int rows = 0;
  std::vector<double> coeff;  // cells x rows x dim
  std::vector<double> rhs;    // cells x rows

  const double* row(std::size_t cell, int k) const { return coeff.data() + (cell * rows + k) * dim; }
  double bound(std::size_t cell, int k) const { return rhs[cell * rows + k]; }
  /// True when the coefficient block is identical in every cell.
  bool constant_rows(double tol = 0.0) const;
  /// max_k (a_k.mu - c_k) at one cell.
  double violation(std::size_t cell, const SmallVec& mu) const;
};

/// Throws EmptyFeasibleSet if g > h somewhere, UnsupportedForDR if the DR
/// formulation is requested for a model without constant B and B^+ f.
CompiledConstraints compile_constraints(const SystemModel& model, const ConstraintSpec& spec,
                                        const Grid& g, Formulation formulation);

}  // namespace omt
