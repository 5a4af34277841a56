#pragma once

// Brute-force references for tests. Deliberately slow and independent of the
// solver code paths: no shared root finders, eigenbases or active-set logic.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct SearchSpec {
  int points = 11;       // per dimension
  int rounds = 80;       // refinement rounds
  double shrink = 0.6;   // box half-width factor per round
  int max_expansions = 400;
};

struct BoundaryHit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimize `objective` over the box center +- half by grid search with
/// refinement around the incumbent. Coordinates flagged in `nonneg` are clipped
/// at 0. The box is doubled whenever the incumbent sits on its edge.
Vec grid_minimize(const std::function<double(const Vec&)>& objective, Vec center, Vec half,
                  const std::vector<bool>& nonneg = {}, const SearchSpec& spec = {});

/// Projection onto {a + |b|^2/2 <= 0}; input/output (a, b).
Vec brute_proj_K(const Vec& q, const SearchSpec& spec = {});
/// Projection onto {alpha + c.beta + beta' G beta / 2 <= 0}.
Vec brute_proj_Kf(const Vec& q, const Vec& c, const Mat& G, const SearchSpec& spec = {});
/// argmin |mu - muhat|^2/2 + |B^+(m - rho f)|^2 / (2 rho): grid search over rho
/// with m eliminated by a dense solve.
Vec brute_prox_M(const Vec& muhat, const Mat& Bdag, const Vec& f, const SearchSpec& spec = {});
/// Objective of brute_prox_M at mu.
double prox_M_objective(const Vec& mu, const Vec& muhat, const Mat& Bdag, const Vec& f);
/// Largest positive root of the frozen-denominator system
///   rho - rhohat - |B^+ m|^2 / (2 rhohat^2) + |B^+ f|^2 / 2 = 0,
///   m - mhat + W m / rho - W f = 0,
/// found by a dense scan in rho with m from a dense solve. Falls back to the
/// rho = 0 point (m restricted to null(B^+)) when there is no root.
Vec literal_root_M(const Vec& muhat, const Mat& Bdag, const Vec& f);
/// Projection onto {x: A x <= c} by enumerating active sets of size <= dim.
Vec enum_project_polyhedron(const Vec& y, const Mat& A, const Vec& c);

/// Weighted Euclidean projection onto {A mu = eta, R mu = xi}, z = (mu, eta, xi),
/// solved as the dense saddle system [W C'; C 0] with C = [A -I 0; R 0 -I].
/// Factorized once; throws std::runtime_error if the system is singular.
class DenseSubspaceProjection {
 public:
  DenseSubspaceProjection(const Mat& A, const Mat& R, const Vec& w_mu, const Vec& w_eta, const Vec& w_xi);
  Vec project(const Vec& z) const;
  Eigen::Index size() const { return n_; }

 private:
  Eigen::Index n_ = 0, m_ = 0;
  Vec w_;
  Mat kkt_;
  Eigen::PartialPivLU<Mat> lu_;
};

/// max over trials of |<A x, y> - <x, A^T y>| / (|x| |y|) with random x, y.
/// Inner products are weighted by wx, wy (empty = unit weights).
double adjoint_check(const std::function<Vec(const Vec&)>& forward, const std::function<Vec(const Vec&)>& adjoint,
                     int nx, int ny, int trials, const Vec& wx = {}, const Vec& wy = {}, unsigned seed = 1);

}  // namespace oracle
