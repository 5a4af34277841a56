#include "omt/dynamics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "omt/errors.hpp"

namespace omt {

SystemModel SystemModel::double_integrator() {
  SystemModel m;
  m.name = "double_integrator";
  m.n = 2;
  m.r = 1;
  m.f = [](double, const SmallVec& x) {
    SmallVec v(2);
    v << x(1), 0.0;
    return v;
  };
  m.B = [](double, const SmallVec&) {
    SmallMat b(2, 1);
    b << 0.0, 1.0;
    return b;
  };
  m.B_constant = true;
  m.Bdagf_constant = true;  // B^+ f = 0
  return m;
}

SystemModel SystemModel::single_integrator(int n) {
  if (n < 1 || n > kMaxSpaceDim) throw InvalidParameters("single_integrator: bad dimension");
  SystemModel m;
  m.name = "single_integrator";
  m.n = n;
  m.r = n;
  m.f = [n](double, const SmallVec&) { return SmallVec(SmallVec::Zero(n)); };
  m.B = [n](double, const SmallVec&) { return SmallMat(SmallMat::Identity(n, n)); };
  m.B_constant = true;
  m.Bdagf_constant = true;
  return m;
}

SystemModel SystemModel::linear(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const int n = static_cast<int>(A.rows());
  if (n < 1 || n > kMaxSpaceDim || A.cols() != n || B.rows() != n || B.cols() < 1 || B.cols() > n)
    throw InvalidParameters("linear model: A must be n x n and B n x r with 1 <= r <= n <= 3");
  SystemModel m;
  m.name = "linear";
  m.n = n;
  m.r = static_cast<int>(B.cols());
  const SmallMat a = A, b = B;
  m.f = [a](double, const SmallVec& x) { return SmallVec(a * x); };
  m.B = [b](double, const SmallVec&) { return b; };
  m.B_constant = true;
  // B^+ A x is constant only if B^+ A vanishes.
  m.Bdagf_constant = (pseudo_inverse(b) * a).cwiseAbs().maxCoeff() <= 1e-14;
  return m;
}

SmallMat pseudo_inverse(const SmallMat& B) {
  if (B.cols() == 0 || B.cols() > B.rows()) throw RankDeficient("pseudo_inverse: B must be tall with r >= 1");
  Eigen::JacobiSVD<SmallMat> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.minCoeff() <= 1e-10)
    throw RankDeficient("pseudo_inverse: smallest singular value " + std::to_string(s.minCoeff()));
  // Equal to (B'B)^{-1} B' for full column rank, without squaring the condition number.
  return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

SmallMat complete_basis(const SmallMat& B) {
  const int n = static_cast<int>(B.rows());
  const int r = static_cast<int>(B.cols());
  pseudo_inverse(B);  // rank check
  SmallMat q = Eigen::HouseholderQR<SmallMat>(B).householderQ() * SmallMat::Identity(n, r);
  SmallMat out(n, n - r);
  for (int k = 0; k < n - r; ++k) {
    int best = -1;
    double best_norm = -1.0;
    SmallVec best_res;
    for (int i = 0; i < n; ++i) {
      SmallVec e = SmallVec::Zero(n);
      e(i) = 1.0;
      SmallVec res = e - q * (q.transpose() * e);
      const double nr = res.norm();
      if (nr > best_norm + 1e-12) {
        best = i;
        best_norm = nr;
        best_res = res;
      }
    }
    if (best < 0 || best_norm <= 1e-8) throw RankDeficient("complete_basis: orthogonalization failed");
    best_res /= best_norm;
    // One more Gram-Schmidt pass for orthogonality at machine precision.
    best_res -= q * (q.transpose() * best_res);
    best_res.normalize();
    out.col(k) = best_res;
    SmallMat grown(n, q.cols() + 1);
    grown << q, best_res;
    q = grown;
  }
  return out;
}

SmallMat assemble_P(const SystemModel& model, double t, const SmallVec& x) {
  const SmallVec f = model.f(t, x);
  const SmallMat b = model.B(t, x);
  SmallMat p = SmallMat::Zero(model.r + 1, model.n + 1);
  p(0, 0) = 1.0;
  p.block(0, 1, 1, model.n) = f.transpose();
  p.block(1, 1, model.r, model.n) = b.transpose();
  return p;
}

SmallMat assemble_Ptilde(const SystemModel& model, double t, const SmallVec& x) {
  const SmallVec f = model.f(t, x);
  const SmallMat b = model.B(t, x);
  const SmallMat b2 = complete_basis(b);
  SmallMat p = SmallMat::Zero(model.n + 1, model.n + 1);
  p(0, 0) = 1.0;
  p.block(0, 1, 1, model.n) = f.transpose();
  p.block(1, 1, model.r, model.n) = b.transpose();
  if (model.n > model.r) p.block(1 + model.r, 1, model.n - model.r, model.n) = b2.transpose();
  return p;
}

KfParams kf_params(const SystemModel& model, double t, const SmallVec& x, KfVariant variant) {
  const SmallVec f = model.f(t, x);
  const SmallMat b = model.B(t, x);
  KfParams out;
  out.gram = b * b.transpose();
  if (variant == KfVariant::drift)
    out.c = f;
  else
    out.c = b * (pseudo_inverse(b) * f);
  return out;
}

SmallVec cell_state(const Grid& g, std::size_t cell) {
  const auto x = g.x_center(g.space_index(cell));
  SmallVec v(g.space_dim());
  for (int i = 0; i < g.space_dim(); ++i) v(i) = x[i];
  return v;
}

std::vector<InputHalfspace> box_input_bounds(const std::vector<double>& k) {
  std::vector<InputHalfspace> out;
  const int r = static_cast<int>(k.size());
  for (int i = 0; i < r; ++i) {
    if (!(k[i] >= 0.0)) throw InvalidParameters("input bound k_" + std::to_string(i) + " must be >= 0");
    for (double sign : {1.0, -1.0}) {
      InputHalfspace h;
      h.a.assign(r, 0.0);
      h.a[i] = sign;
      h.b = -k[i];
      out.push_back(h);
    }
  }
  return out;
}

ScalarField broadcast(const Grid& g, const SpaceSlice& s) {
  require_same_grid(g, s.grid());
  ScalarField out(g);
  for (int it = 0; it < g.nt(); ++it) {
    auto l = out.layer(it);
    std::copy(s.values().begin(), s.values().end(), l.begin());
  }
  return out;
}

bool CompiledConstraints::constant_rows(double tol) const {
  const std::size_t block = static_cast<std::size_t>(rows) * dim;
  for (std::size_t c = 1; c < grid.cells(); ++c)
    for (std::size_t k = 0; k < block; ++k)
      if (std::abs(coeff[c * block + k] - coeff[k]) > tol) return false;
  return true;
}

double CompiledConstraints::violation(std::size_t cell, const SmallVec& mu) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < rows; ++k) {
    const double* a = row(cell, k);
    double s = -bound(cell, k);
    for (int j = 0; j < dim; ++j) s += a[j] * mu(j);
    worst = std::max(worst, s);
  }
  return worst;
}

namespace {

struct RowBuilder {
  CompiledConstraints& out;
  std::size_t cell;
  int k = 0;

  void add(const SmallVec& a, double c) {
    const double nrm = a.norm();
    if (!(nrm > 0.0)) throw InvalidParameters("constraint row with zero coefficients");
    double* dst = out.coeff.data() + (cell * out.rows + k) * out.dim;
    for (int j = 0; j < out.dim; ++j) dst[j] = a(j) / nrm;
    out.rhs[cell * out.rows + k] = c / nrm;
    ++k;
  }
};

}  // namespace

CompiledConstraints compile_constraints(const SystemModel& model, const ConstraintSpec& spec, const Grid& g,
                                        Formulation formulation) {
  if (g.space_dim() != model.n)
    throw InvalidParameters("model dimension " + std::to_string(model.n) + " does not match grid dimension " +
                            std::to_string(g.space_dim()));
  if (formulation == Formulation::dr && !(model.B_constant && model.Bdagf_constant))
    throw UnsupportedForDR("Douglas-Rachford needs constant B and constant B^+ f (model '" + model.name + "')");
  for (const auto& h : spec.input)
    if (static_cast<int>(h.a.size()) != model.r) throw InvalidParameters("input halfspace has wrong dimension");
  if (spec.lower) require_same_grid(g, spec.lower->grid());
  if (spec.upper) require_same_grid(g, spec.upper->grid());

  const int n = model.n, r = model.r;
  const bool has_upper = spec.upper.has_value();
  const int extra = 2 * (n - r);  // v = 0 pairs (direct) or range-complement pairs
  CompiledConstraints out;
  out.grid = g;
  out.formulation = formulation;
  out.dim = n + 1;
  out.rows = (has_upper ? 1 : 0) + 1 + static_cast<int>(spec.input.size()) + extra;
  out.coeff.assign(g.cells() * out.rows * out.dim, 0.0);
  out.rhs.assign(g.cells() * out.rows, 0.0);

  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const double lo = spec.lower ? (*spec.lower)[cell] : 0.0;
    const double hi = has_upper ? (*spec.upper)[cell] : std::numeric_limits<double>::infinity();
    if (!(lo >= 0.0)) throw InvalidParameters("density lower bound must be >= 0");
    if (lo > hi) throw EmptyFeasibleSet("density bounds g > h at cell " + std::to_string(cell));

    const double t = g.t_center(g.time_index(cell));
    const SmallVec x = cell_state(g, cell);
    RowBuilder rb{out, cell};
    SmallVec e_rho = SmallVec::Zero(n + 1);
    e_rho(0) = 1.0;
    if (has_upper) rb.add(e_rho, hi);
    rb.add(-e_rho, -lo);

    if (formulation == Formulation::direct) {
      // mu = (rho, rho u, rho v) with the auxiliary input v pinned to zero.
      for (const auto& h : spec.input) {
        SmallVec a = SmallVec::Zero(n + 1);
        a(0) = h.b;
        for (int j = 0; j < r; ++j) a(1 + j) = h.a[j];
        rb.add(a, 0.0);
      }
      for (int j = r; j < n; ++j) {
        SmallVec a = SmallVec::Zero(n + 1);
        a(1 + j) = 1.0;
        rb.add(a, 0.0);
        rb.add(-a, 0.0);
      }
    } else {
      // mu = (rho, rho v) with u = B^+(v - f) and v - f in range(B).
      const SmallVec f = model.f(t, x);
      const SmallMat b = model.B(t, x);
      const SmallMat bdag = pseudo_inverse(b);
      const SmallVec bdag_f = bdag * f;
      for (const auto& h : spec.input) {
        Eigen::Map<const Eigen::VectorXd> av(h.a.data(), r);
        SmallVec a(n + 1);
        a(0) = h.b - av.dot(bdag_f);
        a.tail(n) = bdag.transpose() * av;
        rb.add(a, 0.0);
      }
      if (n > r) {
        const SmallMat b2 = complete_basis(b);
        for (int j = 0; j < n - r; ++j) {
          SmallVec a(n + 1);
          a(0) = -b2.col(j).dot(f);
          a.tail(n) = b2.col(j);
          rb.add(a, 0.0);
          rb.add(-a, 0.0);
        }
      }
    }
  }
  return out;
}

}  // namespace omt
