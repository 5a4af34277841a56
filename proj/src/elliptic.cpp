#include "omt/elliptic.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace omt {

CoefficientField::CoefficientField(const Grid& g)
    : grid_(g), d_(g.components()), m_(g.cells() * g.components() * g.components(), 0.0) {}

CoefficientField CoefficientField::identity(const Grid& g) {
  CoefficientField c(g);
  for (std::size_t cell = 0; cell < g.cells(); ++cell)
    for (int i = 0; i < c.d_; ++i) c.m_[cell * c.d_ * c.d_ + i * c.d_ + i] = 1.0;
  c.identity_ = true;
  return c;
}

void CoefficientField::validate_spd(double tol) const {
  if (identity_) return;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSpaceDim + 1, kMaxSpaceDim + 1>;
  Mat m(d_, d_);
  for (std::size_t cell = 0; cell < grid_.cells(); ++cell) {
    auto c = at(cell);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) m(i, j) = c[i * d_ + j];
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol)
      throw NonSPDCoefficient("coefficient not symmetric at cell " + std::to_string(cell));
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= tol)
      throw NonSPDCoefficient("coefficient not positive definite at cell " + std::to_string(cell));
  }
}

FaceData FaceData::zeros(const Grid& g) {
  FaceData f;
  for (int i = 0; i < g.space_dim(); ++i) {
    const std::size_t n = g.cells() / g.extent(i + 1);
    f.lo.emplace_back(n, 0.0);
    f.hi.emplace_back(n, 0.0);
  }
  return f;
}

std::size_t face_index(const Grid& g, int axis, std::size_t cell) {
  const std::size_t s = g.stride(axis);
  const std::size_t block = s * g.extent(axis);
  return (cell / block) * s + cell % s;
}

ScalarField apply(const ScreenedOperator& op, const ScalarField& phi) {
  const Grid& g = phi.grid();
  require_same_grid(g, op.coef.grid());
  const int d = g.components();
  FluxField flux(g);
  for (int a = 0; a < d; ++a) axis_gradient(g, a, phi.values(), flux.component(a));
  if (!op.coef.is_identity()) {
    double tmp[kMaxSpaceDim + 1];
    for (std::size_t cell = 0; cell < g.cells(); ++cell) {
      auto c = op.coef.at(cell);
      for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += c[i * d + j] * flux.at(j, cell);
        tmp[i] = s;
      }
      for (int i = 0; i < d; ++i) flux.at(i, cell) = tmp[i];
    }
  }
  ScalarField out(g);
  for (int a = 0; a < d; ++a) axis_divergence_add(g, a, flux.component(a), out.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = op.shift * phi[i] - op.scale * out[i];
  if (op.boundary_mass != 0.0) {
    for (int it : {0, g.nt() - 1}) {
      auto o = out.layer(it);
      auto p = phi.layer(it);
      for (std::size_t k = 0; k < o.size(); ++k) o[k] += op.boundary_mass * p[k];
    }
  }
  return out;
}

namespace {

bool pure_neumann(const ScreenedOperator& op) { return op.shift == 0.0 && op.boundary_mass == 0.0; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void remove_mean(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  const double mean = s / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

ScalarField conjugate_gradient(const ScreenedOperator& op, const ScalarField& rhs,
                               const EllipticOptions& opts, SolveReport* report) {
  const Grid& g = rhs.grid();
  const bool neumann = pure_neumann(op);
  ScalarField b = rhs;
  if (neumann) remove_mean(b.values());
  const int max_iter =
      opts.max_iter > 0 ? opts.max_iter : static_cast<int>(10.0 * std::sqrt(double(g.cells()))) + 10;

  ScalarField x(g);
  if (opts.initial_guess) {
    require_same_grid(g, opts.initial_guess->grid());
    x = *opts.initial_guess;
    if (neumann) remove_mean(x.values());
  }
  const double bnorm = std::sqrt(dot(b.values(), b.values()));
  if (report) {
    report->method = "cg";
    report->iterations = 0;
    report->relative_residual = 0.0;
    report->energy.clear();
  }
  if (bnorm == 0.0) return ScalarField(g);

  ScalarField r = b;
  {
    ScalarField ax = apply(op, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= ax[i];
  }
  if (neumann) remove_mean(r.values());
  ScalarField p = r;
  double rr = dot(r.values(), r.values());
  int it = 0;
  double rel = std::sqrt(rr) / bnorm;
  while (rel > opts.tol && it < max_iter) {
    ScalarField ap = apply(op, p);
    const double pap = dot(p.values(), ap.values());
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    if (neumann) remove_mean(r.values());
    const double rr_new = dot(r.values(), r.values());
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    ++it;
    rel = std::sqrt(rr) / bnorm;
    if (report) {
      // A x = b - r, so 0.5 x'Ax - b'x = -0.5 x'(b + r).
      double e = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) e += x[i] * (b[i] + r[i]);
      report->energy.push_back(-0.5 * e);
    }
  }
  if (report) {
    report->iterations = it;
    report->relative_residual = rel;
  }
  if (!std::isfinite(rel) || rel > opts.tol)
    throw NonConvergence("conjugate gradient stopped at relative residual " + std::to_string(rel) +
                         " after " + std::to_string(it) + " iterations");
  if (neumann) remove_mean(x.values());
  return x;
}

// Cached FFTW plans for the DCT-II / DCT-III pair on one grid shape.
struct DctPlan {
  std::vector<int> dims;
  double* buf = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  explicit DctPlan(std::vector<int> d) : dims(std::move(d)) {
    std::size_t n = 1;
    for (int k : dims) n *= k;
    buf = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    std::vector<fftw_r2r_kind> fk(dims.size(), FFTW_REDFT10), bk(dims.size(), FFTW_REDFT01);
    forward = fftw_plan_r2r(static_cast<int>(dims.size()), dims.data(), buf, buf, fk.data(), FFTW_ESTIMATE);
    backward = fftw_plan_r2r(static_cast<int>(dims.size()), dims.data(), buf, buf, bk.data(), FFTW_ESTIMATE);
  }
  ~DctPlan() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(buf);
  }
  DctPlan(const DctPlan&) = delete;
  DctPlan& operator=(const DctPlan&) = delete;
};

std::mutex& dct_mutex() {
  static std::mutex m;
  return m;
}

DctPlan& dct_plan(const Grid& g) {
  static std::map<std::vector<int>, std::unique_ptr<DctPlan>> cache;
  std::vector<int> dims{g.nt()};
  dims.insert(dims.end(), g.nx().begin(), g.nx().end());
  auto it = cache.find(dims);
  if (it == cache.end()) it = cache.emplace(dims, std::make_unique<DctPlan>(dims)).first;
  return *it->second;
}

// The reflected central-difference Laplacian is diagonal in the DCT-II basis with
// eigenvalue -sum_a sin^2(pi k_a / N_a) / h_a^2.
ScalarField dct_solve(const ScreenedOperator& op, const ScalarField& rhs, SolveReport* report) {
  const Grid& g = rhs.grid();
  const int axes = g.components();
  std::vector<std::vector<double>> eig(axes);
  double norm = 1.0;
  for (int a = 0; a < axes; ++a) {
    const int n = g.extent(a);
    const double h = g.spacing(a);
    eig[a].resize(n);
    for (int k = 0; k < n; ++k) {
      const double s = std::sin(std::numbers::pi * k / n);
      eig[a][k] = s * s / (h * h);
    }
    norm *= 2.0 * n;
  }
  ScalarField out(g);
  std::lock_guard<std::mutex> lock(dct_mutex());
  DctPlan& plan = dct_plan(g);
  std::copy(rhs.values().begin(), rhs.values().end(), plan.buf);
  fftw_execute(plan.forward);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    double lambda = 0.0;
    for (int a = 0; a < axes; ++a) lambda += eig[a][g.index(cell, a)];
    const double denom = op.scale * lambda + op.shift;
    plan.buf[cell] = denom > 0.0 ? plan.buf[cell] / (denom * norm) : 0.0;
  }
  fftw_execute(plan.backward);
  std::copy(plan.buf, plan.buf + g.cells(), out.values().begin());
  if (pure_neumann(op)) remove_mean(out.values());
  if (report) {
    report->method = "dct";
    report->iterations = 0;
    report->energy.clear();
    ScalarField b = rhs;
    if (pure_neumann(op)) remove_mean(b.values());
    ScalarField res = apply(op, out);
    double rn = 0.0;
    for (std::size_t i = 0; i < res.size(); ++i) rn += (res[i] - b[i]) * (res[i] - b[i]);
    const double bn = std::sqrt(dot(b.values(), b.values()));
    report->relative_residual = bn > 0.0 ? std::sqrt(rn) / bn : 0.0;
  }
  return out;
}

}  // namespace

ScalarField solve_screened(const ScreenedOperator& op, const ScalarField& rhs, const EllipticOptions& opts,
                           SolveReport* report) {
  require_same_grid(rhs.grid(), op.coef.grid());
  if (!(opts.tol > 0.0)) throw InvalidParameters("elliptic: tol must be positive");
  const bool dct_ok = op.coef.is_identity() && op.boundary_mass == 0.0 && pure_neumann(op);
  using M = EllipticOptions::Method;
  if (opts.method == M::dct && !dct_ok)
    throw InvalidParameters("elliptic: cosine-transform path needs a constant-coefficient Neumann operator");
  if (opts.method == M::dct || (opts.method == M::automatic && dct_ok)) return dct_solve(op, rhs, report);
  return conjugate_gradient(op, rhs, opts, report);
}

namespace {

void add_time_boundary_terms(ScalarField& b, const SpaceSlice& b0, const SpaceSlice& bT) {
  const Grid& g = b.grid();
  require_same_grid(g, b0.grid());
  require_same_grid(g, bT.grid());
  const double inv_dt = 1.0 / g.dt();
  auto first = b.layer(0);
  auto last = b.layer(g.nt() - 1);
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    first[k] -= b0[k] * inv_dt;
    last[k] += bT[k] * inv_dt;
  }
}

}  // namespace

ScalarField solve_poisson_neumann(const ScalarField& rhs, const SpaceSlice& b0, const SpaceSlice& bT, double r,
                                  const EllipticOptions& opts, SolveReport* report) {
  if (!(r > 0.0)) throw InvalidParameters("poisson: r must be positive");
  ScalarField b = rhs;
  add_time_boundary_terms(b, b0, bT);
  ScreenedOperator op{CoefficientField::identity(rhs.grid()), 0.0, 0.0, r};
  return solve_screened(op, b, opts, report);
}

ScalarField solve_elliptic_varcoeff(const CoefficientField& coef, const FluxField& rhs_flux, const SpaceSlice& b0,
                                    const SpaceSlice& bT, double r, const EllipticOptions& opts,
                                    SolveReport* report) {
  if (!(r > 0.0)) throw InvalidParameters("elliptic: r must be positive");
  require_same_grid(coef.grid(), rhs_flux.grid());
  coef.validate_spd();
  ScalarField b = divergence(rhs_flux);
  add_time_boundary_terms(b, b0, bT);
  ScreenedOperator op{coef, 0.0, 0.0, r};
  return solve_screened(op, b, opts, report);
}

ScreenedOperator helmholtz_robin_operator(const Grid& g) {
  return ScreenedOperator{CoefficientField::identity(g), 1.0, 1.0 / g.dt(), 1.0};
}

ScalarField solve_helmholtz_robin(const ScalarField& rhs, const SpaceSlice& s0, const SpaceSlice& sT,
                                  const FaceData& side, const EllipticOptions& opts, SolveReport* report) {
  const Grid& g = rhs.grid();
  ScalarField b = rhs;
  add_time_boundary_terms(b, s0, sT);
  if (static_cast<int>(side.lo.size()) != g.space_dim() || static_cast<int>(side.hi.size()) != g.space_dim())
    throw GridMismatch("helmholtz: face data does not match the spatial dimension");
  for (int i = 0; i < g.space_dim(); ++i) {
    const int axis = i + 1;
    const int n = g.extent(axis);
    const double inv_h = 1.0 / g.spacing(axis);
    const std::size_t faces = g.cells() / n;
    if (side.lo[i].size() != faces || side.hi[i].size() != faces)
      throw GridMismatch("helmholtz: face data has the wrong size");
    for (std::size_t cell = 0; cell < g.cells(); ++cell) {
      const int k = g.index(cell, axis);
      if (k == 0) b[cell] -= side.lo[i][face_index(g, axis, cell)] * inv_h;
      if (k == n - 1) b[cell] += side.hi[i][face_index(g, axis, cell)] * inv_h;
    }
  }
  return solve_screened(helmholtz_robin_operator(g), b, opts, report);
}

}  // namespace omt
