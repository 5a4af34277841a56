#include "omt/grid.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace omt {

Grid::Grid(double T, int nt, std::vector<int> nx) : T_(T), nt_(nt), nx_(std::move(nx)) {
  if (!(T_ > 0.0) || !std::isfinite(T_)) throw InvalidParameters("grid: T must be positive");
  if (nt_ < 2) throw InvalidParameters("grid: nt must be >= 2");
  if (nx_.empty() || static_cast<int>(nx_.size()) > kMaxSpaceDim)
    throw InvalidParameters("grid: spatial dimension must be 1.." + std::to_string(kMaxSpaceDim));
  for (int n : nx_)
    if (n < 2) throw InvalidParameters("grid: every nx must be >= 2");

  const int axes = components();
  strides_[axes - 1] = 1;
  for (int a = axes - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * extent(a + 1);
  space_cells_ = std::accumulate(nx_.begin(), nx_.end(), std::size_t{1},
                                 [](std::size_t acc, int n) { return acc * static_cast<std::size_t>(n); });
  cells_ = space_cells_ * nt_;
  space_volume_ = 1.0 / static_cast<double>(space_cells_);
  cell_volume_ = dt() * space_volume_;
}

std::array<double, kMaxSpaceDim> Grid::x_center(std::size_t space_idx) const {
  std::array<double, kMaxSpaceDim> x{};
  for (int i = space_dim() - 1; i >= 0; --i) {
    const int k = static_cast<int>(space_idx % nx_[i]);
    space_idx /= nx_[i];
    x[i] = (k + 0.5) * dx(i);
  }
  return x;
}

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw GridMismatch("fields live on different grids");
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

FluxField& FluxField::operator+=(const FluxField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

FluxField& FluxField::operator-=(const FluxField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

FluxField& FluxField::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

// The reflection ghost phi[-1] = phi[0], phi[N] = phi[N-1] turns the central
// difference into a half one-sided difference in the boundary cells.
void axis_gradient(const Grid& g, int axis, std::span<const double> in, std::span<double> out) {
  const std::size_t s = g.stride(axis);
  const int n = g.extent(axis);
  const std::size_t block = s * n;
  const double c = 0.5 / g.spacing(axis);
  for (std::size_t base = 0; base < g.cells(); base += block) {
    for (int i = 0; i < n; ++i) {
      const std::size_t lo = base + (i > 0 ? i - 1 : 0) * s;
      const std::size_t hi = base + (i < n - 1 ? i + 1 : n - 1) * s;
      const std::size_t at = base + i * s;
      for (std::size_t j = 0; j < s; ++j) out[at + j] = c * (in[hi + j] - in[lo + j]);
    }
  }
}

// Transpose of axis_gradient with a minus sign.
void axis_divergence_add(const Grid& g, int axis, std::span<const double> in, std::span<double> out) {
  const std::size_t s = g.stride(axis);
  const int n = g.extent(axis);
  const std::size_t block = s * n;
  const double c = 0.5 / g.spacing(axis);
  for (std::size_t base = 0; base < g.cells(); base += block) {
    const std::size_t first = base;
    const std::size_t second = base + s;
    const std::size_t last = base + (n - 1) * s;
    const std::size_t penult = base + (n - 2) * s;
    for (std::size_t j = 0; j < s; ++j) {
      out[first + j] += c * (in[first + j] + in[second + j]);
      out[last + j] -= c * (in[penult + j] + in[last + j]);
    }
    for (int i = 1; i < n - 1; ++i) {
      const std::size_t at = base + i * s;
      for (std::size_t j = 0; j < s; ++j) out[at + j] += c * (in[at + s + j] - in[at - s + j]);
    }
  }
}

FluxField gradient(const ScalarField& phi) {
  const Grid& g = phi.grid();
  FluxField out(g);
  for (int a = 0; a < g.components(); ++a) axis_gradient(g, a, phi.values(), out.component(a));
  return out;
}

ScalarField divergence(const FluxField& mu) {
  const Grid& g = mu.grid();
  ScalarField out(g);
  for (int a = 0; a < g.components(); ++a) axis_divergence_add(g, a, mu.component(a), out.values());
  return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double inner(const ScalarField& u, const ScalarField& v) {
  require_same_grid(u.grid(), v.grid());
  return u.grid().cell_volume() * dot(u.values(), v.values());
}

double inner(const FluxField& u, const FluxField& v) {
  require_same_grid(u.grid(), v.grid());
  return u.grid().cell_volume() * dot(u.raw(), v.raw());
}

double inner(const SpaceSlice& u, const SpaceSlice& v) {
  require_same_grid(u.grid(), v.grid());
  return u.grid().space_volume() * dot(u.values(), v.values());
}

double norm(const ScalarField& u) { return std::sqrt(inner(u, u)); }
double norm(const FluxField& u) { return std::sqrt(inner(u, u)); }
double norm(const SpaceSlice& u) { return std::sqrt(inner(u, u)); }

double integrate(const ScalarField& f) {
  double s = 0.0;
  for (double x : f.values()) s += x;
  return s * f.grid().cell_volume();
}

double mass(const SpaceSlice& rho) {
  double s = 0.0;
  for (double x : rho.values()) s += x;
  return s * rho.grid().space_volume();
}

ScalarField mean_zero(const ScalarField& phi) {
  ScalarField out = phi;
  double s = 0.0;
  for (double x : phi.values()) s += x;
  const double mean = s / static_cast<double>(phi.size());
  for (double& x : out.values()) x -= mean;
  return out;
}

SpaceSlice first_layer(const ScalarField& f) {
  SpaceSlice out(f.grid());
  auto src = f.layer(0);
  std::copy(src.begin(), src.end(), out.values().begin());
  return out;
}

SpaceSlice last_layer(const ScalarField& f) {
  SpaceSlice out(f.grid());
  auto src = f.layer(f.grid().nt() - 1);
  std::copy(src.begin(), src.end(), out.values().begin());
  return out;
}

}  // namespace omt
