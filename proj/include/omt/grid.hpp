#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "omt/errors.hpp"

namespace omt {

/// Largest supported spatial dimension.
inline constexpr int kMaxSpaceDim = 3;

/// Uniform cell-centred grid on [0,T] x [0,1]^n.
///
/// Axis 0 is time, axes 1..n are space. Cells are stored row-major over
/// (t, x_1, ..., x_n), so the last spatial axis is contiguous.
class Grid {
 public:
  Grid() = default;
  Grid(double T, int nt, std::vector<int> nx);

  int space_dim() const { return static_cast<int>(nx_.size()); }
  /// Number of flux components, time plus space (n+1).
  int components() const { return space_dim() + 1; }

  double T() const { return T_; }
  int nt() const { return nt_; }
  const std::vector<int>& nx() const { return nx_; }
  double dt() const { return T_ / nt_; }
  double dx(int i) const { return 1.0 / nx_[i]; }

  int extent(int axis) const { return axis == 0 ? nt_ : nx_[axis - 1]; }
  double spacing(int axis) const { return axis == 0 ? dt() : dx(axis - 1); }
  std::size_t stride(int axis) const { return strides_[axis]; }

  std::size_t cells() const { return cells_; }
  std::size_t space_cells() const { return space_cells_; }
  double cell_volume() const { return cell_volume_; }
  double space_volume() const { return space_volume_; }

  /// Index of `cell` along `axis`.
  int index(std::size_t cell, int axis) const {
    return static_cast<int>((cell / strides_[axis]) % extent(axis));
  }
  int time_index(std::size_t cell) const { return static_cast<int>(cell / space_cells_); }
  std::size_t space_index(std::size_t cell) const { return cell % space_cells_; }

  double t_center(int it) const { return (it + 0.5) * dt(); }
  /// Spatial cell-centre coordinates of a flat spatial index.
  std::array<double, kMaxSpaceDim> x_center(std::size_t space_idx) const;

  bool operator==(const Grid& o) const { return T_ == o.T_ && nt_ == o.nt_ && nx_ == o.nx_; }

 private:
  double T_ = 1.0;
  int nt_ = 0;
  std::vector<int> nx_;
  std::array<std::size_t, kMaxSpaceDim + 1> strides_{};
  std::size_t cells_ = 0;
  std::size_t space_cells_ = 0;
  double cell_volume_ = 0.0;
  double space_volume_ = 0.0;
};

void require_same_grid(const Grid& a, const Grid& b);

/// Real value per space-time cell.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& g, double value = 0.0) : grid_(g), v_(g.cells(), value) {}

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

  /// Cells of time layer `it`.
  std::span<double> layer(int it) { return {v_.data() + it * grid_.space_cells(), grid_.space_cells()}; }
  std::span<const double> layer(int it) const {
    return {v_.data() + it * grid_.space_cells(), grid_.space_cells()};
  }

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);

 private:
  Grid grid_;
  std::vector<double> v_;
};

/// Vector field with n+1 components per cell; slot 0 is time, slots 1..n space.
///
/// Storage is component-major: each component is a contiguous cell array.
class FluxField {
 public:
  FluxField() = default;
  explicit FluxField(const Grid& g, double value = 0.0)
      : grid_(g), d_(g.components()), v_(g.cells() * g.components(), value) {}

  const Grid& grid() const { return grid_; }
  int components() const { return d_; }
  std::size_t cells() const { return grid_.cells(); }

  std::span<double> component(int c) { return {v_.data() + c * cells(), cells()}; }
  std::span<const double> component(int c) const { return {v_.data() + c * cells(), cells()}; }
  double& at(int c, std::size_t cell) { return v_[c * cells() + cell]; }
  double at(int c, std::size_t cell) const { return v_[c * cells() + cell]; }

  std::span<double> raw() { return v_; }
  std::span<const double> raw() const { return v_; }

  FluxField& operator+=(const FluxField& o);
  FluxField& operator-=(const FluxField& o);
  FluxField& operator*=(double s);

 private:
  Grid grid_;
  int d_ = 0;
  std::vector<double> v_;
};

/// Values on the spatial grid only (densities, boundary data).
class SpaceSlice {
 public:
  SpaceSlice() = default;
  explicit SpaceSlice(const Grid& g, double value = 0.0) : grid_(g), v_(g.space_cells(), value) {}

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

 private:
  Grid grid_;
  std::vector<double> v_;
};

/// Central differences with ghost-cell reflection on every axis.
FluxField gradient(const ScalarField& phi);
/// Exact negative adjoint of `gradient`: divergence = -gradient^T.
ScalarField divergence(const FluxField& mu);

/// Derivative / divergence kernels along a single axis (used by the solvers).
void axis_gradient(const Grid& g, int axis, std::span<const double> in, std::span<double> out);
void axis_divergence_add(const Grid& g, int axis, std::span<const double> in, std::span<double> out);

double inner(const ScalarField& u, const ScalarField& v);
double inner(const FluxField& u, const FluxField& v);
double inner(const SpaceSlice& u, const SpaceSlice& v);
double norm(const ScalarField& u);
double norm(const FluxField& u);
double norm(const SpaceSlice& u);
double integrate(const ScalarField& f);
double mass(const SpaceSlice& rho);
ScalarField mean_zero(const ScalarField& phi);

SpaceSlice first_layer(const ScalarField& f);
SpaceSlice last_layer(const ScalarField& f);

}  // namespace omt
