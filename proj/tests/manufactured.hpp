#pragma once

// Manufactured solutions for the elliptic solvers.

#include <cmath>
#include <numbers>
#include <random>

#include "omt/elliptic.hpp"

namespace mms {

using namespace omt;
using std::numbers::pi;

inline ScalarField random_scalar(const Grid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  ScalarField f(g);
  for (double& x : f.values()) x = nd(rng);
  return f;
}

template <class F>
inline ScalarField sample(const Grid& g, F&& f) {
  ScalarField out(g);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    auto x = g.x_center(g.space_index(c));
    out[c] = f(g.t_center(g.time_index(c)), x);
  }
  return out;
}

inline double l2_error(const ScalarField& a, const ScalarField& b) {
  ScalarField d = a;
  d -= b;
  return norm(d);
}

inline double poisson_error(int n) {
  Grid g(1.0, n, {n});
  const double r = 1.3;
  auto exact = sample(g, [](double t, auto x) { return std::cos(pi * t) * std::cos(pi * x[0]); });
  ScalarField rhs = exact;
  rhs *= r * 2.0 * pi * pi;
  SpaceSlice zero(g);
  EllipticOptions opts;
  opts.method = EllipticOptions::Method::cg;
  opts.tol = 1e-12;
  ScalarField phi = solve_poisson_neumann(rhs, zero, zero, r, opts);
  return l2_error(phi, mean_zero(exact));
}

// Coefficient P~'P~ of the double integrator at every cell.
inline CoefficientField double_integrator_coef(const Grid& g) {
  CoefficientField c(g);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const double x2 = g.x_center(g.space_index(cell))[1];
    auto m = c.at(cell);
    const double v[9] = {1.0, x2, 0.0, x2, 1.0 + x2 * x2, 0.0, 0.0, 0.0, 1.0};
    std::copy(v, v + 9, m.begin());
  }
  return c;
}

inline double varcoeff_error(int n) {
  Grid g(1.0, n, {n, n});
  const double r = 0.8;
  CoefficientField coef = double_integrator_coef(g);
  auto exact = sample(g, [](double t, auto x) {
    return std::cos(pi * t) * std::cos(pi * x[0]) * std::cos(pi * x[1]);
  });
  // Flux F = -r C grad(phi*) so that -r div(C grad phi) = div F is solved by phi*.
  FluxField flux(g);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const double t = g.t_center(g.time_index(cell));
    auto x = g.x_center(g.space_index(cell));
    const double ct = std::cos(pi * t), st = std::sin(pi * t);
    const double c1 = std::cos(pi * x[0]), s1 = std::sin(pi * x[0]);
    const double c2 = std::cos(pi * x[1]), s2 = std::sin(pi * x[1]);
    const double grad[3] = {-pi * st * c1 * c2, -pi * ct * s1 * c2, -pi * ct * c1 * s2};
    auto m = coef.at(cell);
    for (int i = 0; i < 3; ++i) {
      double s = 0.0;
      for (int j = 0; j < 3; ++j) s += m[i * 3 + j] * grad[j];
      flux.at(i, cell) = -r * s;
    }
  }
  SpaceSlice zero(g);
  EllipticOptions opts;
  opts.tol = 1e-12;
  ScalarField phi = solve_elliptic_varcoeff(coef, flux, zero, zero, r, opts);
  return l2_error(phi, mean_zero(exact));
}

inline double helmholtz_error(int n) {
  Grid g(1.0, n, {n});
  auto exact = sample(g, [](double t, auto x) { return std::cos(pi * t) * std::cos(pi * x[0]); });
  ScalarField rhs = exact;
  rhs *= 2.0 * pi * pi + 1.0;
  SpaceSlice s0(g), sT(g);
  for (std::size_t k = 0; k < g.space_cells(); ++k) {
    const double c = std::cos(pi * g.x_center(k)[0]);
    s0[k] = -c;  // d_t phi - phi at t = 0
    sT[k] = -c;  // d_t phi + phi at t = 1
  }
  EllipticOptions opts;
  opts.tol = 1e-12;
  ScalarField phi = solve_helmholtz_robin(rhs, s0, sT, FaceData::zeros(g), opts);
  return l2_error(phi, exact);
}

}  // namespace mms
