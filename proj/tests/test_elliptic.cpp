#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "manufactured.hpp"
#include "omt/elliptic.hpp"

using namespace omt;
using std::numbers::pi;
using namespace mms;

TEST_CASE("zero data gives the zero solution") {
  Grid g(1.0, 6, {5, 4});
  SpaceSlice zero(g);
  CHECK(norm(solve_poisson_neumann(ScalarField(g), zero, zero, 1.0)) == 0.0);
  CHECK(norm(solve_elliptic_varcoeff(CoefficientField::identity(g), FluxField(g), zero, zero, 1.0)) == 0.0);
  CHECK(norm(solve_helmholtz_robin(ScalarField(g), zero, zero, FaceData::zeros(g))) == 0.0);
}

TEST_CASE("Neumann Poisson converges at second order") {
  const double e16 = poisson_error(16), e32 = poisson_error(32), e64 = poisson_error(64);
  MESSAGE("poisson errors " << e16 << " " << e32 << " " << e64);
  CHECK(e16 / e32 >= 3.5);
  CHECK(e16 / e32 <= 4.5);
  CHECK(e32 / e64 >= 3.5);
  CHECK(e32 / e64 <= 4.5);
}

TEST_CASE("variable-coefficient solver converges at second order") {
  const double e8 = varcoeff_error(8), e16 = varcoeff_error(16), e32 = varcoeff_error(32);
  MESSAGE("varcoeff errors " << e8 << " " << e16 << " " << e32);
  CHECK(e16 / e32 >= 3.5);
  CHECK(e16 / e32 <= 4.5);
}

TEST_CASE("Robin Helmholtz converges at second order") {
  const double e16 = helmholtz_error(16), e32 = helmholtz_error(32), e64 = helmholtz_error(64);
  MESSAGE("helmholtz errors " << e16 << " " << e32 << " " << e64);
  CHECK(e32 / e64 >= 3.5);
  CHECK(e32 / e64 <= 4.5);
}

TEST_CASE("Poisson compatibility projection and mean-zero output") {
  std::mt19937_64 rng(5);
  Grid g(1.0, 8, {6, 5});
  ScalarField rhs = random_scalar(g, rng);
  SpaceSlice zero(g);
  ScalarField shifted = rhs;
  for (double& x : shifted.values()) x += 3.0;
  for (auto method : {EllipticOptions::Method::cg, EllipticOptions::Method::dct}) {
    EllipticOptions opts;
    opts.method = method;
    ScalarField a = solve_poisson_neumann(rhs, zero, zero, 2.0, opts);
    ScalarField b = solve_poisson_neumann(shifted, zero, zero, 2.0, opts);
    CHECK(l2_error(a, b) <= 1e-8 * norm(a));
    CHECK(std::abs(integrate(a)) <= 1e-10 * norm(a));
  }
}

TEST_CASE("cosine-transform path agrees with conjugate gradient") {
  std::mt19937_64 rng(9);
  Grid g(0.5, 10, {7, 6});
  ScalarField rhs = random_scalar(g, rng);
  SpaceSlice b0(g), bT(g);
  for (double& x : b0.values()) x = std::abs(rhs[0]) + 1.0;
  for (double& x : bT.values()) x = 0.5;
  EllipticOptions cg, dct;
  cg.method = EllipticOptions::Method::cg;
  cg.tol = 1e-12;
  dct.method = EllipticOptions::Method::dct;
  SolveReport rep;
  ScalarField a = solve_poisson_neumann(rhs, b0, bT, 1.5, cg);
  ScalarField b = solve_poisson_neumann(rhs, b0, bT, 1.5, dct, &rep);
  CHECK(rep.method == "dct");
  CHECK(rep.relative_residual < 1e-10);
  CHECK(l2_error(a, b) <= 1e-8 * norm(a));
}

TEST_CASE("identity coefficient reduces to the Poisson solve") {
  std::mt19937_64 rng(13);
  Grid g(1.0, 6, {5, 5});
  FluxField flux(g);
  for (double& x : flux.raw()) x = std::normal_distribution<double>()(rng);
  SpaceSlice b0(g, 0.3), bT(g, 0.3);
  EllipticOptions opts;
  opts.method = EllipticOptions::Method::cg;
  opts.tol = 1e-12;
  // Same operator but stored as a general coefficient field.
  CoefficientField general(g);
  for (std::size_t c = 0; c < g.cells(); ++c)
    for (int i = 0; i < 3; ++i) general.at(c)[i * 3 + i] = 1.0;
  ScalarField a = solve_elliptic_varcoeff(general, flux, b0, bT, 0.7, opts);
  ScalarField b = solve_poisson_neumann(divergence(flux), b0, bT, 0.7, opts);
  CHECK(l2_error(a, b) <= 1e-8 * norm(b));
}

TEST_CASE("assembled operators are symmetric") {
  std::mt19937_64 rng(17);
  Grid g(1.0, 6, {5, 4});
  CoefficientField coef = double_integrator_coef(g);
  std::vector<ScreenedOperator> ops = {
      {CoefficientField::identity(g), 0.0, 0.0, 1.3},
      {coef, 0.0, 0.0, 0.9},
      helmholtz_robin_operator(g),
  };
  for (const auto& op : ops) {
    for (int trial = 0; trial < 5; ++trial) {
      ScalarField u = random_scalar(g, rng), v = random_scalar(g, rng);
      const double uv = inner(u, apply(op, v));
      const double vu = inner(v, apply(op, u));
      CHECK(std::abs(uv - vu) <= 1e-10 * std::max(std::abs(uv), 1.0));
    }
  }
}

TEST_CASE("conjugate gradient energy decreases monotonically") {
  std::mt19937_64 rng(19);
  Grid g(1.0, 12, {10, 8});
  CoefficientField coef = double_integrator_coef(g);
  FluxField flux(g);
  for (double& x : flux.raw()) x = std::normal_distribution<double>()(rng);
  SpaceSlice zero(g);
  SolveReport rep;
  solve_elliptic_varcoeff(coef, flux, zero, zero, 1.0, {}, &rep);
  REQUIRE(rep.energy.size() > 3);
  for (std::size_t i = 1; i < rep.energy.size(); ++i)
    CHECK(rep.energy[i] <= rep.energy[i - 1] + 1e-12 * std::abs(rep.energy[i - 1]));
}

TEST_CASE("non-SPD coefficient and iteration cap are reported") {
  Grid g(1.0, 4, {4});
  CoefficientField bad(g);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    auto m = bad.at(c);
    m[0] = 1.0;
    m[3] = (c == 5) ? -1.0 : 1.0;
  }
  SpaceSlice zero(g);
  FluxField flux(g, 1.0);
  CHECK_THROWS_AS(solve_elliptic_varcoeff(bad, flux, zero, zero, 1.0), NonSPDCoefficient);

  std::mt19937_64 rng(23);
  Grid big(1.0, 16, {16});
  EllipticOptions opts;
  opts.method = EllipticOptions::Method::cg;
  opts.max_iter = 2;
  CHECK_THROWS_AS(solve_poisson_neumann(random_scalar(big, rng), SpaceSlice(big), SpaceSlice(big), 1.0, opts),
                  NonConvergence);
}

TEST_CASE("Robin Helmholtz with unit source matches the closed-form profile") {
  // -phi'' + phi = 1, phi'(0) = phi(0), phi'(1) = -phi(1): phi = 1 - exp(-1/2) cosh(t - 1/2).
  double prev = 0.0;
  for (int n : {16, 32, 64}) {
    Grid g(1.0, n, {4});
    SpaceSlice zero(g);
    EllipticOptions opts;
    opts.tol = 1e-12;
    ScalarField phi = solve_helmholtz_robin(ScalarField(g, 1.0), zero, zero, FaceData::zeros(g), opts);
    auto exact = sample(g, [](double t, auto) { return 1.0 - std::exp(-0.5) * std::cosh(t - 0.5); });
    const double err = l2_error(phi, exact);
    CHECK(err < 2.0 / n);
    if (prev > 0.0) CHECK(err < prev);
    prev = err;
  }
}
