#include <catch_amalgamated.hpp>

#include <random>

#include "conj_oracle.hpp"
#include "fricmot/error.hpp"
#include "fricmot/frictions.hpp"

using namespace fricmot;
using Catch::Matchers::WithinAbs;

TEST_CASE("friction evaluation", "[frictions]") {
  CHECK(eval(FrictionSpec::constant(1.0, 0.5), 0.0, 2.0) == 4.0);
  CHECK(eval(FrictionSpec::constant(1.0, 0.5), 3.7, 0.0) == 0.0);
  CHECK(eval(FrictionSpec::constant(0.0, 1.0), 0.0, -3.0) == 9.0);
}

TEST_CASE("subgradient", "[frictions]") {
  auto s = subgradient(FrictionSpec::constant(1.0, 0.5), 0.0, 1.0);
  CHECK(s.lo == 2.0);
  CHECK(s.hi == 2.0);
  s = subgradient(FrictionSpec::constant(1.0, 0.5), 0.0, 0.0);
  CHECK(s.lo == -1.0);
  CHECK(s.hi == 1.0);
  s = subgradient(FrictionSpec::constant(0.0, 1.0), 0.0, 0.0);
  CHECK(s.lo == 0.0);
  CHECK(s.hi == 0.0);
}

TEST_CASE("conjugate closed form", "[frictions]") {
  const auto f = FrictionSpec::constant(1.0, 0.5);
  const double grid = oracle::concave_sup([&](double d) { return 2.0 * d - f.eval(0.0, d); }, -20, 20);
  CHECK_THAT(conjugate(f, 0.0, 2.0).value(), WithinAbs(grid, 1e-10));
  CHECK_THAT(conjugate(f, 0.0, 2.0).value(), WithinAbs(0.5, 1e-15));
  const auto g = FrictionSpec::constant(1.0, 0.0);
  CHECK(conjugate(g, 0.0, 0.5) == ExtendedReal(0.0));
  CHECK(conjugate(g, 0.0, 1.5).is_infinite());
  CHECK_THROWS_AS(conjugate(g, 0.0, 1.5).value(), Error);
}

TEST_CASE("argmax displacement and band", "[frictions]") {
  const auto f = FrictionSpec::constant(1.0, 0.5);
  CHECK(argmax_displacement(f, 0.0, 0.5) == 0.0);
  double arg = 0.0;
  oracle::concave_sup([&](double d) { return 2.0 * d - f.eval(0.0, d); }, -10, 10, 2001, &arg);
  CHECK_THAT(argmax_displacement(f, 0.0, 2.0), WithinAbs(arg, 1e-7));
  CHECK(argmax_displacement(f, 0.0, 2.0) == 1.0);
  try {
    argmax_displacement(FrictionSpec::constant(1.0, 0.0), 0.0, 2.0);
    FAIL("expected unbounded displacement");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnboundedDisplacement);
  }
  CHECK(in_band(f, 0.0, 0.5));
  CHECK(in_band(f, 0.0, -1.0));
  CHECK_FALSE(in_band(f, 0.0, 1.01));
}

TEST_CASE("growth check", "[frictions]") {
  std::vector<double> probe;
  for (double v = -100; v <= 100; v += 0.5) probe.push_back(v);
  CHECK(growth_check(FrictionSpec::constant(1.0, 0.5), probe, 0.5, 2.0, 0.0).pass);
  const auto lin = growth_check(FrictionSpec::constant(1.0, 0.0), probe, 0.1, 2.0, 0.0);
  CHECK_FALSE(lin.pass);
  CHECK(std::abs(lin.worst_v) >= 10.0);
  CHECK_FALSE(growth_check(FrictionSpec::zero(), probe, 0.5, 2.0, 0.0).pass);
}

TEST_CASE("state-dependent coefficients interpolate with constant extrapolation", "[frictions]") {
  const FrictionSpec f(Coefficient({0.0, 1.0}, {0.2, 0.4}), Coefficient({0.0, 2.0}, {1.0, 0.0}));
  CHECK_THAT(f.a(0.5), WithinAbs(0.3, 1e-15));
  CHECK(f.a(-5.0) == 0.2);
  CHECK(f.a(5.0) == 0.4);
  CHECK_THAT(f.b(1.0), WithinAbs(0.5, 1e-15));
  CHECK_THROWS_AS(Coefficient(-1.0), Error);
}

TEST_CASE("friction calculus properties", "[frictions][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(0.0, 1.0), ub(0.05, 1.0), uy(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = FrictionSpec::constant(ua(rng), ub(rng));
    // Fenchel-Young
    for (double v = -2.0; v <= 2.0; v += 0.25)
      for (double y = -3.0; y <= 3.0; y += 0.25) {
        const double lhs = f.eval(0.0, v) + f.conjugate(0.0, y).value();
        CHECK(lhs >= y * v - 1e-12);
        if (f.subgradient(0.0, v).contains(y, 1e-14)) CHECK_THAT(lhs, WithinAbs(y * v, 1e-10));
      }
    // argmax monotone, zero exactly on the band
    double prev = -1e300;
    for (double h = -3.0; h <= 3.0; h += 0.01) {
      const double d = f.argmax_displacement(0.0, h);
      CHECK(d >= prev);
      prev = d;
      CHECK((d == 0.0) == (std::abs(h) <= f.a(0.0)));
      CHECK(f.subgradient(0.0, d).contains(h, 1e-12));
    }
    // conjugate convex, vanishes on band
    for (double y = -3.0; y <= 3.0; y += 0.05) {
      const double h = 0.01;
      CHECK(f.conjugate(0.0, y - h).value() - 2 * f.conjugate(0.0, y).value() + f.conjugate(0.0, y + h).value() >=
            -1e-10);
      if (std::abs(y) <= f.a(0.0)) CHECK(f.conjugate(0.0, y).value() == 0.0);
    }
    const double y = uy(rng);
    const double sup = oracle::concave_sup([&](double d) { return y * d - f.eval(0.0, d); }, -40, 40);
    CHECK_THAT(f.conjugate(0.0, y).value(), WithinAbs(sup, 1e-9));
  }
}
