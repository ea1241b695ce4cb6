#include <catch_amalgamated.hpp>

#include <random>

#include "fricmot/error.hpp"
#include "fricmot/multistep.hpp"
#include "gen.hpp"
#include "path_lp.hpp"

using namespace fricmot;
using Catch::Matchers::WithinAbs;

namespace {

DiscreteMeasure two_point() { return DiscreteMeasure::from_atoms({0.0, 2.0}, {0.5, 0.5}); }

PayoffSpec make(PayoffKind k, OptionType o = OptionType::Identity, double strike = 0.0, double barrier = 0.0) {
  PayoffSpec p;
  p.kind = k;
  p.option = o;
  p.strike = strike;
  p.barrier = barrier;
  return p;
}

double friction_sum(const std::vector<FrictionSpec>& f, const std::vector<double>& s) {
  double c = 0.0;
  for (std::size_t t = 0; t + 1 < s.size(); ++t) c += f[t].eval(s[t], s[t + 1] - s[t]);
  return c;
}

double brute_super(const std::vector<DiscreteMeasure>& mu, const std::vector<FrictionSpec>& f, const PayoffSpec& p) {
  const auto r = pathlp::solve(mu, [&](const std::vector<double>& s) { return p.evaluate(s) - friction_sum(f, s); }, true);
  REQUIRE(r.feasible);
  return r.value;
}

double brute_sub(const std::vector<DiscreteMeasure>& mu, const std::vector<FrictionSpec>& f, const PayoffSpec& p) {
  const auto r = pathlp::solve(mu, [&](const std::vector<double>& s) { return p.evaluate(s) + friction_sum(f, s); }, false);
  REQUIRE(r.feasible);
  return r.value;
}

DiscreteMeasure dilate(const DiscreteMeasure& m, double lambda) {
  std::vector<double> x;
  const double c = m.mean();
  for (double v : m.locations()) x.push_back(c + lambda * (v - c));
  return DiscreteMeasure::from_atoms(x, m.weights(), true);
}

}  // namespace

TEST_CASE("payoff reducers", "[multistep]") {
  const auto lb = make(PayoffKind::Lookback, OptionType::Call, 1.0);
  CHECK(lb.evaluate({1.0, 0.0, 2.5}) == 1.5);
  CHECK(lb.evaluate({1.0, 0.5, 0.0}) == 0.0);
  const auto br = make(PayoffKind::Barrier, OptionType::Call, 0.5, 2.0);
  CHECK(br.evaluate({1.0, 1.5, 1.9}) == 1.9 - 0.5);
  CHECK(br.evaluate({1.0, 2.0, 1.0}) == 0.0);
  CHECK(br.initial_state(2.0) == 0.0);
  const auto as = make(PayoffKind::Asian, OptionType::Put, 2.0);
  CHECK_THAT(as.evaluate({1.0, 2.0, 0.0}), WithinAbs(1.0, 1e-15));
  CHECK(make(PayoffKind::Terminal).evaluate({1.0, 3.0}) == 3.0);
}

TEST_CASE("degenerate chain", "[multistep]") {
  const std::vector<DiscreteMeasure> mu{dirac(1.0), dirac(1.0), dirac(1.0)};
  const std::vector<FrictionSpec> f{FrictionSpec::constant(0.3, 0.2), FrictionSpec::constant(1.0, 1.0)};
  for (auto k : {PayoffKind::Terminal, PayoffKind::Lookback, PayoffKind::Asian}) {
    const auto r = backward_induction(mu, f, make(k));
    CHECK_THAT(r.value, WithinAbs(1.0, 1e-12));
    CHECK_THAT(r.dual_value, WithinAbs(1.0, 1e-12));
    for (const auto& kern : r.kernels) CHECK(kern.band[0]);
  }
  const auto paths = compose_forward(backward_induction(mu, f, make(PayoffKind::Terminal)).coupling);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].weight == 1.0);
  CHECK(paths[0].prices == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(primal_value(paths, make(PayoffKind::Terminal), f) == 1.0);
}

TEST_CASE("forced lookback instance", "[multistep]") {
  const std::vector<DiscreteMeasure> mu{dirac(1.0), two_point(), two_point()};
  const auto p = make(PayoffKind::Lookback, OptionType::Call, 1.0);
  const std::vector<FrictionSpec> f0{FrictionSpec::zero(), FrictionSpec::zero()};
  const auto r0 = backward_induction(mu, f0, p);
  CHECK_THAT(r0.value, WithinAbs(brute_super(mu, f0, p), 1e-10));
  const std::vector<FrictionSpec> f1{FrictionSpec::constant(0.25, 0.0), FrictionSpec::constant(0.25, 0.0)};
  const auto r1 = backward_induction(mu, f1, p);
  CHECK_THAT(r1.value, WithinAbs(r0.value - 0.25, 1e-10));
  CHECK_THAT(r1.value, WithinAbs(brute_super(mu, f1, p), 1e-10));
  // step 1 stays put at the optimum
  CHECK(r1.kernels[1].band[0]);
  CHECK(r1.kernels[1].band[1]);
  CHECK_THAT(r1.step_friction[1], WithinAbs(0.0, 1e-12));
}

TEST_CASE("forward composition and path values", "[multistep]") {
  const std::vector<DiscreteMeasure> mu{dirac(1.0), dirac(1.0), two_point()};
  const std::vector<FrictionSpec> f{FrictionSpec::zero(), FrictionSpec::zero()};
  const auto r = backward_induction(mu, f, make(PayoffKind::Terminal));
  const auto paths = compose_forward(r.coupling);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0].prices == std::vector<double>{1.0, 1.0, 0.0});
  CHECK(paths[1].prices == std::vector<double>{1.0, 1.0, 2.0});
  CHECK(paths[0].weight == 0.5);
  const auto call = make(PayoffKind::Terminal, OptionType::Call, 1.0);
  CHECK_THAT(primal_value(paths, call, f), WithinAbs(0.5, 1e-15));
  const std::vector<FrictionSpec> f1{FrictionSpec::constant(1.0, 0.0), FrictionSpec::constant(1.0, 0.0)};
  CHECK_THAT(primal_value(paths, call, f1), WithinAbs(-0.5, 1e-15));
  SECTION("one step gives the coupling entries") {
    const auto one = backward_induction({dirac(1.0), two_point()}, {FrictionSpec::zero()}, call);
    const auto ps = compose_forward(one.coupling);
    REQUIRE(ps.size() == 2);
    CHECK(ps[1].prices == std::vector<double>{1.0, 2.0});
    CHECK(ps[1].weight == 0.5);
  }
}

TEST_CASE("subhedging", "[multistep]") {
  const auto call = make(PayoffKind::Terminal, OptionType::Call, 1.0);
  const std::vector<FrictionSpec> f0{FrictionSpec::zero()};
  CHECK_THAT(subhedge_value({dirac(1.0), two_point()}, f0, call), WithinAbs(0.5, 1e-12));
  CHECK_THAT(backward_induction({dirac(1.0), two_point()}, f0, call).value, WithinAbs(0.5, 1e-12));
  const auto ident = make(PayoffKind::Terminal);
  const auto mu = DiscreteMeasure::from_atoms({-1.0, 1.0}, {0.5, 0.5});
  const auto eta = DiscreteMeasure::from_atoms({-2.0, 0.0, 2.0}, {0.25, 0.5, 0.25});
  CHECK_THAT(subhedge_value({mu, eta}, f0, ident), WithinAbs(0.0, 1e-12));
  SECTION("two couplings: lookback on a genuine choice") {
    const auto wide = DiscreteMeasure::from_atoms({-3.0, -1.0, 1.0, 3.0}, {0.25, 0.25, 0.25, 0.25});
    const std::vector<DiscreteMeasure> m{dirac(0.0), mu, wide};
    const std::vector<FrictionSpec> f{FrictionSpec::zero(), FrictionSpec::zero()};
    const auto lb = make(PayoffKind::Lookback, OptionType::Identity);
    const double sup = backward_induction(m, f, lb).value, sub = subhedge_value(m, f, lb);
    CHECK(sub < sup - 1e-6);
    CHECK_THAT(sup, WithinAbs(brute_super(m, f, lb), 1e-9));
    CHECK_THAT(sub, WithinAbs(brute_sub(m, f, lb), 1e-9));
  }
}

TEST_CASE("ordering failure names the step", "[multistep]") {
  try {
    backward_induction({dirac(1.0), two_point(), dirac(1.0)}, {FrictionSpec::zero(), FrictionSpec::zero()},
                       make(PayoffKind::Terminal));
    FAIL("expected ordering error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Ordering);
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("asian state grid above the cap", "[multistep]") {
  std::mt19937_64 rng(3);
  const auto m0 = DiscreteMeasure::from_atoms({-0.3, 0.4}, {4.0 / 7.0, 3.0 / 7.0});
  const auto m1 = gen::spread(rng, m0, 0.5);
  const auto m2 = dilate(m1, 1.4);
  MultistepOptions o;
  o.asian_max_states = 4;
  o.asian_grid_points = 7;
  const std::vector<FrictionSpec> f{FrictionSpec::constant(0.05, 0.1), FrictionSpec::constant(0.05, 0.1)};
  const auto r = backward_induction({m0, m1, m2}, f, make(PayoffKind::Asian, OptionType::Call, 0.0), o);
  CHECK_FALSE(r.warnings.empty());
  CHECK(std::abs(r.value - r.dual_value) <= 1e-7 * (1 + std::abs(r.value)));
  const auto exact = backward_induction({m0, m1, m2}, f, make(PayoffKind::Asian, OptionType::Call, 0.0));
  CHECK(exact.warnings.empty());
  CHECK_THAT(exact.value, WithinAbs(brute_super({m0, m1, m2}, f, make(PayoffKind::Asian, OptionType::Call, 0.0)), 1e-8));
}

TEST_CASE("multistep properties against the path-space LP", "[multistep][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ua(0.0, 0.3), ub(0.0, 0.3), lam(1.1, 1.6), u01(0.0, 1.0);
  for (int trial = 0; trial < 48; ++trial) {
    const std::size_t N = 1 + trial % 3;
    std::vector<DiscreteMeasure> mu{gen::random_measure(rng, 1 + trial % 2, -0.5, 0.5)};
    while (mu.size() < N + 1) {
      const auto& last = mu.back();
      mu.push_back(last.size() <= 2 && u01(rng) < 0.7 ? gen::spread(rng, last, 0.6) : dilate(last, lam(rng)));
    }
    std::vector<FrictionSpec> f;
    for (std::size_t t = 0; t < N; ++t) f.push_back(FrictionSpec::constant(ua(rng), ub(rng)));
    const double lo = mu.back().location(0), hi = mu.back().location(mu.back().size() - 1);
    const double K = lo + (hi - lo) * u01(rng);
    PayoffSpec p;
    switch (trial % 4) {
      case 0: p = make(PayoffKind::Terminal, OptionType::Call, K); break;
      case 1: p = make(PayoffKind::Lookback, OptionType::Call, K); break;
      case 2: p = make(PayoffKind::Barrier, OptionType::Call, lo, lo + (hi - lo) * (0.5 + 0.5 * u01(rng))); break;
      default: p = make(PayoffKind::Asian, OptionType::Put, K); break;
    }
    const auto r = backward_induction(mu, f, p);
    CHECK_THAT(r.value, WithinAbs(brute_super(mu, f, p), 1e-7));
    CHECK(std::abs(r.value - r.dual_value) <= 1e-6 * (1 + std::abs(r.value)));
    for (double d : r.dpp_residual) CHECK(d <= 1e-7);
    // terminal continuation is the payoff on its grid
    const auto& cg = r.continuation;
    for (std::size_t j = 0; j < cg.prices[N].size(); ++j)
      for (std::size_t k = 0; k < cg.states[N].size(); ++k) {
        const double v = cg.values[N][j * cg.states[N].size() + k];
        if (!std::isnan(v)) CHECK(v == p.terminal(cg.states[N][k], cg.prices[N][j], N));
      }
    // optimal path law attains the value and has the right marginals
    const auto paths = compose_forward(r.coupling);
    CHECK_THAT(primal_value(paths, p, f), WithinAbs(r.value, 1e-7));
    for (std::size_t t = 0; t <= N; ++t) {
      std::vector<double> x, w;
      for (const auto& q : paths) {
        x.push_back(q.prices[t]);
        w.push_back(q.weight);
      }
      CHECK(wasserstein1(DiscreteMeasure::from_atoms(x, w, true), mu[t]) <= 1e-8);
    }
    for (std::size_t t = 0; t < N; ++t) {
      const auto rs = r.coupling.steps[t].row_sums(), cs = r.coupling.steps[t].col_sums();
      for (std::size_t i = 0; i < rs.size(); ++i) CHECK_THAT(rs[i], WithinAbs(mu[t].weight(i), 1e-8));
      for (std::size_t j = 0; j < cs.size(); ++j) CHECK_THAT(cs[j], WithinAbs(mu[t + 1].weight(j), 1e-8));
      CHECK(r.coupling.steps[t].barycenter_residual() <= 1e-8);
    }
    // subhedging and friction monotonicity
    const double sub = subhedge_value(mu, f, p);
    CHECK_THAT(sub, WithinAbs(brute_sub(mu, f, p), 1e-7));
    std::vector<FrictionSpec> f0(N, FrictionSpec::zero()), f2;
    for (std::size_t t = 0; t < N; ++t) f2.push_back(FrictionSpec::constant(2 * f[t].a(0) + 0.01, 2 * f[t].b(0)));
    const double sup0 = backward_induction(mu, f0, p).value;
    CHECK(subhedge_value(mu, f0, p) <= sup0 + 1e-9);
    CHECK(r.value <= sup0 + 1e-9);
    CHECK(backward_induction(mu, f2, p).value <= r.value + 1e-9);
    if (p.kind == PayoffKind::Terminal)
      CHECK_THAT(sup0, WithinAbs(mu.back().expect([&](double y) { return p.g(y); }), 1e-8));
  }
}
