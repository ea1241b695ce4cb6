#include <catch_amalgamated.hpp>

#include <json.hpp>
#include <random>

#include "fricmot/duality.hpp"
#include "fricmot/error.hpp"
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

DiscreteMeasure dilate(const DiscreteMeasure& m, double lam) {
  std::vector<double> x;
  const double c = m.mean();
  for (double v : m.locations()) x.push_back(c + lam * (v - c));
  return DiscreteMeasure::from_atoms(x, m.weights(), true);
}

std::vector<DiscreteMeasure> random_chain(std::mt19937_64& rng, std::size_t N, std::size_t n0) {
  std::uniform_real_distribution<double> lam(1.1, 1.6), u01(0.0, 1.0);
  std::vector<DiscreteMeasure> mu{gen::random_measure(rng, n0, -0.5, 0.5)};
  while (mu.size() < N + 1) {
    const auto& last = mu.back();
    mu.push_back(last.size() <= 2 && u01(rng) < 0.7 ? gen::spread(rng, last, 0.6) : dilate(last, lam(rng)));
  }
  return mu;
}

std::vector<DualCertificate> step_certs(const std::vector<DiscreteMeasure>& mu, const std::vector<FrictionSpec>& f) {
  std::vector<DualCertificate> out;
  for (std::size_t t = 0; t + 1 < mu.size(); ++t) {
    const auto cost = cost_matrix(mu[t], mu[t + 1], [&](double x, double y) { return f[t].eval(x, y - x); });
    out.push_back(solve_lp(mu[t], mu[t + 1], cost, Sense::Min).cert);
  }
  return out;
}

std::vector<double> terminal_on(const DiscreteMeasure& m, const PayoffSpec& p) {
  std::vector<double> v;
  for (double y : m.locations()) v.push_back(p.g(y));
  return v;
}

MultiCoupling chain_of(const std::vector<DiscreteMeasure>& mu, const std::vector<CouplingMatrix>& cs) {
  MultiCoupling mc;
  mc.marginals = mu;
  mc.initial_states.assign(mu[0].size(), 0.0);
  mc.steps = cs;
  for (const auto& c : cs) {
    std::vector<StateTransition> tr;
    for (std::size_t i = 0; i < c.rows(); ++i)
      for (std::size_t j = 0; j < c.cols(); ++j)
        if (c(i, j) > 0.0) tr.push_back({c.sources[i], 0.0, c.targets[j], 0.0, c(i, j)});
    mc.lifted.push_back(tr);
  }
  return mc;
}

}  // namespace

TEST_CASE("dual shift", "[duality]") {
  const auto mu = dirac(1.0);
  const auto eta = two_point();
  const std::vector<double> phi{0.3}, psi{-0.2, 0.7};
  SECTION("zero continuation is the identity") {
    const auto s = dual_shift(phi, psi, GridFunction::zero(), mu, eta);
    CHECK(s.phi == phi);
    CHECK(s.psi == psi);
    CHECK(s.objective_shift == 0.0);
  }
  SECTION("linear continuation has zero shift") {
    const auto V = GridFunction::sample({-1.0, 3.0}, [](double y) { return y; });
    CHECK_THAT(dual_shift(phi, psi, V, mu, eta).objective_shift, WithinAbs(0.0, 1e-15));
  }
  SECTION("quadratic continuation on the forced instance") {
    const auto V = GridFunction::sample({0.0, 1.0, 2.0}, [](double y) { return y * y; });
    const auto s = dual_shift(phi, psi, V, mu, eta);
    CHECK_THAT(s.objective_shift, WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.phi[0], WithinAbs(1.3, 1e-15));
    CHECK_THAT(s.psi[1], WithinAbs(-3.3, 1e-15));
  }
  SECTION("shifted certificate is feasible for the pure friction problem") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const auto m = gen::random_measure(rng, 1 + trial % 4);
      const auto e = gen::spread(rng, m);
      const auto V = GridFunction::sample(e.locations(), [](double y) { return std::sin(2.0 * y) + 0.3 * y * y; });
      const auto f = FrictionSpec::constant(0.1, 0.2);
      const auto r = solve_onestep_friction(m, e, V, f, Sense::Max);
      const auto s = dual_shift(r.lp.cert.phi, r.lp.cert.psi, V, m, e);
      double shifted = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) shifted += m.weight(i) * s.phi[i];
      for (std::size_t j = 0; j < e.size(); ++j) shifted += e.weight(j) * s.psi[j];
      CHECK_THAT(shifted + s.objective_shift, WithinAbs(r.lp.dual, 1e-9));
      for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < e.size(); ++j) {
          const double x = m.location(i), y = e.location(j);
          CHECK(s.phi[i] + s.psi[j] + r.lp.cert.h[i] * (y - x) >= -f.eval(x, y - x) - 1e-9);
        }
    }
  }
}

TEST_CASE("global dual assembly refuses infeasible certificates", "[duality]") {
  const std::vector<DiscreteMeasure> mu{dirac(1.0), two_point()};
  const std::vector<FrictionSpec> f{FrictionSpec::constant(1.0, 0.0)};
  auto certs = step_certs(mu, f);
  const auto p = make(PayoffKind::Terminal, OptionType::Call, 1.0);
  const auto gd = assemble_global_dual(certs, mu, f, terminal_on(mu[1], p));
  CHECK_THAT(gd.value, WithinAbs(-0.5, 1e-9));
  certs[0].psi[1] += 0.5;
  try {
    assemble_global_dual(certs, mu, f, terminal_on(mu[1], p));
    FAIL("expected refusal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Refusal);
    const std::string w = e.what();
    CHECK(w.find("step 0") != std::string::npos);
    CHECK(w.find("(1, 2)") != std::string::npos);
  }
}

TEST_CASE("superhedging price examples", "[duality]") {
  SECTION("underlying itself without friction") {
    const std::vector<DiscreteMeasure> mu{dirac(1.0), two_point(),
                                          DiscreteMeasure::from_atoms({-1.0, 1.0, 3.0}, {0.25, 0.5, 0.25})};
    const auto r = superhedging_price(mu, {FrictionSpec::zero(), FrictionSpec::zero()}, make(PayoffKind::Terminal));
    CHECK_THAT(r.value, WithinAbs(1.0, 1e-10));
    CHECK_THAT(r.dual, WithinAbs(1.0, 1e-10));
  }
  SECTION("forced coupling with a call") {
    const auto r = superhedging_price({dirac(1.0), two_point()}, {FrictionSpec::constant(1.0, 0.0)},
                                      make(PayoffKind::Terminal, OptionType::Call, 1.0), {}, true);
    CHECK_THAT(r.value, WithinAbs(-0.5, 1e-10));
    CHECK_THAT(r.dual, WithinAbs(-0.5, 1e-10));
    CHECK_THAT(r.sub_value, WithinAbs(1.5, 1e-10));
    CHECK(r.audit.max_violation <= 1e-10);
  }
  SECTION("equal marginals keep the diagonal") {
    std::mt19937_64 rng(8);
    const auto m = gen::random_measure(rng, 6);
    const auto p = make(PayoffKind::Terminal, OptionType::Call, m.mean());
    const auto r = superhedging_price({m, m}, {FrictionSpec::constant(0.3, 0.1)}, p);
    CHECK_THAT(r.value, WithinAbs(m.expect([&](double y) { return p.g(y); }), 1e-10));
    CHECK(std::abs(r.gap) <= 1e-9);
  }
}

TEST_CASE("certificate export", "[duality]") {
  std::mt19937_64 rng(21);
  const auto mu = random_chain(rng, 2, 2);
  const std::vector<FrictionSpec> f{FrictionSpec::constant(0.1, 0.05), FrictionSpec::constant(0.05, 0.1)};
  for (auto kind : {PayoffKind::Terminal, PayoffKind::Lookback}) {
    const auto r = superhedging_price(mu, f, make(kind, OptionType::Call, mu[0].mean()));
    const std::string text = certificate_json(r.certificate, 1e-8);
    CHECK(text == certificate_json(r.certificate, 1e-8));
    const auto j = nlohmann::json::parse(text);
    CHECK_THAT(j["value"].get<double>(), WithinAbs(r.dual, 1e-12));
    REQUIRE(j["steps"].size() == 2);
    for (std::size_t t = 0; t < 2; ++t) {
      const auto& s = j["steps"][t];
      CHECK(s["x"].size() == s["phi"].size());
      CHECK(s["x"].size() == s["h"].size());
      if (kind == PayoffKind::Terminal) {
        CHECK(s["psi"].size() == s["y"].size());
      } else {
        REQUIRE(s["psi"].size() == s["x"].size());
        CHECK(s["psi"][0].size() == s["y"].size());
      }
    }
    CHECK(j["static_legs"].size() == 3);
    CHECK(j["lambda"].size() == mu[2].size());
  }
}

TEST_CASE("band check bookkeeping", "[duality]") {
  CouplingMatrix c({0.0, 1.0}, {-1.0, 0.0, 1.0, 2.0});
  c(0, 1) = 0.5;
  c(1, 0) = 0.25;
  c(1, 3) = 0.25;
  DualCertificate cert;
  cert.h = {0.8, 0.2};
  const auto f = FrictionSpec::constant(0.5, 0.0);
  const auto m = band_check(cert, c, f);
  REQUIRE(m.size() == 2);
  CHECK(m[0].identity_row);
  CHECK(m[0].h == 0.8);
  CHECK_FALSE(m[1].identity_row);
  cert.h = {0.4, -0.7};
  CHECK(band_check(cert, c, f).empty());
}

TEST_CASE("duality properties on random chains", "[duality][property]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ua(0.0, 0.3), ub(0.0, 0.3), u01(0.0, 1.0), ud(0.01, 0.2);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t N = 1 + trial % 3;
    const auto mu = random_chain(rng, N, 1 + trial % 2);
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
    const auto r = superhedging_price(mu, f, p, {}, true);
    // gap closes and the pathwise inequality holds on the optimal support
    CHECK(std::abs(r.gap) <= 1e-7 * (1 + std::abs(r.value)));
    CHECK_THAT(r.dual, WithinAbs(r.result.dual_value, 1e-10));
    CHECK(r.audit.paths > 0);
    CHECK(r.audit.max_violation <= 1e-8);
    CHECK(r.audit.max_step_violation <= 1e-8);
    CHECK(std::abs(r.audit.mean_slack) <= 1e-7);
    CHECK(r.audit.fy_max_violation <= 1e-9);
    CHECK(r.has_sub);
    if (p.kind != PayoffKind::Terminal) continue;

    // shrunk one-step certificates: feasible, dominate every martingale chain
    auto certs = step_certs(mu, f);
    const auto g = terminal_on(mu[N], p);
    const auto opt = assemble_global_dual(certs, mu, f, g);
    CHECK_THAT(opt.value, WithinAbs(r.value, 1e-8));
    auto shrunk = certs;
    double dmin = 1.0;
    for (auto& c : shrunk)
      for (double& v : c.psi) {
        const double d = ud(rng);
        dmin = std::min(dmin, d);
        v -= d;
      }
    const auto loose = assemble_global_dual(shrunk, mu, f, g);
    std::vector<CouplingMatrix> worst;
    for (std::size_t t = 0; t < N; ++t) {
      const auto cost = cost_matrix(mu[t], mu[t + 1], [&](double x, double y) { return f[t].eval(x, y - x); });
      worst.push_back(solve_lp(mu[t], mu[t + 1], cost, Sense::Max).coupling);
    }
    const auto other = compose_forward(chain_of(mu, worst));
    CHECK(loose.value >= primal_value(other, p, f) - 1e-9);
    CHECK(loose.value >= r.value + dmin - 1e-9);
    const auto audit = superhedge_audit(loose, other, p, f);
    CHECK(audit.min_slack >= dmin - 1e-9);

    // gauge: phi_t + c, psi_t - c leaves value and pathwise slack unchanged
    auto gauged = certs;
    for (auto& c : gauged) {
      const double s = 2.0 * u01(rng) - 1.0;
      for (double& v : c.phi) v += s;
      for (double& v : c.psi) v -= s;
    }
    const auto gg = assemble_global_dual(gauged, mu, f, g);
    CHECK_THAT(gg.value, WithinAbs(opt.value, 1e-12));
    const auto a1 = superhedge_audit(opt, other, p, f), a2 = superhedge_audit(gg, other, p, f);
    CHECK_THAT(a1.min_slack, WithinAbs(a2.min_slack, 1e-12));
    CHECK_THAT(a1.mean_slack, WithinAbs(a2.mean_slack, 1e-12));
  }
}

TEST_CASE("audit on the asian state grid", "[duality]") {
  std::mt19937_64 rng(3);
  const auto m0 = DiscreteMeasure::from_atoms({-0.3, 0.4}, {4.0 / 7.0, 3.0 / 7.0});
  const auto m1 = gen::spread(rng, m0, 0.5);
  const auto m2 = dilate(m1, 1.4);
  MultistepOptions o;
  o.asian_max_states = 4;
  o.asian_grid_points = 7;
  const std::vector<FrictionSpec> f{FrictionSpec::constant(0.05, 0.1), FrictionSpec::constant(0.05, 0.1)};
  const auto r = superhedging_price({m0, m1, m2}, f, make(PayoffKind::Asian, OptionType::Call, 0.0), o);
  CHECK(std::abs(r.gap) <= 1e-7);
  CHECK(r.audit.max_step_violation <= 1e-8);
  CHECK(std::abs(r.audit.mean_slack) <= 1e-7);
  CHECK(r.result.warnings.back().find("expectation") != std::string::npos);
}
