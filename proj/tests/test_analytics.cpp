#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fricmot/analytics.hpp"
#include "fricmot/error.hpp"
#include "fricmot/lp_oracle.hpp"
#include "gen.hpp"

using namespace fricmot;
using Catch::Matchers::WithinAbs;

namespace {

DiscreteMeasure two_point() { return DiscreteMeasure::from_atoms({0.0, 2.0}, {0.5, 0.5}); }

GridFunction cubic_on(const DiscreteMeasure& a, const DiscreteMeasure& b, double scale) {
  std::vector<double> g = a.locations();
  g.insert(g.end(), b.locations().begin(), b.locations().end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return GridFunction::sample(g, [=](double y) { return scale * y * y * y; });
}

OnestepInstance uniform_instance(std::size_t n, double scale = 1.0 / 6.0) {
  auto mu = gen::uniform_grid(n, -1.0, 1.0);
  auto eta = gen::uniform_grid(n, -2.0, 2.0);
  return {mu, eta, cubic_on(mu, eta, scale)};
}

// Direct sums over the coupling entries.
double direct_turnover(const CouplingMatrix& c) {
  return c.integrate([](double x, double y) { return std::abs(y - x); });
}

double direct_cost(const CouplingMatrix& c, const FrictionSpec& f) {
  return c.integrate([&](double x, double y) { return f.eval(x, y - x); });
}

}  // namespace

TEST_CASE("step statistics on trivial kernels", "[analytics]") {
  SECTION("forced split") {
    CouplingMatrix c({1.0}, {0.0, 2.0});
    c(0, 0) = c(0, 1) = 0.5;
    const auto s = step_stats(c, FrictionSpec::constant(0.3, 0.1));
    CHECK_THAT(s.turnover, WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.turnover_formula, WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.spread_bound, WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.exec_cost, WithinAbs(0.4, 1e-15));
    CHECK(s.band_mass == 0.0);
  }
  SECTION("identity") {
    const auto m = DiscreteMeasure::from_atoms({-1.0, 0.5, 2.0}, {0.2, 0.3, 0.5});
    CouplingMatrix c(m.locations(), m.locations());
    for (std::size_t i = 0; i < 3; ++i) c(i, i) = m.weight(i);
    const std::vector<double> h{0.0, 0.1, -0.1};
    const auto s = step_stats(c, FrictionSpec::constant(0.3, 0.1), &h);
    CHECK(s.turnover == 0.0);
    CHECK(s.exec_cost == 0.0);
    CHECK(s.spread_bound == 0.0);
    CHECK(s.lq_bound == 0.0);
    CHECK_THAT(s.band_mass, WithinAbs(1.0, 1e-15));
  }
  SECTION("no quadratic part leaves the LQ bound undefined") {
    CouplingMatrix c({1.0}, {0.0, 2.0});
    c(0, 0) = c(0, 1) = 0.5;
    const std::vector<double> h{0.5};
    CHECK(std::isnan(step_stats(c, FrictionSpec::constant(0.3, 0.0), &h).lq_bound));
  }
}

TEST_CASE("step statistics on the 64-atom uniform instance", "[analytics]") {
  const auto inst = uniform_instance(64);
  const auto f = FrictionSpec::constant(0.1, 0.2);
  const auto r = solve_onestep_friction(inst.mu, inst.eta, inst.V, f, Sense::Max);
  const auto s = step_stats(r.lp.coupling, f, &r.lp.cert.h);
  CHECK(s.turnover >= 0.0);
  CHECK(s.turnover <= s.spread_bound + 1e-12);
  CHECK(s.exec_cost >= 0.1 * s.turnover - 1e-12);
  CHECK(s.exec_cost >= s.beta_lower - 1e-12);
  CHECK(s.identity_residual <= 1e-9);
  CHECK_THAT(s.turnover, WithinAbs(direct_turnover(r.lp.coupling), 1e-12));
  CHECK_THAT(s.exec_cost, WithinAbs(direct_cost(r.lp.coupling, f), 1e-12));
  CHECK_THAT(s.exec_cost, WithinAbs(r.friction_value, 1e-9));

  const auto k = solve_geometric(build_potential_pair(inst.mu, inst.eta), inst.V, f);
  const auto g = step_stats(k, f);
  const auto gc = kernel_to_coupling(k, inst.mu, &inst.eta);
  CHECK_THAT(g.turnover, WithinAbs(direct_turnover(gc), 1e-12));
  CHECK_THAT(g.exec_cost, WithinAbs(direct_cost(gc, f), 1e-12));
  CHECK(g.turnover <= g.spread_bound + 1e-12);
  CHECK(g.identity_residual <= 1e-9);
}

TEST_CASE("turnover identities and cost bounds on random kernels", "[analytics][property]") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ua(0.0, 0.5), ub(0.05, 0.5);
  for (int trial = 0; trial < 60; ++trial) {
    const auto mu = gen::random_measure(rng, 2 + trial % 6);
    const auto eta = gen::spread(rng, gen::spread(rng, mu, 0.5), 0.5);
    const FrictionSpec f(Coefficient({-2.0, 2.0}, {ua(rng), ua(rng)}), Coefficient({-2.0, 2.0}, {ub(rng), ub(rng)}));
    const auto V = cubic_on(mu, eta, 0.1);
    const auto r = solve_onestep_friction(mu, eta, V, f, Sense::Max);
    std::vector<StepStats> all{step_stats(r.lp.coupling, f, &r.lp.cert.h)};
    try {
      all.push_back(step_stats(solve_geometric(build_potential_pair(mu, eta), V, f), f));
    } catch (const Error&) {
    }
    for (const auto& s : all) {
      CHECK(s.identity_residual <= 1e-9);
      CHECK(s.theta_excess == 0.0);
      CHECK(s.turnover >= 0.0);
      CHECK(s.turnover <= s.spread_bound + 1e-12);
      CHECK(s.exec_cost >= s.alpha_lower - 1e-12);
      CHECK(s.exec_cost >= s.beta_lower - 1e-12);
      for (const auto& a : s.atoms) {
        CHECK(std::abs(a.turnover - a.turnover_formula) <= 1e-9);
        CHECK(a.t_down <= a.x + 1e-12);
        CHECK(a.t_up >= a.x - 1e-12);
      }
    }
    CHECK_THAT(all[0].turnover, WithinAbs(direct_turnover(r.lp.coupling), 1e-12));
  }
}

TEST_CASE("sweeps", "[analytics]") {
  SECTION("forced instance: displacement never changes") {
    const OnestepInstance inst{dirac(1.0), two_point(), cubic_on(dirac(1.0), two_point(), 1.0 / 6.0)};
    const auto r = sweep(inst, {0.0, 0.5, 1.0}, {0.2});
    REQUIRE(r.cells.size() == 3);
    CHECK(r.findings.empty());
    for (const auto& c : r.cells) {
      CHECK(c.stats.band_mass == 0.0);
      CHECK_THAT(c.stats.atoms[0].t_down, WithinAbs(0.0, 1e-12));
      CHECK_THAT(c.stats.atoms[0].t_up, WithinAbs(2.0, 1e-12));
    }
  }
  SECTION("large alpha leaves exactly the mass outside components in the band") {
    const auto mu = DiscreteMeasure::from_atoms({0.0, 3.0}, {0.5, 0.5});
    const auto eta = DiscreteMeasure::from_atoms({-1.0, 1.0, 3.0}, {0.25, 0.25, 0.5});
    const auto r = sweep({mu, eta, cubic_on(mu, eta, 0.01)}, {5.0}, {0.1});
    CHECK_THAT(r.cells[0].stats.band_mass, WithinAbs(0.5, 1e-12));
  }
  SECTION("beta grid on the 64-atom instance") {
    const auto inst = uniform_instance(64, 1.0 / 60.0);
    const std::vector<double> betas{0.15, 0.2, 0.3, 0.4, 0.5};
    const auto r = sweep(inst, {0.1}, betas);
    CHECK(r.hypotheses());
    for (std::size_t ib = 0; ib + 1 < betas.size(); ++ib)
      CHECK(r.cell(0, ib + 1).stats.turnover <= r.cell(0, ib).stats.turnover + 1e-7);
    const auto serial = sweep(inst, {0.1}, betas, 1e-7, 1);
    for (std::size_t c = 0; c < r.cells.size(); ++c) {
      CHECK(r.cells[c].value == serial.cells[c].value);
      CHECK(r.cells[c].stats.turnover == serial.cells[c].stats.turnover);
    }
  }
  SECTION("empty grid") {
    const auto inst = uniform_instance(4);
    CHECK_THROWS_AS(sweep(inst, {}, {0.1}), Error);
    CHECK_THROWS_AS(sweep(inst, {0.1}, {}), Error);
  }
}

TEST_CASE("vanishing friction", "[analytics]") {
  SECTION("geometric endpoints on the 64-atom instance") {
    const auto inst = uniform_instance(64);
    std::vector<std::pair<double, double>> sched;
    for (int n = 1; n <= 8; ++n) sched.emplace_back(0.4 * std::ldexp(1.0, -n), 0.4 * std::ldexp(1.0, -n));
    const auto r = vanishing_friction(inst, sched);
    REQUIRE(r.steps.size() == 8);
    CHECK(r.min_v3 > 0.0);
    CHECK(r.steps.back().endpoint_distance <= 1e-3);
    for (std::size_t n = 0; n + 1 < 8; ++n) {
      CHECK(r.steps[n + 1].endpoint_distance <= r.steps[n].endpoint_distance + 1e-12);
      CHECK(r.steps[n + 1].value >= r.steps[n].value);
    }
    for (const auto& s : r.steps) CHECK(s.lp_endpoint_distance >= 0.0);
  }
  SECTION("equal marginals give zero distance") {
    const auto m = gen::uniform_grid(8, -1.0, 1.0);
    const auto r = vanishing_friction({m, m, cubic_on(m, m, 1.0)}, {{0.1, 0.1}});
    CHECK(r.steps[0].endpoint_distance == 0.0);
    CHECK(r.steps[0].lp_endpoint_distance == 0.0);
  }
  SECTION("constant schedule gives constant distances") {
    const auto inst = uniform_instance(16);
    const auto r = vanishing_friction(inst, {{0.1, 0.2}, {0.1, 0.2}, {0.1, 0.2}});
    CHECK(r.steps[0].endpoint_distance == r.steps[2].endpoint_distance);
    CHECK(r.steps[0].lp_endpoint_distance == r.steps[1].lp_endpoint_distance);
    CHECK(r.steps[0].touching_residual == r.steps[2].touching_residual);
  }
  SECTION("preconditions") {
    const auto inst = uniform_instance(8);
    CHECK_THROWS_AS(vanishing_friction(inst, {{0.1, 0.0}}), Error);
    CHECK_THROWS_AS(vanishing_friction({inst.mu, inst.eta, cubic_on(inst.mu, inst.eta, -1.0)}, {{0.1, 0.1}}), Error);
    CHECK_THROWS_AS(vanishing_friction(inst, {}), Error);
  }
  SECTION("endpoint distance oracle") {
    BiatomicKernel a, b;
    a.push(0.0, 0.5, -1.0, 1.0, 0.5, false, 0);
    a.push(2.0, 0.5, 2.0, 2.0, 0.0, true, -1);
    b.push(0.0, 0.5, -2.0, 2.0, 0.5, false, 0);
    b.push(2.0, 0.5, 1.0, 4.0, 0.5, false, 0);
    CHECK_THAT(endpoint_distance(a, b), WithinAbs(0.5 * 2.0 + 0.5 * 3.0, 1e-15));
  }
}

TEST_CASE("marginal stability", "[analytics]") {
  const auto inst = uniform_instance(64);
  const auto f = FrictionSpec::constant(0.1, 0.2);
  const auto rows = marginal_stability(inst, f, {0.0, 1e-3, 5e-4, 2.5e-4});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].endpoint_l1 == 0.0);
  CHECK(rows[0].coupling_distance == 0.0);
  CHECK(rows[0].w1_mu == 0.0);
  for (std::size_t e = 1; e < 4; ++e) {
    CHECK_FALSE(rows[e].skipped);
    CHECK(rows[e].w1_mu <= rows[e].eps);
    CHECK(rows[e].endpoint_l1 <= rows[e].ratio * rows[e].eps + 1e-15);
    CHECK(rows[e].coupling_distance >= rows[e].w1_mu - 1e-12);
  }
  CHECK(rows[2].endpoint_l1 < rows[1].endpoint_l1);
  CHECK(rows[3].endpoint_l1 < rows[2].endpoint_l1);
  CHECK(rows[3].coupling_distance < rows[1].coupling_distance);
  SECTION("broken convex order is skipped") {
    const auto m = gen::uniform_grid(8, -1.0, 1.0);
    const auto r = marginal_stability({m, m, cubic_on(m, m, 1.0)}, f, {0.05});
    CHECK(r[0].skipped);
    CHECK(r[0].note.find("convex order") != std::string::npos);
  }
}
