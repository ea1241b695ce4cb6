#include "fricmot/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fricmot/error.hpp"

namespace fricmot {

namespace {

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(a)); }

std::size_t find_atom(const std::vector<double>& g, double x) {
  const auto it = std::lower_bound(g.begin(), g.end(), x - 1e-12 * std::max(1.0, std::abs(x)));
  if (it == g.end() || !close(*it, x)) {
    std::ostringstream os;
    os << "price " << x << " is not an atom of the grid";
    throw Error(ErrorKind::Domain, os.str());
  }
  return std::size_t(it - g.begin());
}

std::string pair_text(std::size_t t, double x, double y, double v) {
  std::ostringstream os;
  os.precision(12);
  os << "step " << t << ": dual inequality violated at (x, y) = (" << x << ", " << y << ") by " << v;
  return os.str();
}

}  // namespace

ShiftedPotentials dual_shift(const std::vector<double>& phi, const std::vector<double>& psi, const GridFunction& V,
                             const DiscreteMeasure& mu, const DiscreteMeasure& eta) {
  if (phi.size() != mu.size() || psi.size() != eta.size())
    throw Error(ErrorKind::Domain, "potential sizes do not match the marginals");
  ShiftedPotentials s;
  s.phi = phi;
  s.psi = psi;
  for (std::size_t i = 0; i < mu.size(); ++i) s.phi[i] += V(mu.location(i));
  for (std::size_t j = 0; j < eta.size(); ++j) s.psi[j] -= V(eta.location(j));
  s.objective_shift = eta.expect([&](double y) { return V(y); }) - mu.expect([&](double x) { return V(x); });
  return s;
}

double GlobalDual::static_leg(std::size_t t, double x) const { return u.at(t)[find_atom(grids.at(t), x)]; }

std::size_t GlobalDual::node_index(std::size_t t, double x, double state) const {
  const StepCertificate& s = steps.at(t);
  auto it = std::lower_bound(s.x.begin(), s.x.end(), x - 1e-12 * std::max(1.0, std::abs(x)));
  std::size_t best = s.x.size();
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t n = std::size_t(it - s.x.begin()); n < s.x.size() && close(s.x[n], x); ++n) {
    const double d = s.state_free ? 0.0 : std::abs(s.state[n] - state);
    if (d < gap) {
      gap = d;
      best = n;
    }
  }
  if (best == s.x.size() || gap > 1e-9 * std::max(1.0, std::abs(state))) {
    std::ostringstream os;
    os << "no node (" << x << ", " << state << ") at step " << t;
    throw Error(ErrorKind::Domain, os.str());
  }
  return best;
}

double GlobalDual::slope(std::size_t t, double x, double state) const { return -steps.at(t).h[node_index(t, x, state)]; }

GlobalDual assemble_global_dual(const std::vector<DualCertificate>& certs, const std::vector<DiscreteMeasure>& marginals,
                                const std::vector<FrictionSpec>& frictions, const std::vector<double>& terminal,
                                double tol) {
  const std::size_t N = certs.size();
  if (marginals.size() != N + 1 || frictions.size() != N)
    throw Error(ErrorKind::Domain, "need N certificates, N frictions and N+1 marginals");
  if (terminal.size() != marginals[N].size()) throw Error(ErrorKind::Domain, "terminal payoff size mismatch");
  GlobalDual gd;
  gd.grids.resize(N + 1);
  gd.u.resize(N + 1);
  for (std::size_t t = 0; t <= N; ++t) {
    gd.grids[t] = marginals[t].locations();
    gd.u[t].assign(marginals[t].size(), 0.0);
  }
  for (std::size_t t = 0; t < N; ++t) {
    const DualCertificate& c = certs[t];
    const auto& xs = gd.grids[t];
    const auto& ys = gd.grids[t + 1];
    if (c.phi.size() != xs.size() || c.psi.size() != ys.size() || c.h.size() != xs.size())
      throw Error(ErrorKind::Domain, "certificate size mismatch at step " + std::to_string(t));
    StepCertificate sc;
    sc.x = xs;
    sc.state.assign(xs.size(), 0.0);
    sc.phi = c.phi;
    sc.h = c.h;
    sc.y = ys;
    sc.psi = c.psi;
    sc.state_free = true;
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j) {
        const double v = c.phi[i] + c.psi[j] + c.h[i] * (ys[j] - xs[i]) - frictions[t].eval(xs[i], ys[j] - xs[i]);
        if (v > tol) throw Error(ErrorKind::Refusal, pair_text(t, xs[i], ys[j], v));
      }
    for (std::size_t i = 0; i < xs.size(); ++i) gd.u[t][i] -= c.phi[i];
    for (std::size_t j = 0; j < ys.size(); ++j) gd.u[t + 1][j] -= c.psi[j];
    gd.steps.push_back(std::move(sc));
  }
  for (std::size_t j = 0; j < terminal.size(); ++j) gd.u[N][j] += terminal[j];
  gd.lambda = gd.u[N];
  gd.nu = 0.0;
  for (std::size_t j = 0; j < terminal.size(); ++j) gd.nu += marginals[N].weight(j) * gd.lambda[j];
  for (std::size_t t = 0; t <= N; ++t)
    for (std::size_t j = 0; j < marginals[t].size(); ++j) gd.value += marginals[t].weight(j) * gd.u[t][j];
  return gd;
}

GlobalDual assemble_global_dual(const MultistepResult& r, const std::vector<DiscreteMeasure>& marginals,
                                const std::vector<FrictionSpec>& frictions, const PayoffSpec& payoff, double tol) {
  const std::size_t N = r.nodes.size();
  if (marginals.size() != N + 1 || frictions.size() != N || r.u.size() != N + 1)
    throw Error(ErrorKind::Domain, "result does not match the marginals");
  GlobalDual gd;
  gd.gauge = "u_0 = W_0; psi = W_{t+1} - u_{t+1}";
  gd.u = r.u;
  for (std::size_t t = 0; t <= N; ++t) gd.grids.push_back(marginals[t].locations());
  for (std::size_t t = 0; t < N; ++t) {
    const auto& ys = gd.grids[t + 1];
    StepCertificate sc;
    sc.y = ys;
    sc.state_free = !r.lifted;
    auto psi_row = [&](double state) {
      std::vector<double> row(ys.size());
      for (std::size_t j = 0; j < ys.size(); ++j) {
        const double ns = r.lifted ? payoff.reduce(state, ys[j]) : 0.0;
        row[j] = r.continuation.value(t + 1, ys[j], ns) - r.u[t + 1][j];
      }
      return row;
    };
    if (!r.lifted) sc.psi = psi_row(0.0);
    for (const Node& nd : r.nodes[t]) {
      sc.x.push_back(nd.x);
      sc.state.push_back(nd.state);
      sc.phi.push_back(-nd.W);
      sc.h.push_back(-nd.H);
      const std::vector<double> row = r.lifted ? psi_row(nd.state) : sc.psi;
      for (std::size_t j = 0; j < ys.size(); ++j) {
        const double v = -nd.W + row[j] - nd.H * (ys[j] - nd.x) - frictions[t].eval(nd.x, ys[j] - nd.x);
        if (v > tol) throw Error(ErrorKind::Refusal, pair_text(t, nd.x, ys[j], v));
      }
      if (r.lifted) sc.psi.insert(sc.psi.end(), row.begin(), row.end());
    }
    gd.steps.push_back(std::move(sc));
  }
  gd.lambda = gd.u[N];
  gd.nu = 0.0;
  for (std::size_t j = 0; j < marginals[N].size(); ++j) gd.nu += marginals[N].weight(j) * gd.lambda[j];
  for (std::size_t t = 0; t <= N; ++t)
    for (std::size_t j = 0; j < marginals[t].size(); ++j) gd.value += marginals[t].weight(j) * gd.u[t][j];
  return gd;
}

AuditReport superhedge_audit(const GlobalDual& gd, const std::vector<Path>& paths, const PayoffSpec& payoff,
                             const std::vector<FrictionSpec>& frictions) {
  AuditReport a;
  a.paths = paths.size();
  a.min_slack = std::numeric_limits<double>::infinity();
  a.max_slack = -std::numeric_limits<double>::infinity();
  double wsum = 0.0;
  for (const Path& p : paths) {
    const std::size_t N = p.prices.size() - 1;
    const bool lifted = p.states.size() == p.prices.size() && payoff.path_dependent();
    double lhs = lifted ? payoff.terminal(p.states[N], p.prices[N], N) : payoff.evaluate(p.prices);
    double psi = 0.0;
    for (std::size_t t = 0; t <= N; ++t) psi += gd.static_leg(t, p.prices[t]);
    for (std::size_t t = 0; t < N; ++t) {
      const StepCertificate& s = gd.steps[t];
      const double x = p.prices[t], dS = p.prices[t + 1] - x;
      const double fx = frictions[t].eval(x, dS);
      const std::size_t n = gd.node_index(t, x, lifted ? p.states[t] : 0.0);
      const std::size_t j = find_atom(s.y, p.prices[t + 1]);
      const double q = s.psi[s.state_free ? j : n * s.y.size() + j];
      a.max_step_violation = std::max(a.max_step_violation, s.phi[n] + q + s.h[n] * dS - fx);
      lhs -= fx;
      psi -= s.h[n] * dS;
    }
    const double slack = psi - lhs;
    a.max_violation = std::max(a.max_violation, -slack);
    a.min_slack = std::min(a.min_slack, slack);
    a.max_slack = std::max(a.max_slack, slack);
    a.mean_slack += p.weight * slack;
    wsum += p.weight;
  }
  if (paths.empty()) a.min_slack = a.max_slack = 0.0;
  if (wsum > 0.0) a.mean_slack /= wsum;
  for (std::size_t t = 0; t < gd.steps.size(); ++t) {
    const StepCertificate& s = gd.steps[t];
    for (std::size_t n = 0; n < s.x.size(); ++n) {
      const ExtendedReal fs = frictions[t].conjugate(s.x[n], s.h[n]);
      if (fs.is_infinite()) continue;
      for (double y : s.y) {
        const double V = y - s.x[n];
        const double v = s.h[n] * V - fs.value() - frictions[t].eval(s.x[n], V);
        a.fy_max_violation = std::max(a.fy_max_violation, v);
        ++a.fy_checks;
      }
    }
  }
  return a;
}

std::vector<BandMismatch> band_check(const DualCertificate& cert, const CouplingMatrix& c, const FrictionSpec& f,
                                     double tol, double mass_tol) {
  std::vector<BandMismatch> out;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    const double x = c.sources[i];
    double row = 0.0, off = 0.0;
    for (std::size_t j = 0; j < c.cols(); ++j) {
      row += c(i, j);
      if (!close(c.targets[j], x)) off += c(i, j);
    }
    if (row <= mass_tol) continue;
    const bool identity = off <= mass_tol;
    const bool banded = std::abs(cert.h[i]) <= f.a(x) + tol;
    if (identity != banded) out.push_back({i, x, cert.h[i], f.a(x), identity});
  }
  return out;
}

PriceResult superhedging_price(const std::vector<DiscreteMeasure>& marginals,
                               const std::vector<FrictionSpec>& frictions, const PayoffSpec& payoff,
                               const MultistepOptions& opts, bool with_sub) {
  PriceResult p;
  p.result = backward_induction(marginals, frictions, payoff, opts);
  p.certificate = assemble_global_dual(p.result, marginals, frictions, payoff);
  p.audit = superhedge_audit(p.certificate, compose_forward(p.result.coupling), payoff, frictions);
  p.value = p.result.value;
  p.dual = p.certificate.value;
  p.gap = p.dual - p.value;
  for (const auto& w : p.result.warnings)
    if (w.rfind("asian state grid", 0) == 0) {
      p.result.warnings.push_back("pathwise audit holds in expectation over the asian state split; see max_step_violation");
      break;
    }
  if (with_sub) {
    p.sub_value = subhedge_value(marginals, frictions, payoff, opts);
    p.has_sub = true;
  } else {
    p.sub_value = std::numeric_limits<double>::quiet_NaN();
  }
  return p;
}

std::string certificate_json(const GlobalDual& gd, double tol) {
  using nlohmann::json;
  json j;
  j["gauge"] = gd.gauge;
  j["tolerance"] = tol;
  j["value"] = gd.value;
  j["nu"] = gd.nu;
  j["lambda"] = gd.lambda;
  json legs = json::array();
  for (std::size_t t = 0; t < gd.u.size(); ++t) legs.push_back({{"t", t}, {"x", gd.grids[t]}, {"u", gd.u[t]}});
  j["static_legs"] = legs;
  json steps = json::array();
  for (std::size_t t = 0; t < gd.steps.size(); ++t) {
    const StepCertificate& s = gd.steps[t];
    json e{{"t", t}, {"x", s.x}, {"phi", s.phi}, {"h", s.h}, {"y", s.y}};
    if (s.state_free) {
      e["psi"] = s.psi;
    } else {
      e["state"] = s.state;
      json rows = json::array();
      for (std::size_t n = 0; n < s.x.size(); ++n)
        rows.push_back(std::vector<double>(s.psi.begin() + long(n * s.y.size()),
                                           s.psi.begin() + long((n + 1) * s.y.size())));
      e["psi"] = rows;
    }
    steps.push_back(e);
  }
  j["steps"] = steps;
  return j.dump(2);
}

}  // namespace fricmot
