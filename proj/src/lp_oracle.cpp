#include "fricmot/lp_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "fricmot/error.hpp"

namespace fricmot {

double DualCertificate::max_violation(const std::vector<double>& sources, const std::vector<double>& targets,
                                      const std::vector<double>& cost) const {
  double worst = 0.0;
  const std::size_t m = targets.size();
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double lhs = phi[i] + psi[j] + h[i] * (targets[j] - sources[i]);
      const double gap = sense == Sense::Min ? lhs - cost[i * m + j] : cost[i * m + j] - lhs;
      worst = std::max(worst, gap);
    }
  return worst;
}

double DualCertificate::max_support_slack(const CouplingMatrix& c, const std::vector<double>& cost,
                                          double mass_tol) const {
  double worst = 0.0;
  const std::size_t m = c.cols();
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (c(i, j) <= mass_tol) continue;
      const double lhs = phi[i] + psi[j] + h[i] * (c.targets[j] - c.sources[i]);
      worst = std::max(worst, std::abs(cost[i * m + j] - lhs));
    }
  return worst;
}

std::vector<double> cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& eta,
                                const std::function<double(double, double)>& c) {
  const std::size_t n = mu.size(), m = eta.size();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = c(mu.location(i), eta.location(j));
  return out;
}

std::vector<double> adjusted_cost(const DiscreteMeasure& mu, const DiscreteMeasure& eta, const GridFunction& V,
                                  const FrictionSpec& f, Sense sense) {
  const double s = sense == Sense::Max ? -1.0 : 1.0;
  return cost_matrix(mu, eta, [&](double x, double y) { return V(y) - V(x) + s * f.eval(x, y - x); });
}

LpResult solve_lp(const DiscreteMeasure& mu, const DiscreteMeasure& eta, const std::vector<double>& cost,
                  Sense sense, const lp::Options& opt) {
  const std::size_t n = mu.size(), m = eta.size();
  if (cost.size() != n * m) throw Error(ErrorKind::Domain, "cost matrix has wrong size");
  for (double c : cost)
    if (!std::isfinite(c)) throw Error(ErrorKind::Domain, "cost must be finite on all pairs");
  const auto order = convex_order_report(mu, eta, 1e-9);
  if (!order.ok) throw Error(ErrorKind::Infeasible, "no martingale coupling: " + order.reason);

  lp::Problem p(2 * n + m, n * m, sense);
  for (std::size_t i = 0; i < n; ++i) {
    p.b[i] = mu.weight(i);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t v = i * m + j;
      p.at(i, v) = 1.0;
      p.at(n + j, v) = 1.0;
      p.at(n + m + i, v) = eta.location(j) - mu.location(i);
      p.c[v] = cost[v];
    }
  }
  for (std::size_t j = 0; j < m; ++j) p.b[n + j] = eta.weight(j);
  const lp::Solution s = lp::solve(p, opt);
  if (s.status == lp::Status::Infeasible)
    throw Error(ErrorKind::Infeasible, "phase-1 residual " + std::to_string(s.phase1_residual) +
                                           " exceeds tolerance; call potentials: " + order.reason);
  if (s.status == lp::Status::Unbounded) throw Error(ErrorKind::Unbounded, "one-step LP unbounded");
  if (s.status != lp::Status::Optimal) throw Error(ErrorKind::Convergence, "one-step LP iteration limit");

  LpResult r;
  r.coupling = CouplingMatrix(mu.locations(), eta.locations());
  r.coupling.probs = s.x;
  r.cert.sense = sense;
  r.cert.phi.assign(s.y.begin(), s.y.begin() + static_cast<long>(n));
  r.cert.psi.assign(s.y.begin() + static_cast<long>(n), s.y.begin() + static_cast<long>(n + m));
  r.cert.h.assign(s.y.begin() + static_cast<long>(n + m), s.y.end());
  const double g = r.cert.psi[0];
  for (double& v : r.cert.psi) v -= g;
  for (double& v : r.cert.phi) v += g;
  r.cert.value = 0.0;
  for (std::size_t i = 0; i < n; ++i) r.cert.value += mu.weight(i) * r.cert.phi[i];
  for (std::size_t j = 0; j < m; ++j) r.cert.value += eta.weight(j) * r.cert.psi[j];
  r.primal = s.objective;
  r.dual = r.cert.value;
  r.iterations = s.iterations;
  return r;
}

OnestepLp solve_onestep_friction(const DiscreteMeasure& mu, const DiscreteMeasure& eta, const GridFunction& V,
                                 const FrictionSpec& f, Sense sense) {
  OnestepLp out;
  out.lp = solve_lp(mu, eta, adjusted_cost(mu, eta, V, f, sense), sense);
  out.value = out.lp.primal;
  out.shift = eta.expect([&](double y) { return V(y); }) - mu.expect([&](double x) { return V(x); });
  out.friction_value = out.lp.coupling.integrate([&](double x, double y) { return f.eval(x, y - x); });
  return out;
}

ExtractResult extract_biatomic(const CouplingMatrix& c, double mass_tol) {
  ExtractResult r;
  r.kernel.targets = c.targets;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    std::vector<std::size_t> support;
    double w = 0.0;
    for (std::size_t j = 0; j < c.cols(); ++j) {
      w += c(i, j);
      if (c(i, j) > mass_tol) support.push_back(j);
    }
    const double x = c.sources[i];
    std::vector<std::pair<std::size_t, double>> res;
    for (std::size_t j : support) res.emplace_back(j, c(i, j));
    if (support.size() == 1 && std::abs(c.targets[support[0]] - x) <= 1e-9) {
      r.kernel.push(x, w, x, x, 0.0, true, -1);
    } else if (support.size() == 2) {
      const double td = c.targets[support[0]], tu = c.targets[support[1]];
      if (!(td <= x + 1e-12 && x <= tu + 1e-12)) {
        r.offending_rows.push_back(i);
        continue;
      }
      r.kernel.push(x, w, td, tu, (x - td) / (tu - td), false, -1);
    } else {
      r.offending_rows.push_back(i);
      continue;
    }
    r.kernel.resolution.push_back(std::move(res));
  }
  r.ok = r.offending_rows.empty();
  return r;
}

BiatomicKernel barycentric_kernel(const CouplingMatrix& c, double mass_tol, double tol_geo) {
  BiatomicKernel k;
  k.targets = c.targets;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    const double x = c.sources[i];
    double w = 0.0, L = 0.0, Lm = 0.0, U = 0.0, Um = 0.0, Z = 0.0;
    std::vector<std::pair<std::size_t, double>> res;
    for (std::size_t j = 0; j < c.cols(); ++j) {
      const double q = c(i, j);
      w += q;
      if (q <= mass_tol) continue;
      res.emplace_back(j, q);
      const double y = c.targets[j];
      if (y < x - tol_geo) {
        L += q;
        Lm += q * y;
      } else if (y > x + tol_geo) {
        U += q;
        Um += q * y;
      } else {
        Z += q;
      }
    }
    if (L + U <= mass_tol) {
      k.push(x, w, x, x, 0.0, true, -1);
    } else {
      const double zl = Z * L / (L + U), zu = Z - zl;
      const double td = L > 0.0 ? (Lm + zl * x) / (L + zl) : x;
      const double tu = U > 0.0 ? (Um + zu * x) / (U + zu) : x;
      const double th = tu > td ? (x - td) / (tu - td) : 0.0;
      k.push(x, w, std::min(td, x), std::max(tu, x), std::clamp(th, 0.0, 1.0), false, -1);
    }
    k.resolution.push_back(std::move(res));
  }
  return k;
}

std::vector<MonotoneViolation> left_monotone_check(const CouplingMatrix& c, double tol, double mass_tol) {
  std::vector<MonotoneViolation> out;
  const std::size_t n = c.rows(), m = c.cols();
  std::vector<long> lo(n, -1), hi(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (c(i, j) > mass_tol) {
        if (lo[i] < 0) lo[i] = static_cast<long>(j);
        hi[i] = static_cast<long>(j);
      }
  for (std::size_t i = 0; i < n; ++i) {
    if (lo[i] < 0 || lo[i] == hi[i]) continue;
    const double ylo = c.targets[static_cast<std::size_t>(lo[i])], yhi = c.targets[static_cast<std::size_t>(hi[i])];
    for (std::size_t i2 = 0; i2 < n; ++i2) {
      if (!(c.sources[i2] > c.sources[i])) continue;
      for (std::size_t j2 = 0; j2 < m; ++j2) {
        if (c(i2, j2) <= mass_tol) continue;
        const double y = c.targets[j2];
        if (y > ylo + tol && y < yhi - tol)
          out.push_back({i, static_cast<std::size_t>(lo[i]), static_cast<std::size_t>(hi[i]), i2, j2});
      }
    }
  }
  return out;
}

}  // namespace fricmot
