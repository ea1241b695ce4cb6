#include "fricmot/onestep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "fricmot/error.hpp"

namespace fricmot {

namespace {

double adjusted(const GridFunction& V, const FrictionSpec& f, double x, double y) {
  return V(y) - V(x) - f.eval(x, y - x);
}

}  // namespace

MsmReport msm_check(const GridFunction& V, const FrictionSpec& f, const std::vector<double>& x_grid,
                    const std::vector<double>& y_grid, std::size_t cap, std::uint64_t seed) {
  MsmReport r;
  const std::size_t nx = x_grid.size(), ny = y_grid.size();
  if (nx < 2 || ny < 2) throw Error(ErrorKind::Domain, "msm_check needs at least two points per grid");
  std::vector<double> c(nx * ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) c[i * ny + j] = adjusted(V, f, x_grid[i], y_grid[j]);
  r.min_increment = std::numeric_limits<double>::infinity();
  auto visit = [&](std::size_t i, std::size_t i2, std::size_t a, std::size_t b) {
    const double d = c[i * ny + a] + c[i2 * ny + b] - c[i * ny + b] - c[i2 * ny + a];
    ++r.rectangles;
    if (d < r.min_increment) {
      r.min_increment = d;
      r.x = x_grid[i];
      r.x2 = x_grid[i2];
      r.y_lo = y_grid[a];
      r.y_hi = y_grid[b];
    }
  };
  const double total = 0.25 * double(nx) * double(nx - 1) * double(ny) * double(ny - 1);
  if (total <= double(cap)) {
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t i2 = i + 1; i2 < nx; ++i2)
        for (std::size_t a = 0; a < ny; ++a)
          for (std::size_t b = a + 1; b < ny; ++b) visit(i, i2, a, b);
  } else {
    r.subsampled = true;
    // Every rectangle is a sum of elementary cells, so the cells decide the sign.
    for (std::size_t i = 0; i + 1 < nx; ++i)
      for (std::size_t a = 0; a + 1 < ny; ++a) visit(i, i + 1, a, a + 1);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> ux(0, nx - 1), uy(0, ny - 1);
    for (std::size_t s = 0; s < cap; ++s) {
      std::size_t i = ux(rng), i2 = ux(rng), a = uy(rng), b = uy(rng);
      if (i == i2 || a == b) continue;
      if (i > i2) std::swap(i, i2);
      if (a > b) std::swap(a, b);
      visit(i, i2, a, b);
    }
  }
  // c_xyy by central differences on a coarse subset of nodes
  const double span = std::max(x_grid.back() - x_grid.front(), y_grid.back() - y_grid.front());
  const double h = 1e-3 * std::max(span, 1.0);
  r.kappa_estimate = std::numeric_limits<double>::infinity();
  const std::size_t sx = std::max<std::size_t>(1, nx / 32), sy = std::max<std::size_t>(1, ny / 32);
  for (std::size_t i = 0; i < nx; i += sx)
    for (std::size_t j = 0; j < ny; j += sy) {
      const double x = x_grid[i], y = y_grid[j];
      auto cyy = [&](double xx) {
        return (adjusted(V, f, xx, y + h) - 2.0 * adjusted(V, f, xx, y) + adjusted(V, f, xx, y - h)) / (h * h);
      };
      r.kappa_estimate = std::min(r.kappa_estimate, (cyy(x + h) - cyy(x - h)) / (2.0 * h));
    }
  return r;
}

BiatomicKernel solve_geometric(const PotentialPair& pp, const GridFunction& V, const FrictionSpec& f,
                               const GeometricOptions& opts) {
  const DiscreteMeasure& mu = pp.mu;
  const DiscreteMeasure& eta = pp.eta;
  BiatomicKernel k;
  k.targets = eta.locations();

  if (mu.size() >= 2 && eta.size() >= 2) {
    const MsmReport msm = msm_check(V, f, mu.locations(), eta.locations());
    if (msm.min_increment < -opts.msm_tol || !msm.strict(opts.msm_tol)) {
      if (!opts.force) {
        std::ostringstream os;
        os << (msm.min_increment < -opts.msm_tol ? "MSM fails" : "degenerate MSM (selection not unique)")
           << ": rectangle increment " << msm.min_increment << " at x=(" << msm.x << ", " << msm.x2 << "), y=("
           << msm.y_lo << ", " << msm.y_hi << ")";
        throw Error(ErrorKind::Refusal, os.str());
      }
      k.tags.push_back("selection not unique");
    }
  }
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double x = mu.location(i);
    if (pp.component_of(x) >= 0 && !(f.b(x) >= opts.b_lower) && !opts.force) {
      std::ostringstream os;
      os << "quadratic coefficient b(" << x << ") = " << f.b(x) << " below b_lower = " << opts.b_lower;
      throw Error(ErrorKind::Refusal, os.str());
    }
  }
  for (double y : V.xs())
    if (std::abs(V.second_derivative(y)) > opts.kink_threshold) {
      k.tags.push_back("continuation kink");
      break;
    }

  const std::size_t m = eta.size();
  std::vector<double> rem(eta.weights());
  std::vector<double> cum(m), pint(m);
  const std::vector<double>& y = eta.locations();

  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double x = mu.location(i);
    double w = mu.weight(i);
    double acc = 0.0, accm = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      acc += rem[j];
      accm += rem[j] * y[j];
      cum[j] = acc;
      pint[j] = accm;
    }
    const double R = acc;
    w = std::min(w, R);
    // I(u) = ∫_0^u Q_rem
    auto I = [&](double u) {
      if (u <= 0.0) return 0.0;
      const auto it = std::lower_bound(cum.begin(), cum.end(), u);
      const std::size_t j = it == cum.end() ? m - 1 : std::size_t(it - cum.begin());
      const double before = j == 0 ? 0.0 : cum[j - 1];
      const double pb = j == 0 ? 0.0 : pint[j - 1];
      return pb + (u - before) * y[j];
    };
    auto G = [&](double s) { return I(s + w) - I(s) - w * x; };
    const double smax = std::max(0.0, R - w);
    std::vector<double> cand{0.0, smax};
    for (std::size_t j = 0; j < m; ++j) {
      if (cum[j] > 0.0 && cum[j] < smax) cand.push_back(cum[j]);
      if (cum[j] - w > 0.0 && cum[j] - w < smax) cand.push_back(cum[j] - w);
    }
    std::sort(cand.begin(), cand.end());
    double s = smax;
    double ga = G(cand.front());
    if (ga >= 0.0) {
      s = cand.front();
    } else {
      for (std::size_t c = 1; c < cand.size(); ++c) {
        const double gb = G(cand[c]);
        if (gb >= 0.0) {
          const double sa = cand[c - 1], sb = cand[c];
          s = gb > ga ? sa - ga * (sb - sa) / (gb - ga) : sb;
          s = std::clamp(s, sa, sb);
          break;
        }
        ga = gb;
      }
    }
    // take [s, s+w] from the remaining mass
    std::vector<std::pair<std::size_t, double>> res;
    double L = 0.0, Lm = 0.0, U = 0.0, Um = 0.0, Z = 0.0;
    double prev = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double lo = std::max(prev, s), hi = std::min(cum[j], s + w);
      prev = cum[j];
      if (hi <= lo) continue;
      const double q = std::min(hi - lo, rem[j]);
      if (q <= 1e-13 * w) continue;
      rem[j] -= q;
      if (rem[j] <= 1e-12 * eta.weight(j)) rem[j] = 0.0;
      res.emplace_back(j, q);
      if (y[j] < x - opts.tol_geo) {
        L += q;
        Lm += q * y[j];
      } else if (y[j] > x + opts.tol_geo) {
        U += q;
        Um += q * y[j];
      } else {
        Z += q;
      }
    }
    const int comp = pp.component_of(x);
    if (L + U <= opts.tol_mass * mu.weight(i)) {
      k.push(x, mu.weight(i), x, x, 0.0, true, comp);
    } else {
      const double zl = Z * L / (L + U), zu = Z - zl;
      const double td = L > 0.0 ? (Lm + zl * x) / (L + zl) : x;
      const double tu = U > 0.0 ? (Um + zu * x) / (U + zu) : x;
      const double th = tu > td ? (x - td) / (tu - td) : 0.0;
      k.push(x, mu.weight(i), std::min(td, x), std::max(tu, x), std::clamp(th, 0.0, 1.0), false, comp);
    }
    k.resolution.push_back(std::move(res));
  }
  return k;
}

std::vector<double> equal_slope_residual(const BiatomicKernel& k, const GridFunction& V, const FrictionSpec& f) {
  std::vector<double> out(k.size(), 0.0);
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k.band[i]) continue;
    const double x = k.x[i];
    const ClosedInterval gu = f.subgradient(x, k.t_up[i] - x), gd = f.subgradient(x, k.t_down[i] - x);
    // slope sets V'(T) - ∂f; residual is the signed gap between them
    const double ulo = V.derivative(k.t_up[i]) - gu.hi, uhi = V.derivative(k.t_up[i]) - gu.lo;
    const double dlo = V.derivative(k.t_down[i]) - gd.hi, dhi = V.derivative(k.t_down[i]) - gd.lo;
    if (ulo > dhi)
      out[i] = ulo - dhi;
    else if (dlo > uhi)
      out[i] = uhi - dlo;
  }
  return out;
}

std::vector<double> coupling_identity_residual(const BiatomicKernel& k, const DiscreteMeasure& eta) {
  if (k.resolution.size() != k.size())
    throw Error(ErrorKind::Validation, "coupling identity needs the kernel's target resolution");
  const std::size_t n = k.size(), m = eta.size();
  std::vector<std::size_t> lo(n, m), hi(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, q] : k.resolution[i]) {
      lo[i] = std::min(lo[i], j);
      hi[i] = std::max(hi[i], j);
    }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (k.band[i] || k.resolution[i].empty()) continue;
    // rows up to x whose targets lie in [T_lo, T_hi] must exhaust the open range between them
    double rows_mass = 0.0, exhausted = 0.0;
    for (std::size_t r = 0; r <= i; ++r) {
      if (k.component[r] != k.component[i] || k.resolution[r].empty()) continue;
      if (lo[r] < lo[i] || hi[r] > hi[i]) continue;
      rows_mass += k.weight[r];
      for (const auto& [j, q] : k.resolution[r])
        if (j == lo[i] || j == hi[i]) exhausted += q;
    }
    for (std::size_t j = lo[i] + 1; j < hi[i]; ++j) exhausted += eta.weight(j);
    out[i] = exhausted - rows_mass;
  }
  return out;
}

DiscreteMeasure endpoint_pushforward(const BiatomicKernel& k) {
  std::vector<double> loc, w;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k.band[i]) {
      loc.push_back(k.x[i]);
      w.push_back(k.weight[i]);
      continue;
    }
    loc.push_back(k.t_down[i]);
    w.push_back(k.weight[i] * (1.0 - k.theta[i]));
    loc.push_back(k.t_up[i]);
    w.push_back(k.weight[i] * k.theta[i]);
  }
  return DiscreteMeasure::from_atoms(loc, w, true);
}

CouplingMatrix kernel_to_coupling(const BiatomicKernel& k, const DiscreteMeasure& mu, const DiscreteMeasure* eta,
                                  double snap_tol, double mismatch_tol) {
  if (k.size() != mu.size()) throw Error(ErrorKind::Validation, "kernel and source measure differ in size");
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (std::abs(k.x[i] - mu.location(i)) > 1e-12)
      throw Error(ErrorKind::Validation, "kernel atoms are not aligned with the source measure");

  CouplingMatrix c;
  if (k.resolution.size() == k.size() && !k.targets.empty()) {
    c = CouplingMatrix(mu.locations(), k.targets);
    for (std::size_t i = 0; i < k.size(); ++i)
      for (const auto& [j, q] : k.resolution[i]) c(i, j) += q;
  } else {
    auto snap = [&](double t) {
      if (eta) {
        const long j = eta->find(t, snap_tol);
        if (j >= 0) return eta->location(std::size_t(j));
      }
      return t;
    };
    std::vector<double> tg;
    for (std::size_t i = 0; i < k.size(); ++i) {
      tg.push_back(snap(k.t_down[i]));
      tg.push_back(snap(k.t_up[i]));
    }
    if (eta) tg.insert(tg.end(), eta->locations().begin(), eta->locations().end());
    std::sort(tg.begin(), tg.end());
    tg.erase(std::unique(tg.begin(), tg.end()), tg.end());
    c = CouplingMatrix(mu.locations(), tg);
    auto col = [&](double t) { return std::size_t(std::lower_bound(tg.begin(), tg.end(), t) - tg.begin()); };
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (k.band[i]) {
        c(i, col(snap(k.x[i]))) += k.weight[i];
        continue;
      }
      c(i, col(snap(k.t_down[i]))) += k.weight[i] * (1.0 - k.theta[i]);
      c(i, col(snap(k.t_up[i]))) += k.weight[i] * k.theta[i];
    }
  }
  if (eta) {
    const auto cs = c.col_sums();
    std::vector<double> loc, w;
    for (std::size_t j = 0; j < cs.size(); ++j)
      if (cs[j] > 0.0) {
        loc.push_back(c.targets[j]);
        w.push_back(cs[j]);
      }
    const double d = wasserstein1(DiscreteMeasure::from_atoms(loc, w, true), *eta);
    if (d > mismatch_tol) {
      std::ostringstream os;
      os << "kernel pushforward differs from the target marginal: W1 = " << d;
      throw Error(ErrorKind::MarginalMismatch, os.str());
    }
  }
  return c;
}

}  // namespace fricmot
