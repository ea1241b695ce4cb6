#include "fricmot/analytics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "fricmot/error.hpp"
#include "fricmot/lp_oracle.hpp"

namespace fricmot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Conditional law of row i as (location, probability) pairs.
std::vector<std::pair<double, double>> row_law(const BiatomicKernel& k, std::size_t i) {
  std::vector<std::pair<double, double>> out;
  if (!k.resolution.empty() && !k.resolution[i].empty()) {
    double m = 0.0;
    for (const auto& [j, q] : k.resolution[i]) m += q;
    for (const auto& [j, q] : k.resolution[i]) out.emplace_back(k.targets[j], q / m);
    return out;
  }
  if (k.band[i] || k.t_up[i] <= k.t_down[i]) return {{k.x[i], 1.0}};
  if (k.theta[i] < 1.0) out.emplace_back(k.t_down[i], 1.0 - k.theta[i]);
  if (k.theta[i] > 0.0) out.emplace_back(k.t_up[i], k.theta[i]);
  return out;
}

double row_w1(const std::vector<std::pair<double, double>>& a, const std::vector<std::pair<double, double>>& b) {
  std::vector<double> xa, wa, xb, wb;
  for (const auto& [x, w] : a) {
    xa.push_back(x);
    wa.push_back(w);
  }
  for (const auto& [x, w] : b) {
    xb.push_back(x);
    wb.push_back(w);
  }
  return wasserstein1(DiscreteMeasure::from_atoms(xa, wa, true), DiscreteMeasure::from_atoms(xb, wb, true));
}

// Segments of the merged cumulative levels of two weight vectors: (mass, i, j).
struct Segment {
  double mass;
  std::size_t i, j;
};

std::vector<Segment> merge_levels(const std::vector<double>& wa, const std::vector<double>& wb) {
  std::vector<Segment> out;
  std::size_t i = 0, j = 0;
  double ra = wa.empty() ? 0.0 : wa[0], rb = wb.empty() ? 0.0 : wb[0];
  while (i < wa.size() && j < wb.size()) {
    const double m = std::min(ra, rb);
    if (m > 0.0) out.push_back({m, i, j});
    ra -= m;
    rb -= m;
    if (ra <= 1e-15) {
      if (++i < wa.size()) ra = wa[i];
    }
    if (rb <= 1e-15) {
      if (++j < wb.size()) rb = wb[j];
    }
  }
  return out;
}

// k! times the k-th divided differences of V on its own nodes.
std::vector<double> divided(const GridFunction& V, int k) {
  const auto& x = V.xs();
  std::vector<double> d = V.ys();
  for (int o = 1; o <= k; ++o) {
    std::vector<double> n;
    for (std::size_t i = 0; i + o < x.size(); ++i) n.push_back(o * (d[i + 1] - d[i]) / (x[i + o] - x[i]));
    d = n;
  }
  return d;
}

DiscreteMeasure jitter(const DiscreteMeasure& m, double eps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x = m.locations();
  for (double& v : x) v += eps * u(rng);
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += m.weight(i) * x[i];
  const double shift = m.mean() - mean;
  for (double& v : x) v += shift;
  return DiscreteMeasure::from_atoms(x, m.weights(), true);
}

}  // namespace

StepStats step_stats(const BiatomicKernel& k, const FrictionSpec& f, const std::vector<double>* h) {
  if (h && h->size() != k.size()) throw Error(ErrorKind::Domain, "slope vector does not match the kernel");
  StepStats s;
  bool lq = h != nullptr;
  for (std::size_t i = 0; i < k.size(); ++i) {
    AtomStats a;
    a.x = k.x[i];
    a.weight = k.weight[i];
    a.t_down = k.t_down[i];
    a.t_up = k.t_up[i];
    a.theta = k.theta[i];
    a.band = k.band[i] != 0;
    const double spread = a.band ? 0.0 : a.t_up - a.t_down;
    const double tt = a.band ? 0.0 : a.theta * (1.0 - a.theta);
    a.turnover_formula = 2.0 * tt * spread;
    for (const auto& [y, p] : row_law(k, i)) {
      a.turnover += p * std::abs(y - a.x);
      a.exec_cost += p * f.eval(a.x, y - a.x);
    }
    s.turnover += a.weight * a.turnover;
    s.turnover_formula += a.weight * a.turnover_formula;
    s.exec_cost += a.weight * a.exec_cost;
    if (a.band) s.band_mass += a.weight;
    s.spread_bound += 0.5 * a.weight * spread;
    s.alpha_lower += a.weight * f.a(a.x) * a.turnover;
    s.beta_lower += a.weight * f.b(a.x) * tt * spread * spread;
    s.identity_residual = std::max(s.identity_residual, std::abs(a.turnover - a.turnover_formula));
    s.theta_excess = std::max(s.theta_excess, tt - 0.25);
    if (lq) {
      const double b = f.b(a.x);
      if (b > 0.0)
        s.lq_bound += a.weight * std::max(0.0, std::abs((*h)[i]) - f.a(a.x)) / (2.0 * b);
      else
        lq = false;
    }
    s.atoms.push_back(a);
  }
  if (!lq) s.lq_bound = kNaN;
  return s;
}

StepStats step_stats(const CouplingMatrix& c, const FrictionSpec& f, const std::vector<double>* h) {
  return step_stats(barycentric_kernel(c), f, h);
}

bool SweepReport::hypotheses() const {
  if (!density_ok) return false;
  return std::all_of(curvature_ok.begin(), curvature_ok.end(), [](char c) { return c != 0; });
}

SweepReport sweep(const OnestepInstance& inst, const std::vector<double>& alphas, const std::vector<double>& betas,
                  double tol, unsigned threads) {
  if (alphas.empty() || betas.empty()) throw Error(ErrorKind::Validation, "empty sweep grid");
  for (double v : alphas)
    if (!(v >= 0.0)) throw Error(ErrorKind::Validation, "alpha grid values must be >= 0");
  for (double v : betas)
    if (!(v >= 0.0)) throw Error(ErrorKind::Validation, "beta grid values must be >= 0");
  SweepReport R;
  R.alphas = alphas;
  R.betas = betas;
  R.cells.resize(alphas.size() * betas.size());
  const auto d2 = divided(inst.V, 2);
  R.sup_v2 = d2.empty() ? 0.0 : *std::max_element(d2.begin(), d2.end());
  for (double b : betas) R.curvature_ok.push_back(2.0 * b > R.sup_v2);
  for (double w : inst.mu.weights()) R.density_ok = R.density_ok && w > 0.0;
  for (double w : inst.eta.weights()) R.density_ok = R.density_ok && w > 0.0;

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(R.cells.size());
  auto work = [&]() {
    for (std::size_t c; (c = next.fetch_add(1)) < R.cells.size();) {
      SweepCell& cell = R.cells[c];
      cell.alpha = alphas[c / betas.size()];
      cell.beta = betas[c % betas.size()];
      const FrictionSpec f = FrictionSpec::constant(cell.alpha, cell.beta);
      try {
        if (inst.mu.size() >= 2 && inst.eta.size() >= 2) {
          const MsmReport m = msm_check(inst.V, f, inst.mu.locations(), inst.eta.locations());
          cell.msm_min = m.min_increment;
          cell.msm_ok = m.min_increment >= 0.0;
        } else {
          cell.msm_ok = true;  // no rectangles
        }
        const OnestepLp r = solve_onestep_friction(inst.mu, inst.eta, inst.V, f, Sense::Max);
        cell.value = r.value;
        cell.stats = step_stats(r.lp.coupling, f, &r.lp.cert.h);
      } catch (const std::exception& e) {
        errors[c] = e.what();
      }
    }
  };
  const unsigned hw = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  const unsigned nt = std::min<unsigned>(hw, unsigned(R.cells.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nt; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw Error(ErrorKind::Convergence, "sweep cell failed: " + e);

  auto compare = [&](const std::string& param, double fixed, const SweepCell& a, const SweepCell& b) {
    const double from = param == "alpha" ? a.alpha : a.beta, to = param == "alpha" ? b.alpha : b.beta;
    auto note = [&](const std::string& q, long atom, double slack) {
      R.min_slack = std::min(R.min_slack, slack);
      if (slack < -tol) R.findings.push_back({param, fixed, from, to, q, atom, -slack});
    };
    note("band_mass", -1, b.stats.band_mass - a.stats.band_mass);
    note("turnover", -1, a.stats.turnover - b.stats.turnover);
    for (std::size_t i = 0; i < a.stats.atoms.size(); ++i) {
      const AtomStats &p = a.stats.atoms[i], &q = b.stats.atoms[i];
      note("up_displacement", long(i), (p.t_up - p.x) - (q.t_up - q.x));
      note("down_displacement", long(i), (p.x - p.t_down) - (q.x - q.t_down));
    }
  };
  for (std::size_t ib = 0; ib < betas.size(); ++ib)
    for (std::size_t ia = 0; ia + 1 < alphas.size(); ++ia)
      compare("alpha", betas[ib], R.cell(ia, ib), R.cell(ia + 1, ib));
  for (std::size_t ia = 0; ia < alphas.size(); ++ia)
    for (std::size_t ib = 0; ib + 1 < betas.size(); ++ib)
      compare("beta", alphas[ia], R.cell(ia, ib), R.cell(ia, ib + 1));
  return R;
}

BiatomicKernel frictionless_reference(const DiscreteMeasure& mu, const DiscreteMeasure& eta) {
  const auto cost = cost_matrix(mu, eta, [](double x, double y) { return (y - x) * (y - x) * (y - x); });
  return barycentric_kernel(solve_lp(mu, eta, cost, Sense::Min).coupling);
}

double endpoint_distance(const BiatomicKernel& a, const BiatomicKernel& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::Domain, "kernels have different row counts");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ad = a.band[i] ? a.x[i] : a.t_down[i], au = a.band[i] ? a.x[i] : a.t_up[i];
    const double bd = b.band[i] ? b.x[i] : b.t_down[i], bu = b.band[i] ? b.x[i] : b.t_up[i];
    d += a.weight[i] * (std::abs(ad - bd) + std::abs(au - bu));
  }
  return d;
}

VanishReport vanishing_friction(const OnestepInstance& inst, const std::vector<std::pair<double, double>>& schedule) {
  if (schedule.empty()) throw Error(ErrorKind::Validation, "empty vanishing-friction schedule");
  VanishReport R;
  const auto d3 = divided(inst.V, 3);
  R.min_v3 = d3.empty() ? std::numeric_limits<double>::infinity() : *std::min_element(d3.begin(), d3.end());
  if (!d3.empty() && !(R.min_v3 > 0.0)) {
    std::ostringstream os;
    os << "V''' > 0 fails on the target grid (min difference quotient " << R.min_v3 << ")";
    throw Error(ErrorKind::Validation, os.str());
  }
  const BiatomicKernel ref = frictionless_reference(inst.mu, inst.eta);
  const PotentialPair pp = build_potential_pair(inst.mu, inst.eta);
  for (std::size_t n = 0; n < schedule.size(); ++n) {
    const auto [alpha, beta] = schedule[n];
    if (!(beta > 0.0)) throw Error(ErrorKind::Validation, "schedule step " + std::to_string(n + 1) + " has beta <= 0");
    const FrictionSpec f = FrictionSpec::constant(alpha, beta);
    VanishStep s;
    s.n = n + 1;
    s.alpha = alpha;
    s.beta = beta;
    const BiatomicKernel k = solve_geometric(pp, inst.V, f);
    s.endpoint_distance = endpoint_distance(k, ref);
    const OnestepLp lp = solve_onestep_friction(inst.mu, inst.eta, inst.V, f, Sense::Max);
    s.lp_endpoint_distance = endpoint_distance(barycentric_kernel(lp.lp.coupling), ref);
    for (double r : equal_slope_residual(k, inst.V, f)) s.touching_residual = std::max(s.touching_residual, std::abs(r));
    s.value = kernel_to_coupling(k, inst.mu, &inst.eta).integrate([&](double x, double y) {
      return inst.V(y) - inst.V(x) - f.eval(x, y - x);
    });
    R.steps.push_back(s);
  }
  return R;
}

std::vector<StabilityRow> marginal_stability(const OnestepInstance& inst, const FrictionSpec& f,
                                             const std::vector<double>& eps, std::uint64_t seed) {
  if (eps.empty()) throw Error(ErrorKind::Validation, "empty perturbation list");
  const BiatomicKernel base = solve_geometric(build_potential_pair(inst.mu, inst.eta), inst.V, f);
  std::vector<StabilityRow> out;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    StabilityRow row;
    row.eps = eps[e];
    if (!(eps[e] >= 0.0)) throw Error(ErrorKind::Validation, "perturbation sizes must be >= 0");
    std::mt19937_64 rng(seed + e);
    const DiscreteMeasure mu = eps[e] == 0.0 ? inst.mu : jitter(inst.mu, eps[e], rng);
    const DiscreteMeasure eta = eps[e] == 0.0 ? inst.eta : jitter(inst.eta, eps[e], rng);
    if (!convex_order(mu, eta, 1e-12)) {
      row.skipped = true;
      row.note = "perturbed marginals not in convex order";
      out.push_back(row);
      continue;
    }
    BiatomicKernel k;
    try {
      k = solve_geometric(build_potential_pair(mu, eta), inst.V, f);
    } catch (const Error& err) {
      row.skipped = true;
      row.note = std::string("geometric solver refused: ") + err.what();
      out.push_back(row);
      continue;
    }
    row.w1_mu = wasserstein1(mu, inst.mu);
    row.w1_eta = wasserstein1(eta, inst.eta);
    for (const Segment& s : merge_levels(base.weight, k.weight)) {
      const double bd = base.band[s.i] ? base.x[s.i] : base.t_down[s.i];
      const double bu = base.band[s.i] ? base.x[s.i] : base.t_up[s.i];
      const double kd = k.band[s.j] ? k.x[s.j] : k.t_down[s.j];
      const double ku = k.band[s.j] ? k.x[s.j] : k.t_up[s.j];
      row.endpoint_l1 += s.mass * (std::abs(bd - kd) + std::abs(bu - ku));
      row.coupling_distance += s.mass * (std::abs(base.x[s.i] - k.x[s.j]) + row_w1(row_law(base, s.i), row_law(k, s.j)));
    }
    row.ratio = eps[e] > 0.0 ? row.endpoint_l1 / eps[e] : 0.0;
    out.push_back(row);
  }
  return out;
}

}  // namespace fricmot
