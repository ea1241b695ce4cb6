#include "fricmot/multistep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "fricmot/error.hpp"
#include "fricmot/simplex.hpp"

namespace fricmot {

const char* to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::Terminal: return "terminal";
    case PayoffKind::Lookback: return "lookback";
    case PayoffKind::Barrier: return "barrier";
    case PayoffKind::Asian: return "asian";
    case PayoffKind::CustomGrid: return "custom";
  }
  return "?";
}

double PayoffSpec::g(double z) const {
  if (kind == PayoffKind::CustomGrid) return custom(z);
  switch (option) {
    case OptionType::Call: return std::max(z - strike, 0.0);
    case OptionType::Put: return std::max(strike - z, 0.0);
    case OptionType::Identity: return z;
  }
  return z;
}

double PayoffSpec::initial_state(double s0) const {
  switch (kind) {
    case PayoffKind::Lookback: return s0;
    case PayoffKind::Barrier: return s0 < barrier ? 1.0 : 0.0;
    case PayoffKind::Asian: return s0;
    default: return 0.0;
  }
}

double PayoffSpec::reduce(double state, double y) const {
  switch (kind) {
    case PayoffKind::Lookback: return std::max(state, y);
    case PayoffKind::Barrier: return y < barrier ? state : 0.0;
    case PayoffKind::Asian: return state + y;
    default: return 0.0;
  }
}

double PayoffSpec::terminal(double state, double y, std::size_t N) const {
  switch (kind) {
    case PayoffKind::Lookback: return g(state);
    case PayoffKind::Barrier: return state * g(y);
    case PayoffKind::Asian: return g(state / double(N + 1));
    default: return g(y);
  }
}

double PayoffSpec::evaluate(const std::vector<double>& path) const {
  double s = initial_state(path.front());
  for (std::size_t t = 1; t < path.size(); ++t) s = reduce(s, path[t]);
  return terminal(s, path.back(), path.size() - 1);
}

namespace {

std::size_t locate(const std::vector<double>& v, double x) {
  const auto it = std::lower_bound(v.begin(), v.end(), x - 1e-12 * std::max(1.0, std::abs(x)));
  if (it == v.end() || std::abs(*it - x) > 1e-12 * std::max(1.0, std::abs(x)))
    throw Error(ErrorKind::Domain, "state not on grid");
  return std::size_t(it - v.begin());
}

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || std::abs(x - out.back()) > 1e-12 * std::max(1.0, std::abs(x))) out.push_back(x);
  return out;
}

struct StateSpace {
  std::vector<double> states;
  bool grid = false;
};

// Lifted node lattice: per t, reachable (price index, state index) pairs.
struct Lattice {
  std::vector<StateSpace> spaces;                              // t = 0..N
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> nodes;  // t = 0..N
  std::vector<std::map<std::pair<std::size_t, std::size_t>, std::size_t>> index;

  std::vector<std::pair<std::size_t, double>> next(const PayoffSpec& p, std::size_t t, double state, double y) const {
    const StateSpace& sp = spaces[t + 1];
    const double v = p.reduce(state, y);
    if (!sp.grid) return {{locate(sp.states, v), 1.0}};
    const auto& s = sp.states;
    if (v <= s.front()) return {{0, 1.0}};
    if (v >= s.back()) return {{s.size() - 1, 1.0}};
    const std::size_t k = std::size_t(std::upper_bound(s.begin(), s.end(), v) - s.begin());
    const double w = (v - s[k - 1]) / (s[k] - s[k - 1]);
    std::vector<std::pair<std::size_t, double>> out;
    if (1.0 - w > 0.0) out.emplace_back(k - 1, 1.0 - w);
    if (w > 0.0) out.emplace_back(k, w);
    return out;
  }
};

Lattice build_lattice(const std::vector<DiscreteMeasure>& mu, const PayoffSpec& p, const MultistepOptions& opts,
                      std::vector<std::string>& warnings) {
  const std::size_t N = mu.size() - 1;
  Lattice L;
  L.spaces.resize(N + 1);
  L.nodes.resize(N + 1);
  L.index.resize(N + 1);
  std::vector<double> s0;
  for (double x : mu[0].locations()) s0.push_back(p.initial_state(x));
  L.spaces[0].states = unique_sorted(s0);
  for (std::size_t i = 0; i < mu[0].size(); ++i) {
    const std::pair<std::size_t, std::size_t> key{i, locate(L.spaces[0].states, s0[i])};
    L.index[0][key] = L.nodes[0].size();
    L.nodes[0].push_back(key);
  }
  for (std::size_t t = 0; t < N; ++t) {
    std::vector<double> used;
    for (const auto& [i, k] : L.nodes[t]) used.push_back(L.spaces[t].states[k]);
    used = unique_sorted(used);
    std::vector<double> raw;
    for (double s : used)
      for (double y : mu[t + 1].locations()) raw.push_back(p.reduce(s, y));
    raw = unique_sorted(raw);
    StateSpace& sp = L.spaces[t + 1];
    if (p.kind == PayoffKind::Asian && raw.size() > opts.asian_max_states) {
      const std::size_t G = std::max<std::size_t>(2, opts.asian_grid_points);
      sp.grid = true;
      for (std::size_t g = 0; g < G; ++g)
        sp.states.push_back(raw.front() + (raw.back() - raw.front()) * double(g) / double(G - 1));
      std::ostringstream os;
      os << "asian state grid at t=" << t + 1 << ": " << raw.size() << " reachable sums replaced by a uniform grid of "
         << G << " nodes";
      warnings.push_back(os.str());
    } else {
      sp.states = raw;
    }
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    for (const auto& [i, k] : L.nodes[t])
      for (std::size_t j = 0; j < mu[t + 1].size(); ++j)
        for (const auto& [k2, w] : L.next(p, t, L.spaces[t].states[k], mu[t + 1].location(j)))
          keys.emplace_back(j, k2);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    for (const auto& key : keys) {
      L.index[t + 1][key] = L.nodes[t + 1].size();
      L.nodes[t + 1].push_back(key);
    }
  }
  return L;
}

struct Envelope {
  double W = 0.0, H = 0.0, lo = 0.0, hi = 0.0;
};

// Smallest affine majorant of the points (ys, G) evaluated at x; hint selects the
// slope when x is a vertex.
Envelope concave_envelope(const std::vector<double>& ys, const std::vector<double>& G, double x, double hint) {
  std::vector<std::size_t> hull;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      const double cross = (ys[b] - ys[a]) * (G[j] - G[a]) - (G[b] - G[a]) * (ys[j] - ys[a]);
      if (cross >= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(j);
  }
  const double tol = 1e-12 * std::max(1.0, std::abs(x));
  if (x < ys[hull.front()] - tol || x > ys[hull.back()] + tol)
    throw Error(ErrorKind::Infeasible, "node outside the convex hull of the next marginal");
  Envelope e;
  for (std::size_t q = 0; q < hull.size(); ++q) {
    const std::size_t v = hull[q];
    if (std::abs(ys[v] - x) <= tol) {
      const double sl = q > 0 ? (G[v] - G[hull[q - 1]]) / (ys[v] - ys[hull[q - 1]])
                              : std::numeric_limits<double>::infinity();
      const double sr = q + 1 < hull.size() ? (G[hull[q + 1]] - G[v]) / (ys[hull[q + 1]] - ys[v])
                                            : -std::numeric_limits<double>::infinity();
      e.W = G[v];
      e.H = std::clamp(std::isfinite(hint) ? hint : 0.0, sr, sl);
      if (!std::isfinite(e.H)) e.H = std::isfinite(sl) ? sl : sr;
      e.lo = e.hi = ys[v];
      if (q > 0 && e.H >= sl) e.lo = ys[hull[q - 1]];
      if (q + 1 < hull.size() && e.H <= sr) e.hi = ys[hull[q + 1]];
      return e;
    }
    if (q + 1 < hull.size() && ys[v] < x && x < ys[hull[q + 1]]) {
      const std::size_t b = hull[q + 1];
      e.H = (G[b] - G[v]) / (ys[b] - ys[v]);
      e.W = G[v] + e.H * (x - ys[v]);
      e.lo = ys[v];
      e.hi = ys[b];
      return e;
    }
  }
  throw Error(ErrorKind::Convergence, "envelope evaluation failed");
}

void check_inputs(const std::vector<DiscreteMeasure>& mu, const std::vector<FrictionSpec>& f, const PayoffSpec& p) {
  if (mu.size() < 2) throw Error(ErrorKind::Validation, "need at least two marginals");
  if (f.size() != mu.size() - 1) throw Error(ErrorKind::Validation, "need one friction per step");
  if (p.kind == PayoffKind::Barrier && !std::isfinite(p.barrier))
    throw Error(ErrorKind::Config, "barrier payoff needs a finite barrier level");
  for (std::size_t t = 0; t + 1 < mu.size(); ++t) {
    const auto r = convex_order_report(mu[t], mu[t + 1], 1e-9);
    if (!r.ok) {
      std::ostringstream os;
      os << "step " << t << " -> " << t + 1 << " violates convex order: " << r.reason;
      throw Error(ErrorKind::Ordering, os.str());
    }
  }
}

// max E[sign * Phi - Σ f_t]
MultistepResult solve_core(const std::vector<DiscreteMeasure>& mu, const std::vector<FrictionSpec>& fr,
                           const PayoffSpec& payoff, const MultistepOptions& opts, double sign) {
  check_inputs(mu, fr, payoff);
  const std::size_t N = mu.size() - 1;
  MultistepResult R;
  R.lifted = payoff.path_dependent();
  const Lattice L = build_lattice(mu, payoff, opts, R.warnings);

  // LP-side quantities consumed by the backward recursion.
  std::vector<std::vector<double>> u(N + 1);
  std::vector<std::vector<double>> hint(N);     // per t, per node
  std::vector<std::vector<double>> node_mass(N);
  R.coupling.marginals = mu;
  for (double x : mu[0].locations()) R.coupling.initial_states.push_back(payoff.initial_state(x));
  R.coupling.steps.resize(N);
  R.coupling.lifted.resize(N);
  R.step_friction.assign(N, 0.0);
  R.kernels.resize(N);

  if (!R.lifted) {
    // Independent one-step friction problems; the payoff only enters at N.
    std::vector<LpResult> steps(N);
    std::vector<double> geo_friction(N, std::numeric_limits<double>::quiet_NaN());
    std::vector<CouplingMatrix> geo_coupling(N);
    std::vector<BiatomicKernel> geo_kernel(N);
    double friction_total = 0.0, geo_total = 0.0;
    bool geo_ok = opts.oracle != Oracle::Lp;
    for (std::size_t t = 0; t < N; ++t) {
      const auto cost = cost_matrix(mu[t], mu[t + 1], [&](double x, double y) { return fr[t].eval(x, y - x); });
      steps[t] = solve_lp(mu[t], mu[t + 1], cost, Sense::Min, opts.lp);
      R.lp_rows += 2 * mu[t].size() + mu[t + 1].size();
      R.lp_cols += mu[t].size() * mu[t + 1].size();
      R.lp_iterations += steps[t].iterations;
      friction_total += steps[t].primal;
      if (geo_ok) {
        try {
          geo_kernel[t] = solve_geometric(build_potential_pair(mu[t], mu[t + 1]), GridFunction::zero(), fr[t], opts.geo);
          geo_coupling[t] = kernel_to_coupling(geo_kernel[t], mu[t], &mu[t + 1]);
          geo_friction[t] = geo_coupling[t].integrate([&](double x, double y) { return fr[t].eval(x, y - x); });
          geo_total += geo_friction[t];
        } catch (const Error& e) {
          R.warnings.push_back("step " + std::to_string(t) + ": geometric solver unavailable (" + e.what() +
                               "); LP used");
          geo_ok = false;
        }
      }
    }
    const double terminal = sign * mu[N].expect([&](double y) { return payoff.g(y); });
    const bool use_geo = opts.oracle == Oracle::Geometric && geo_ok;
    R.value = terminal - (use_geo ? geo_total : friction_total);
    R.lp_dual = terminal;
    for (std::size_t t = 0; t < N; ++t) R.lp_dual -= steps[t].dual;
    if (opts.oracle == Oracle::Both && geo_ok)
      for (std::size_t t = 0; t < N; ++t) R.oracle_deltas.push_back(steps[t].primal - geo_friction[t]);
    for (std::size_t t = 0; t < N; ++t) {
      const CouplingMatrix& c = use_geo ? geo_coupling[t] : steps[t].coupling;
      R.coupling.steps[t] = c;
      R.kernels[t] = use_geo ? geo_kernel[t] : barycentric_kernel(c);
      R.step_friction[t] = use_geo ? geo_friction[t] : steps[t].primal;
      for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j)
          if (c(i, j) > 0.0) R.coupling.lifted[t].push_back({c.sources[i], 0.0, c.targets[j], 0.0, c(i, j)});
      hint[t].resize(mu[t].size());
      node_mass[t] = mu[t].weights();
      for (std::size_t i = 0; i < mu[t].size(); ++i) hint[t][i] = -steps[t].cert.h[i];
    }
    // static legs: u_{t+1} = W_{t+1} - psi_t, filled during the backward pass
    R.nodes.resize(N);
    R.continuation.prices.resize(N + 1);
    R.continuation.states.assign(N + 1, {0.0});
    R.continuation.values.resize(N + 1);
    std::vector<double> Wnext(mu[N].size());
    for (std::size_t j = 0; j < mu[N].size(); ++j) Wnext[j] = sign * payoff.g(mu[N].location(j));
    R.continuation.prices[N] = mu[N].locations();
    R.continuation.values[N] = Wnext;
    for (std::size_t t = N; t-- > 0;) {
      const auto& ys = mu[t + 1].locations();
      u[t + 1].resize(ys.size());
      for (std::size_t j = 0; j < ys.size(); ++j) u[t + 1][j] = Wnext[j] - steps[t].cert.psi[j];
      std::vector<double> Wt(mu[t].size());
      for (std::size_t i = 0; i < mu[t].size(); ++i) {
        const double x = mu[t].location(i);
        std::vector<double> G(ys.size());
        for (std::size_t j = 0; j < ys.size(); ++j) G[j] = Wnext[j] - u[t + 1][j] - fr[t].eval(x, ys[j] - x);
        const Envelope e = concave_envelope(ys, G, x, hint[t][i]);
        R.nodes[t].push_back({x, 0.0, node_mass[t][i], e.W, e.H, e.lo, e.hi});
        Wt[i] = e.W;
      }
      R.continuation.prices[t] = mu[t].locations();
      R.continuation.values[t] = Wt;
      Wnext = Wt;
    }
    u[0] = Wnext;
  } else {
    // Markov lift on (price, reduced state).
    std::vector<std::size_t> node_row_offset(N), marg_row_offset(N), mart_row_offset(N), var_offset(N);
    std::size_t rows = 0, cols = 0;
    for (std::size_t t = 0; t < N; ++t) {
      node_row_offset[t] = rows;
      rows += L.nodes[t].size();
    }
    for (std::size_t t = 0; t < N; ++t) {
      marg_row_offset[t] = rows;
      rows += mu[t + 1].size();
    }
    for (std::size_t t = 0; t < N; ++t) {
      mart_row_offset[t] = rows;
      rows += L.nodes[t].size();
    }
    for (std::size_t t = 0; t < N; ++t) {
      var_offset[t] = cols;
      cols += L.nodes[t].size() * mu[t + 1].size();
    }
    if (double(rows) * double(cols) > 4e8)
      throw Error(ErrorKind::Domain, "lifted LP too large (" + std::to_string(rows) + " x " + std::to_string(cols) + ")");
    lp::Problem P(rows, cols, lp::Sense::Max);
    for (std::size_t n = 0; n < L.nodes[0].size(); ++n) P.b[node_row_offset[0] + n] = mu[0].weight(L.nodes[0][n].first);
    for (std::size_t t = 0; t < N; ++t)
      for (std::size_t j = 0; j < mu[t + 1].size(); ++j) P.b[marg_row_offset[t] + j] = mu[t + 1].weight(j);
    for (std::size_t t = 0; t < N; ++t) {
      const std::size_t m = mu[t + 1].size();
      for (std::size_t n = 0; n < L.nodes[t].size(); ++n) {
        const auto [i, k] = L.nodes[t][n];
        const double x = mu[t].location(i), s = L.spaces[t].states[k];
        for (std::size_t j = 0; j < m; ++j) {
          const double y = mu[t + 1].location(j);
          const std::size_t v = var_offset[t] + n * m + j;
          P.at(node_row_offset[t] + n, v) = 1.0;
          P.at(marg_row_offset[t] + j, v) = 1.0;
          P.at(mart_row_offset[t] + n, v) = y - x;
          double c = -fr[t].eval(x, y - x);
          for (const auto& [k2, w] : L.next(payoff, t, s, y)) {
            if (t + 1 < N)
              P.at(node_row_offset[t + 1] + L.index[t + 1].at({j, k2}), v) -= w;
            else
              c += w * sign * payoff.terminal(L.spaces[N].states[k2], y, N);
          }
          P.c[v] = c;
        }
      }
    }
    const lp::Solution S = lp::solve(P, opts.lp);
    if (S.status == lp::Status::Infeasible) throw Error(ErrorKind::Infeasible, "lifted LP infeasible");
    if (S.status == lp::Status::Unbounded) throw Error(ErrorKind::Unbounded, "lifted LP unbounded");
    if (S.status != lp::Status::Optimal) throw Error(ErrorKind::Convergence, "lifted LP iteration limit");
    R.lp_rows = rows;
    R.lp_cols = cols;
    R.lp_iterations = S.iterations;
    R.value = S.objective;
    R.lp_dual = S.dual_objective;
    for (std::size_t t = 0; t < N; ++t) {
      const std::size_t m = mu[t + 1].size();
      u[t + 1].resize(m);
      for (std::size_t j = 0; j < m; ++j) u[t + 1][j] = S.y[marg_row_offset[t] + j];
      hint[t].resize(L.nodes[t].size());
      node_mass[t].assign(L.nodes[t].size(), 0.0);
      CouplingMatrix c(mu[t].locations(), mu[t + 1].locations());
      for (std::size_t n = 0; n < L.nodes[t].size(); ++n) {
        hint[t][n] = S.y[mart_row_offset[t] + n];
        const auto [i, k] = L.nodes[t][n];
        const double x = mu[t].location(i), s = L.spaces[t].states[k];
        for (std::size_t j = 0; j < m; ++j) {
          const double q = std::max(0.0, S.x[var_offset[t] + n * m + j]);
          if (q <= 0.0) continue;
          node_mass[t][n] += q;
          c(i, j) += q;
          const double y = mu[t + 1].location(j);
          R.step_friction[t] += q * fr[t].eval(x, y - x);
          for (const auto& [k2, w] : L.next(payoff, t, s, y))
            R.coupling.lifted[t].push_back({x, s, y, L.spaces[t + 1].states[k2], q * w});
        }
      }
      R.coupling.steps[t] = c;
      R.kernels[t] = barycentric_kernel(c);
    }
    if (opts.oracle != Oracle::Lp) R.warnings.push_back("geometric solver not used for path-dependent payoffs; LP used");

    // backward envelope recursion over the lattice
    R.nodes.resize(N);
    R.continuation.prices.resize(N + 1);
    R.continuation.states.resize(N + 1);
    R.continuation.values.resize(N + 1);
    for (std::size_t t = 0; t <= N; ++t) {
      R.continuation.prices[t] = mu[t].locations();
      R.continuation.states[t] = L.spaces[t].states;
      R.continuation.values[t].assign(mu[t].size() * L.spaces[t].states.size(), std::numeric_limits<double>::quiet_NaN());
    }
    std::vector<double> Wnext(L.nodes[N].size());
    for (std::size_t n = 0; n < L.nodes[N].size(); ++n) {
      const auto [j, k] = L.nodes[N][n];
      Wnext[n] = sign * payoff.terminal(L.spaces[N].states[k], mu[N].location(j), N);
      R.continuation.values[N][j * L.spaces[N].states.size() + k] = Wnext[n];
    }
    for (std::size_t t = N; t-- > 0;) {
      const auto& ys = mu[t + 1].locations();
      std::vector<double> Wt(L.nodes[t].size());
      for (std::size_t n = 0; n < L.nodes[t].size(); ++n) {
        const auto [i, k] = L.nodes[t][n];
        const double x = mu[t].location(i), s = L.spaces[t].states[k];
        std::vector<double> G(ys.size());
        for (std::size_t j = 0; j < ys.size(); ++j) {
          double w1 = 0.0;
          for (const auto& [k2, w] : L.next(payoff, t, s, ys[j])) w1 += w * Wnext[L.index[t + 1].at({j, k2})];
          G[j] = w1 - u[t + 1][j] - fr[t].eval(x, ys[j] - x);
        }
        const Envelope e = concave_envelope(ys, G, x, hint[t][n]);
        R.nodes[t].push_back({x, s, node_mass[t][n], e.W, e.H, e.lo, e.hi});
        Wt[n] = e.W;
        R.continuation.values[t][i * L.spaces[t].states.size() + k] = e.W;
      }
      Wnext = Wt;
    }
    u[0].assign(mu[0].size(), 0.0);
    for (std::size_t n = 0; n < L.nodes[0].size(); ++n) u[0][L.nodes[0][n].first] = Wnext[n];
  }

  R.u = u;
  R.dual_value = 0.0;
  for (std::size_t t = 0; t <= N; ++t)
    for (std::size_t j = 0; j < mu[t].size(); ++j) R.dual_value += mu[t].weight(j) * u[t][j];

  // per-step value identity on the optimal transitions
  R.dpp_residual.assign(N, 0.0);
  for (std::size_t t = 0; t < N; ++t) {
    double lhs = 0.0, rhs = 0.0;
    for (const Node& nd : R.nodes[t]) lhs += nd.mass * nd.W;
    for (const StateTransition& tr : R.coupling.lifted[t]) {
      const double wn = R.continuation.value(t + 1, tr.y, tr.next_state);
      const std::size_t j = std::size_t(mu[t + 1].find(tr.y, 1e-12));
      rhs += tr.mass * (wn - u[t + 1][j] - fr[t].eval(tr.x, tr.y - tr.x));
    }
    R.dpp_residual[t] = std::abs(lhs - rhs);
  }
  return R;
}

}  // namespace

double ContinuationGrid::value(std::size_t t, double x, double state) const {
  const auto& P = prices[t];
  const auto& S = states[t];
  const auto& V = values[t];
  auto bracket = [](const std::vector<double>& g, double v, std::size_t& a, std::size_t& b, double& w) {
    if (g.size() == 1 || v <= g.front()) {
      a = b = 0;
      w = 0.0;
      return;
    }
    if (v >= g.back()) {
      a = b = g.size() - 1;
      w = 0.0;
      return;
    }
    b = std::size_t(std::lower_bound(g.begin(), g.end(), v) - g.begin());
    if (std::abs(g[b] - v) <= 1e-12 * std::max(1.0, std::abs(v))) {
      a = b;
      w = 0.0;
      return;
    }
    a = b - 1;
    w = (v - g[a]) / (g[b] - g[a]);
  };
  std::size_t pa, pb, sa, sb;
  double pw, sw;
  bracket(P, x, pa, pb, pw);
  bracket(S, state, sa, sb, sw);
  double acc = 0.0, wsum = 0.0;
  const std::size_t ns = S.size();
  const std::pair<std::size_t, double> pc[2] = {{pa, 1.0 - pw}, {pb, pw}};
  const std::pair<std::size_t, double> sc[2] = {{sa, 1.0 - sw}, {sb, sw}};
  for (const auto& [pi, pwt] : pc)
    for (const auto& [si, swt] : sc) {
      const double w = pwt * swt;
      if (w <= 0.0) continue;
      const double v = V[pi * ns + si];
      if (std::isnan(v)) continue;
      acc += w * v;
      wsum += w;
    }
  return wsum > 0.0 ? acc / wsum : std::numeric_limits<double>::quiet_NaN();
}

MultistepResult backward_induction(const std::vector<DiscreteMeasure>& marginals,
                                   const std::vector<FrictionSpec>& frictions, const PayoffSpec& payoff,
                                   const MultistepOptions& opts) {
  return solve_core(marginals, frictions, payoff, opts, 1.0);
}

double subhedge_value(const std::vector<DiscreteMeasure>& marginals, const std::vector<FrictionSpec>& frictions,
                      const PayoffSpec& payoff, const MultistepOptions& opts) {
  MultistepOptions o = opts;
  o.oracle = Oracle::Lp;
  return -solve_core(marginals, frictions, payoff, o, -1.0).value;
}

std::vector<Path> compose_forward(const MultiCoupling& mc, double mass_tol) {
  std::vector<Path> paths;
  const DiscreteMeasure& mu0 = mc.marginals.at(0);
  for (std::size_t i = 0; i < mu0.size(); ++i) {
    const double s = i < mc.initial_states.size() ? mc.initial_states[i] : 0.0;
    paths.push_back({{mu0.location(i)}, {s}, mu0.weight(i)});
  }
  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); };
  for (std::size_t t = 0; t < mc.steps.size(); ++t) {
    std::vector<StateTransition> tr;
    if (t < mc.lifted.size() && !mc.lifted[t].empty()) {
      tr = mc.lifted[t];
    } else {
      const CouplingMatrix& c = mc.steps[t];
      for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j)
          if (c(i, j) > 0.0) tr.push_back({c.sources[i], 0.0, c.targets[j], 0.0, c(i, j)});
    }
    std::sort(tr.begin(), tr.end(), [](const StateTransition& a, const StateTransition& b) {
      return a.x != b.x ? a.x < b.x : a.state < b.state;
    });
    std::vector<Path> next;
    for (const Path& p : paths) {
      const double x = p.prices.back(), s = p.states.back();
      double node = 0.0;
      auto lo = std::lower_bound(tr.begin(), tr.end(), x - 1e-12 * std::max(1.0, std::abs(x)),
                                 [](const StateTransition& a, double v) { return a.x < v; });
      std::vector<const StateTransition*> hits;
      for (auto it = lo; it != tr.end() && same(it->x, x); ++it)
        if (same(it->state, s) || (mc.lifted.size() <= t || mc.lifted[t].empty())) {
          hits.push_back(&*it);
          node += it->mass;
        }
      if (node <= 0.0) {
        if (p.weight > mass_tol)
          throw Error(ErrorKind::MarginalMismatch, "chain mismatch at step " + std::to_string(t) + ": no transition from " +
                                                       std::to_string(x));
        continue;
      }
      for (const StateTransition* h : hits) {
        Path q = p;
        q.prices.push_back(h->y);
        q.states.push_back(h->next_state);
        q.weight = p.weight * h->mass / node;
        if (q.weight > mass_tol) next.push_back(std::move(q));
      }
    }
    paths = std::move(next);
  }
  return paths;
}

double primal_value(const std::vector<Path>& paths, const PayoffSpec& payoff,
                    const std::vector<FrictionSpec>& frictions) {
  double v = 0.0;
  for (const Path& p : paths) {
    double cost = 0.0;
    for (std::size_t t = 0; t + 1 < p.prices.size(); ++t)
      cost += frictions.at(t).eval(p.prices[t], p.prices[t + 1] - p.prices[t]);
    v += p.weight * (payoff.evaluate(p.prices) - cost);
  }
  return v;
}

}  // namespace fricmot
