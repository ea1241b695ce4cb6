#include "fricmot/measures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "fricmot/error.hpp"
#include "fricmot/io.hpp"

namespace fricmot {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::Arbitrage: return "arbitrage";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Unbounded: return "unbounded";
    case ErrorKind::UnboundedDisplacement: return "unbounded-displacement";
    case ErrorKind::Refusal: return "refusal";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::MarginalMismatch: return "marginal-mismatch";
    case ErrorKind::Config: return "config";
    case ErrorKind::Validation: return "validation";
  }
  return "unknown";
}

PiecewiseLinear::PiecewiseLinear(std::vector<double> xs, std::vector<double> ys,
                                 Extrapolation extrap)
    : xs_(std::move(xs)), ys_(std::move(ys)), extrap_(extrap) {
  if (xs_.size() != ys_.size() || xs_.empty())
    throw Error(ErrorKind::Domain, "piecewise-linear function needs matching, non-empty breakpoints");
  for (std::size_t i = 1; i < xs_.size(); ++i)
    if (!(xs_[i] > xs_[i - 1]))
      throw Error(ErrorKind::Domain, "piecewise-linear breakpoints must be strictly increasing");
}

double PiecewiseLinear::operator()(double x) const {
  const std::size_t n = xs_.size();
  if (n == 1) return extrap_ == Extrapolation::Zero && x != xs_[0] ? 0.0 : ys_[0];
  if (x <= xs_.front() || x >= xs_.back()) {
    const bool left = x <= xs_.front();
    if (x == xs_.front()) return ys_.front();
    if (x == xs_.back()) return ys_.back();
    switch (extrap_) {
      case Extrapolation::Constant: return left ? ys_.front() : ys_.back();
      case Extrapolation::Zero: return 0.0;
      case Extrapolation::Linear: {
        const std::size_t i = left ? 0 : n - 2;
        const double s = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
        return left ? ys_[0] + s * (x - xs_[0]) : ys_[n - 1] + s * (x - xs_[n - 1]);
      }
    }
  }
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - xs_.begin());
  const std::size_t i = j - 1;
  const double t = (x - xs_[i]) / (xs_[j] - xs_[i]);
  return ys_[i] + t * (ys_[j] - ys_[i]);
}

double PiecewiseLinear::slope(double x) const {
  const std::size_t n = xs_.size();
  if (n == 1) return 0.0;
  if (x < xs_.front() || x > xs_.back()) {
    if (extrap_ != Extrapolation::Linear) return 0.0;
  }
  std::size_t i = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin());
  i = i == 0 ? 0 : i - 1;
  if (i >= n - 1) i = n - 2;
  return (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
}

DiscreteMeasure DiscreteMeasure::from_atoms(std::vector<double> locations,
                                            std::vector<double> weights, bool normalize) {
  if (locations.size() != weights.size())
    throw Error(ErrorKind::Domain, "locations and weights differ in length");
  std::vector<std::size_t> order(locations.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < locations.size(); ++i) {
    if (!std::isfinite(locations[i]) || !std::isfinite(weights[i]))
      throw Error(ErrorKind::Domain, "non-finite atom");
    if (weights[i] < 0.0) throw Error(ErrorKind::Domain, "negative atom weight");
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return locations[a] < locations[b]; });
  DiscreteMeasure m;
  for (std::size_t k : order) {
    if (weights[k] == 0.0) continue;
    if (!m.x_.empty() && m.x_.back() == locations[k]) {
      m.w_.back() += weights[k];
    } else {
      m.x_.push_back(locations[k]);
      m.w_.push_back(weights[k]);
    }
  }
  if (m.x_.empty()) throw Error(ErrorKind::Domain, "measure has no atoms");
  double total = 0.0;
  for (double w : m.w_) total += w;
  if (normalize) {
    for (double& w : m.w_) w /= total;
  } else if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorKind::Domain, "weights sum to " + std::to_string(total) + ", expected 1");
  }
  m.cum_.resize(m.w_.size());
  double c = 0.0;
  for (std::size_t i = 0; i < m.w_.size(); ++i) {
    c += m.w_[i];
    m.cum_[i] = c;
  }
  m.mass_ = c;
  return m;
}

double DiscreteMeasure::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) s += w_[i] * x_[i];
  return s;
}

double DiscreteMeasure::moment(double p) const {
  double s = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) s += w_[i] * std::pow(std::abs(x_[i]), p);
  return s;
}

double DiscreteMeasure::expect(const std::function<double(double)>& g) const {
  double s = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) s += w_[i] * g(x_[i]);
  return s;
}

double DiscreteMeasure::cdf(double k) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), k);
  if (it == x_.begin()) return 0.0;
  const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  return i + 1 == x_.size() ? 1.0 : std::min(1.0, cum_[i]);
}

double DiscreteMeasure::cdf_left(double k) const {
  const auto it = std::lower_bound(x_.begin(), x_.end(), k);
  if (it == x_.begin()) return 0.0;
  const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(1.0, cum_[i]);
}

double DiscreteMeasure::quantile(double u) const {
  if (!(u > 0.0 && u <= 1.0)) throw Error(ErrorKind::Domain, "quantile level outside (0,1]");
  for (std::size_t i = 0; i < x_.size(); ++i)
    if (cum_[i] >= u - 1e-14) return x_[i];
  return x_.back();
}

double DiscreteMeasure::call(double k) const {
  double s = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i)
    if (x_[i] > k) s += w_[i] * (x_[i] - k);
  return s;
}

long DiscreteMeasure::find(double k, double tol) const {
  const auto it = std::lower_bound(x_.begin(), x_.end(), k - tol);
  if (it != x_.end() && std::abs(*it - k) <= tol) return static_cast<long>(it - x_.begin());
  return -1;
}

DiscreteMeasure dirac(double x) { return DiscreteMeasure::from_atoms({x}, {1.0}); }

DiscreteMeasure quantile_grid(std::size_t n, const std::function<double(double)>& quantile_fn) {
  std::vector<double> xs(n), ws(n, 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) xs[i] = quantile_fn((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return DiscreteMeasure::from_atoms(xs, ws, true);
}

double cdf(const DiscreteMeasure& m, double k) { return m.cdf(k); }
double quantile(const DiscreteMeasure& m, double u) { return m.quantile(u); }
double call_potential(const DiscreteMeasure& m, double k) { return m.call(k); }

std::vector<double> merged_support(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::merge(a.locations().begin(), a.locations().end(), b.locations().begin(), b.locations().end(),
             std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double grid_modulus(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const auto pts = merged_support(a, b);
  double gap = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) gap = std::max(gap, pts[i] - pts[i - 1]);
  return gap;
}

OrderReport convex_order_report(const DiscreteMeasure& mu, const DiscreteMeasure& eta, double tol) {
  OrderReport r;
  r.mean_gap = eta.mean() - mu.mean();
  if (std::abs(r.mean_gap) > tol) {
    r.ok = false;
    r.reason = "means differ by " + format_double(r.mean_gap);
  }
  r.worst_gap = std::numeric_limits<double>::infinity();
  for (double k : merged_support(mu, eta)) {
    const double g = eta.call(k) - mu.call(k);
    if (g < r.worst_gap) {
      r.worst_gap = g;
      r.worst_k = k;
    }
  }
  if (r.worst_gap < -tol) {
    r.ok = false;
    if (!r.reason.empty()) r.reason += "; ";
    r.reason += "call potential C_eta(k) < C_mu(k) at k=" + format_double(r.worst_k) + " (gap " +
                format_double(r.worst_gap) + ")";
  }
  return r;
}

bool convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& eta, double tol) {
  return convex_order_report(mu, eta, tol).ok;
}

int PotentialPair::component_of(double x) const {
  for (std::size_t c = 0; c < components.size(); ++c)
    if (components[c].contains(x)) return static_cast<int>(c);
  return -1;
}

PotentialPair build_potential_pair(const DiscreteMeasure& mu, const DiscreteMeasure& eta) {
  const auto rep = convex_order_report(mu, eta, 1e-9);
  if (!rep.ok) throw Error(ErrorKind::Ordering, "marginals not in convex order: " + rep.reason);
  PotentialPair pp;
  pp.mu = mu;
  pp.eta = eta;
  const auto ks = merged_support(mu, eta);
  std::vector<double> vals(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) vals[i] = eta.call(ks[i]) - mu.call(ks[i]);
  // Both ends of the merged support lie outside the interior of either hull.
  vals.front() = 0.0;
  vals.back() = 0.0;
  pp.delta_f = PiecewiseLinear(ks, vals, Extrapolation::Zero);
  const double scale = std::max(1.0, eta.call(ks.front()));
  pp.tol_component = 1e-10 * scale;
  std::size_t last_zero = 0;
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (vals[i] <= pp.tol_component) {
      if (i > last_zero + 1) pp.components.push_back({ks[last_zero], ks[i]});
      last_zero = i;
    }
  }
  return pp;
}

double wasserstein1(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const auto ks = merged_support(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < ks.size(); ++i)
    s += std::abs(a.cdf(ks[i]) - b.cdf(ks[i])) * (ks[i + 1] - ks[i]);
  return s;
}

DiscreteMeasure from_call_prices(const std::vector<double>& strikes, const std::vector<double>& prices,
                                 double forward, double tol) {
  const std::size_t n = strikes.size();
  if (n < 3 || prices.size() != n)
    throw Error(ErrorKind::Domain, "call-price ingestion needs at least 3 strikes with prices");
  for (std::size_t i = 1; i < n; ++i)
    if (!(strikes[i] > strikes[i - 1])) throw Error(ErrorKind::Domain, "strikes must be strictly increasing");
  std::vector<double> slope(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i)
    slope[i] = (prices[i + 1] - prices[i]) / (strikes[i + 1] - strikes[i]);
  auto triple = [&](std::size_t i) {
    std::ostringstream os;
    os << "(" << format_double(strikes[i - 1]) << ", " << format_double(strikes[i]) << ", "
       << format_double(strikes[i + 1]) << ")";
    return os.str();
  };
  std::vector<double> w(n, 0.0);
  w[0] = 1.0 + slope[0];
  for (std::size_t i = 1; i + 1 < n; ++i) w[i] = slope[i] - slope[i - 1];
  w[n - 1] = -slope[n - 2];
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] < -tol) {
      const std::size_t c = std::clamp<std::size_t>(i, 1, n - 2);
      throw Error(ErrorKind::Arbitrage, "butterfly arbitrage in call prices at strikes " + triple(c) +
                                            ": implied mass " + format_double(w[i]));
    }
    w[i] = std::max(0.0, w[i]);
  }
  std::vector<double> x(strikes);
  double total = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += w[i];
    mean += w[i] * x[i];
  }
  for (double& wi : w) wi /= total;
  mean /= total;
  if (std::abs(mean - forward) > tol) {
    const std::size_t j = w.back() >= w.front() ? n - 1 : 0;
    if (w[j] <= 0.0) throw Error(ErrorKind::Arbitrage, "forward inconsistent with call prices");
    x[j] += (forward - mean) / w[j];
    const bool ordered = j == 0 ? x[0] < x[1] : x[n - 1] > x[n - 2];
    if (!ordered) throw Error(ErrorKind::Arbitrage, "forward inconsistent with call prices");
  }
  return DiscreteMeasure::from_atoms(x, w, true);
}

DiscreteMeasure read_marginal_csv(const std::string& path, double forward) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2) throw Error(ErrorKind::Config, path + ": expected two columns");
  std::vector<double> a, b;
  for (const auto& row : t.rows) {
    a.push_back(row[0]);
    b.push_back(row[1]);
  }
  if (t.header[0] == "location" && t.header[1] == "weight") return DiscreteMeasure::from_atoms(a, b, true);
  if (t.header[0] == "strike" && t.header[1] == "call_price") {
    if (std::isnan(forward)) forward = a.front() + b.front();
    return from_call_prices(a, b, forward);
  }
  throw Error(ErrorKind::Config, path + ": header must be `location,weight` or `strike,call_price`");
}

}  // namespace fricmot
