#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace fricmot {

enum class Extrapolation { Constant, Linear, Zero };

// Piecewise-linear function on sorted breakpoints.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  PiecewiseLinear(std::vector<double> xs, std::vector<double> ys,
                  Extrapolation extrap = Extrapolation::Constant);

  double operator()(double x) const;
  // Slope of the linear piece to the right of x (left piece at the last node).
  double slope(double x) const;

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }
  bool empty() const { return xs_.empty(); }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  Extrapolation extrap_ = Extrapolation::Constant;
};

class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  // Sorts, merges coincident locations and drops zero weights. With
  // normalize=false the weights must already sum to 1 within 1e-12.
  static DiscreteMeasure from_atoms(std::vector<double> locations,
                                    std::vector<double> weights,
                                    bool normalize = false);

  std::size_t size() const { return x_.size(); }
  const std::vector<double>& locations() const { return x_; }
  const std::vector<double>& weights() const { return w_; }
  double location(std::size_t i) const { return x_[i]; }
  double weight(std::size_t i) const { return w_[i]; }
  double total_mass() const { return mass_; }
  double mean() const;
  double moment(double p) const;  // ∫|x|^p
  double expect(const std::function<double(double)>& g) const;

  double cdf(double k) const;       // F(k) = m((-inf, k])
  double cdf_left(double k) const;  // F(k-) = m((-inf, k))
  double quantile(double u) const;  // left-continuous inverse, u in (0,1]
  double call(double k) const;      // Σ w (x-k)+

  // Index of the atom at location k, or -1.
  long find(double k, double tol = 0.0) const;

 private:
  std::vector<double> x_;
  std::vector<double> w_;
  std::vector<double> cum_;  // cum_[i] = w_0 + ... + w_i
  double mass_ = 0.0;
};

DiscreteMeasure dirac(double x);

// n-point quantile discretization with the midpoint rule on a uniform u-grid.
DiscreteMeasure quantile_grid(std::size_t n, const std::function<double(double)>& quantile_fn);

double cdf(const DiscreteMeasure& m, double k);
double quantile(const DiscreteMeasure& m, double u);
double call_potential(const DiscreteMeasure& m, double k);

std::vector<double> merged_support(const DiscreteMeasure& a, const DiscreteMeasure& b);

// Largest gap between consecutive points of the merged support.
double grid_modulus(const DiscreteMeasure& a, const DiscreteMeasure& b);

struct OrderReport {
  bool ok = true;
  double mean_gap = 0.0;
  double worst_gap = 0.0;  // min over breakpoints of C_eta - C_mu
  double worst_k = 0.0;
  std::string reason;
};

OrderReport convex_order_report(const DiscreteMeasure& mu, const DiscreteMeasure& eta, double tol);
bool convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& eta, double tol = 1e-9);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo < x && x < hi; }
};

struct PotentialPair {
  DiscreteMeasure mu;
  DiscreteMeasure eta;
  PiecewiseLinear delta_f;  // C_eta - C_mu
  std::vector<Interval> components;
  double tol_component = 0.0;

  // F_eta(k) - F_mu(k), the right derivative of delta_f.
  double cdf_gap(double k) const { return eta.cdf(k) - mu.cdf(k); }
  // Component containing x, or -1.
  int component_of(double x) const;
};

PotentialPair build_potential_pair(const DiscreteMeasure& mu, const DiscreteMeasure& eta);

double wasserstein1(const DiscreteMeasure& a, const DiscreteMeasure& b);

DiscreteMeasure from_call_prices(const std::vector<double>& strikes,
                                 const std::vector<double>& prices, double forward,
                                 double tol = 1e-9);

// Reads `location,weight` or `strike,call_price` CSV. `forward` is required for
// the call-price mode and ignored otherwise (NaN means: take the first strike
// plus its call price, valid when all mass lies above the first strike).
DiscreteMeasure read_marginal_csv(const std::string& path, double forward);

}  // namespace fricmot
