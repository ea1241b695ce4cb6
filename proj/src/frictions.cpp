#include "fricmot/frictions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fricmot/error.hpp"

namespace fricmot {

double ExtendedReal::value() const {
  if (infinite_) throw Error(ErrorKind::Domain, "extended real is +infinity");
  return value_;
}

ExtendedReal operator+(const ExtendedReal& a, const ExtendedReal& b) {
  if (a.infinite_ || b.infinite_) return ExtendedReal::infinity();
  return ExtendedReal(a.value_ + b.value_);
}

bool operator<=(const ExtendedReal& a, const ExtendedReal& b) {
  if (b.infinite_) return true;
  if (a.infinite_) return false;
  return a.value_ <= b.value_;
}

bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
  if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
  return a.value_ == b.value_;
}

Coefficient::Coefficient(double c) : grid_{}, values_{c} {
  if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorKind::Domain, "friction coefficient must be finite and >= 0");
}

Coefficient::Coefficient(std::vector<double> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() != values_.size() || grid_.empty())
    throw Error(ErrorKind::Domain, "coefficient grid and values differ in length");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
      throw Error(ErrorKind::Domain, "friction coefficient must be finite and >= 0");
    if (i > 0 && !(grid_[i] > grid_[i - 1]))
      throw Error(ErrorKind::Domain, "coefficient grid must be strictly increasing");
  }
  if (grid_.size() == 1) grid_.clear();
}

double Coefficient::operator()(double x) const {
  if (grid_.empty()) return values_[0];
  if (x <= grid_.front()) return values_.front();
  if (x >= grid_.back()) return values_.back();
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - grid_.begin());
  const double t = (x - grid_[j - 1]) / (grid_[j] - grid_[j - 1]);
  return values_[j - 1] + t * (values_[j] - values_[j - 1]);
}

double Coefficient::min_value() const { return *std::min_element(values_.begin(), values_.end()); }
double Coefficient::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

double FrictionSpec::eval(double x, double v) const {
  if (v == 0.0) return 0.0;
  return a_(x) * std::abs(v) + b_(x) * v * v;
}

ClosedInterval FrictionSpec::subgradient(double x, double v) const {
  const double a = a_(x);
  if (v == 0.0) return {-a, a};
  const double g = (v > 0 ? a : -a) + 2.0 * b_(x) * v;
  return {g, g};
}

ExtendedReal FrictionSpec::conjugate(double x, double y) const {
  const double a = a_(x), b = b_(x);
  const double excess = std::max(0.0, std::abs(y) - a);
  if (b > 0.0) return ExtendedReal(excess * excess / (4.0 * b));
  return excess > 0.0 ? ExtendedReal::infinity() : ExtendedReal(0.0);
}

double FrictionSpec::argmax_displacement(double x, double h) const {
  const double a = a_(x), b = b_(x);
  if (std::abs(h) <= a) return 0.0;
  if (b <= 0.0)
    throw Error(ErrorKind::UnboundedDisplacement,
                "slope outside the no-trade band with zero quadratic coefficient");
  return (h - (h > 0 ? a : -a)) / (2.0 * b);
}

bool FrictionSpec::in_band(double x, double h) const { return std::abs(h) <= a_(x); }

double eval(const FrictionSpec& f, double x, double v) { return f.eval(x, v); }
ClosedInterval subgradient(const FrictionSpec& f, double x, double v) { return f.subgradient(x, v); }
ExtendedReal conjugate(const FrictionSpec& f, double x, double y) { return f.conjugate(x, y); }
double argmax_displacement(const FrictionSpec& f, double x, double h) { return f.argmax_displacement(x, h); }
bool in_band(const FrictionSpec& f, double x, double h) { return f.in_band(x, h); }

GrowthReport growth_check(const FrictionSpec& f, const std::vector<double>& probe_grid, double m,
                          double p, double c) {
  GrowthReport r;
  r.worst_margin = std::numeric_limits<double>::infinity();
  for (double x : probe_grid) {
    for (double v : probe_grid) {
      const double margin = f.eval(x, v) - (m * std::pow(std::abs(v), p) - c * (1.0 + std::abs(x)));
      if (margin < r.worst_margin) {
        r.worst_margin = margin;
        r.worst_x = x;
        r.worst_v = v;
      }
    }
  }
  if (probe_grid.empty()) r.worst_margin = 0.0;
  // A zero friction is never coercive, whatever the probe margin says.
  r.pass = r.worst_margin >= 0.0 && !f.is_zero();
  return r;
}

}  // namespace fricmot
