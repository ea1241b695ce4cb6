#include "fricmot/grid_function.hpp"

#include <algorithm>

#include "fricmot/error.hpp"

namespace fricmot {

namespace {

std::vector<double> node_derivative(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = (y[1] - y[0]) / (x[1] - x[0]);
  d[n - 1] = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1]);
  return d;
}

double interpolate(const std::vector<double>& x, const std::vector<double>& d, double at) {
  if (x.size() == 1) return d[0];
  if (at <= x.front()) return d.front();
  if (at >= x.back()) return d.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t j = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[j - 1]) / (x[j] - x[j - 1]);
  return d[j - 1] + t * (d[j] - d[j - 1]);
}

}  // namespace

GridFunction::GridFunction(std::vector<double> xs, std::vector<double> ys)
    : pl_(std::move(xs), std::move(ys), Extrapolation::Linear) {
  d1_ = node_derivative(pl_.xs(), pl_.ys());
  d2_ = node_derivative(pl_.xs(), d1_);
}

GridFunction GridFunction::sample(const std::vector<double>& xs, const std::function<double(double)>& g) {
  std::vector<double> ys(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = g(xs[i]);
  return GridFunction(xs, ys);
}

GridFunction GridFunction::zero() { return GridFunction({0.0, 1.0}, {0.0, 0.0}); }

double GridFunction::derivative(double x) const {
  if (d1_.empty()) throw Error(ErrorKind::Domain, "empty grid function");
  return interpolate(pl_.xs(), d1_, x);
}

double GridFunction::second_derivative(double x) const {
  if (d2_.empty()) throw Error(ErrorKind::Domain, "empty grid function");
  return interpolate(pl_.xs(), d2_, x);
}

}  // namespace fricmot
