#pragma once

#include <functional>
#include <vector>

#include "fricmot/measures.hpp"

namespace fricmot {

// Continuation value supplied on a sorted grid: linear interpolation with
// linear extrapolation; derivatives by centered differences at the nodes
// (one-sided at the ends), interpolated linearly in between.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(std::vector<double> xs, std::vector<double> ys);
  static GridFunction sample(const std::vector<double>& xs, const std::function<double(double)>& g);
  static GridFunction zero();

  double operator()(double x) const { return pl_(x); }
  double derivative(double x) const;
  double second_derivative(double x) const;
  const std::vector<double>& xs() const { return pl_.xs(); }
  const std::vector<double>& ys() const { return pl_.ys(); }

 private:
  PiecewiseLinear pl_;
  std::vector<double> d1_;
  std::vector<double> d2_;
};

}  // namespace fricmot
