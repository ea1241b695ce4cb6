#pragma once

#include <string>
#include <vector>

namespace fricmot {

// Real number or +infinity.
class ExtendedReal {
 public:
  ExtendedReal(double v = 0.0) : value_(v), infinite_(false) {}
  static ExtendedReal infinity() {
    ExtendedReal e;
    e.infinite_ = true;
    return e;
  }
  bool is_infinite() const { return infinite_; }
  bool is_finite() const { return !infinite_; }
  // Throws when infinite.
  double value() const;

  friend ExtendedReal operator+(const ExtendedReal& a, const ExtendedReal& b);
  friend bool operator<=(const ExtendedReal& a, const ExtendedReal& b);
  friend bool operator==(const ExtendedReal& a, const ExtendedReal& b);

 private:
  double value_;
  bool infinite_;
};

struct ClosedInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

// Nonnegative coefficient: constant, or piecewise-linear on a state grid with
// constant extrapolation.
class Coefficient {
 public:
  Coefficient(double c = 0.0);
  Coefficient(std::vector<double> grid, std::vector<double> values);

  double operator()(double x) const;
  bool is_constant() const { return grid_.size() <= 1; }
  double min_value() const;
  double max_value() const;
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
};

// f(x, v) = a(x)|v| + b(x) v^2
class FrictionSpec {
 public:
  FrictionSpec() = default;
  FrictionSpec(Coefficient a, Coefficient b) : a_(std::move(a)), b_(std::move(b)) {}
  static FrictionSpec constant(double alpha, double beta) { return {Coefficient(alpha), Coefficient(beta)}; }
  static FrictionSpec zero() { return constant(0.0, 0.0); }

  double a(double x) const { return a_(x); }
  double b(double x) const { return b_(x); }
  const Coefficient& a_coeff() const { return a_; }
  const Coefficient& b_coeff() const { return b_; }
  bool is_zero() const { return a_.max_value() == 0.0 && b_.max_value() == 0.0; }

  double eval(double x, double v) const;
  ClosedInterval subgradient(double x, double v) const;
  ExtendedReal conjugate(double x, double y) const;
  double argmax_displacement(double x, double h) const;
  bool in_band(double x, double h) const;

 private:
  Coefficient a_;
  Coefficient b_;
};

double eval(const FrictionSpec& f, double x, double v);
ClosedInterval subgradient(const FrictionSpec& f, double x, double v);
ExtendedReal conjugate(const FrictionSpec& f, double x, double y);
double argmax_displacement(const FrictionSpec& f, double x, double h);
bool in_band(const FrictionSpec& f, double x, double h);

struct GrowthReport {
  bool pass = true;
  double worst_margin = 0.0;  // min of f(x,v) - (m|v|^p - c(1+|x|))
  double worst_x = 0.0;
  double worst_v = 0.0;
};

// Checks f(x,v) >= m|v|^p - c(1+|x|) for x and v ranging over the probe grid.
GrowthReport growth_check(const FrictionSpec& f, const std::vector<double>& probe_grid, double m,
                          double p, double c);

}  // namespace fricmot
