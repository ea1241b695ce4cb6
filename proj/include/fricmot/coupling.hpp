#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace fricmot {

// Joint transition probabilities between two atom grids (row x, column y).
struct CouplingMatrix {
  std::vector<double> sources;
  std::vector<double> targets;
  std::vector<double> probs;  // row-major, sources.size() x targets.size()

  CouplingMatrix() = default;
  CouplingMatrix(std::vector<double> src, std::vector<double> tgt)
      : sources(std::move(src)), targets(std::move(tgt)), probs(sources.size() * targets.size(), 0.0) {}

  std::size_t rows() const { return sources.size(); }
  std::size_t cols() const { return targets.size(); }
  double& operator()(std::size_t i, std::size_t j) { return probs[i * targets.size() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return probs[i * targets.size() + j]; }

  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
  // max_i |Σ_j p_ij (y_j - x_i)|
  double barycenter_residual() const;
  double integrate(const std::function<double(double, double)>& g) const;
};

// Per-source two-point conditional law T_d <= x <= T_u with upper weight theta.
struct BiatomicKernel {
  std::vector<double> x;
  std::vector<double> weight;
  std::vector<double> t_down;
  std::vector<double> t_up;
  std::vector<double> theta;
  std::vector<char> band;
  std::vector<int> component;  // -1 outside every component
  // Optional exact resolution of each row onto target atoms: (target index, mass).
  std::vector<std::vector<std::pair<std::size_t, double>>> resolution;
  std::vector<double> targets;
  std::vector<std::string> tags;

  std::size_t size() const { return x.size(); }
  void push(double xi, double wi, double td, double tu, double th, bool b, int comp);
  bool has_tag(const std::string& t) const;
};

}  // namespace fricmot
