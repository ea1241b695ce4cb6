#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fricmot::lp {

enum class Sense { Max, Min };

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(Status s);

// Equality-form LP: optimize c^T x subject to A x = b, x >= 0.
// A is dense row-major (rows x cols).
struct Problem {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;
  Sense sense = Sense::Min;

  Problem() = default;
  Problem(std::size_t r, std::size_t n, Sense s)
      : rows(r), cols(n), a(r * n, 0.0), b(r, 0.0), c(n, 0.0), sense(s) {}
  double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

struct Options {
  double pivot_tol = 1e-11;
  double optimality_tol = 1e-11;
  double feasibility_tol = 1e-9;  // phase-1 residual threshold
  std::size_t max_iterations = 0;  // 0: automatic
  std::size_t degenerate_switch = 50;  // Bland fallback after this many degenerate pivots
  std::size_t refactor_every = 400;    // rebuild the tableau from the original rows (0: never)
};

// Duals y satisfy A^T y <= c (Min) or A^T y >= c (Max), and b^T y equals the
// optimal objective.
struct Solution {
  Status status = Status::Optimal;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::size_t> basis;
  double objective = 0.0;
  double dual_objective = 0.0;
  double phase1_residual = 0.0;
  std::size_t iterations = 0;
};

Solution solve(const Problem& p, const Options& opt = {});

}  // namespace fricmot::lp
