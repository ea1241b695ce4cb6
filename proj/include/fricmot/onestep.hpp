#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fricmot/coupling.hpp"
#include "fricmot/frictions.hpp"
#include "fricmot/grid_function.hpp"
#include "fricmot/measures.hpp"

namespace fricmot {

struct MsmReport {
  double min_increment = 0.0;
  double x = 0.0, x2 = 0.0;      // argmin rectangle, x < x2
  double y_lo = 0.0, y_hi = 0.0;  // y_lo < y_hi
  double kappa_estimate = 0.0;    // min finite-difference c_xyy
  std::size_t rectangles = 0;
  bool subsampled = false;

  bool strict(double tol = 0.0) const { return min_increment > tol; }
};

// Rectangle increments of c(x,y) = V(y) - V(x) - f(x, y - x):
//   c(x,y_lo) + c(x2,y_hi) - c(x,y_hi) - c(x2,y_lo)
MsmReport msm_check(const GridFunction& V, const FrictionSpec& f, const std::vector<double>& x_grid,
                    const std::vector<double>& y_grid, std::size_t cap = 4000000,
                    std::uint64_t seed = 0x5eedULL);

struct GeometricOptions {
  double tol_mass = 1e-8;
  double tol_slope = 1e-7;
  double tol_geo = 1e-9;
  int max_bisection = 200;
  bool force = false;
  double b_lower = 1e-12;
  double msm_tol = 0.0;
  double kink_threshold = 1e6;
};

BiatomicKernel solve_geometric(const PotentialPair& pp, const GridFunction& V, const FrictionSpec& f,
                               const GeometricOptions& opts = {});

// Per-atom equal-slope residual; band atoms give 0.
std::vector<double> equal_slope_residual(const BiatomicKernel& k, const GridFunction& V, const FrictionSpec& f);

// Per-atom mass identity residual: the mass of the rows up to x in its component
// against the target mass exhausted between the row's lowest and highest target.
std::vector<double> coupling_identity_residual(const BiatomicKernel& k, const DiscreteMeasure& eta);

// Two-point law per row, endpoints at their raw locations.
DiscreteMeasure endpoint_pushforward(const BiatomicKernel& k);

// Rows from the kernel's target resolution when present, else two-point rows
// at the endpoints (snapped to eta atoms within snap_tol when eta is given).
CouplingMatrix kernel_to_coupling(const BiatomicKernel& k, const DiscreteMeasure& mu,
                                  const DiscreteMeasure* eta = nullptr, double snap_tol = 1e-9,
                                  double mismatch_tol = 1e-8);

}  // namespace fricmot
