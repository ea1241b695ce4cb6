#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fricmot/coupling.hpp"
#include "fricmot/frictions.hpp"
#include "fricmot/grid_function.hpp"
#include "fricmot/measures.hpp"
#include "fricmot/simplex.hpp"

namespace fricmot {

using lp::Sense;

// Dual of the one-step martingale transport LP. For Sense::Min the certificate
// satisfies phi(x) + psi(y) + h(x)(y - x) <= cost(x, y); for Sense::Max the
// inequality is reversed. Gauge: psi at the smallest target atom is 0.
struct DualCertificate {
  std::vector<double> phi;
  std::vector<double> psi;
  std::vector<double> h;
  double value = 0.0;
  Sense sense = Sense::Min;

  // Largest violation of the dual inequality over all atom pairs (>= 0).
  double max_violation(const std::vector<double>& sources, const std::vector<double>& targets,
                       const std::vector<double>& cost) const;
  // Largest |slack| on pairs where the coupling carries mass above mass_tol.
  double max_support_slack(const CouplingMatrix& c, const std::vector<double>& cost,
                           double mass_tol = 1e-9) const;
};

struct LpResult {
  CouplingMatrix coupling;
  DualCertificate cert;
  double primal = 0.0;
  double dual = 0.0;
  std::size_t iterations = 0;
};

// Cost is row-major mu.size() x eta.size().
LpResult solve_lp(const DiscreteMeasure& mu, const DiscreteMeasure& eta, const std::vector<double>& cost,
                  Sense sense, const lp::Options& opt = {});

std::vector<double> cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& eta,
                                const std::function<double(double, double)>& c);

// V(y) - V(x) - f(x, y - x) for Max; V(y) - V(x) + f(x, y - x) for Min.
std::vector<double> adjusted_cost(const DiscreteMeasure& mu, const DiscreteMeasure& eta, const GridFunction& V,
                                  const FrictionSpec& f, Sense sense = Sense::Max);

struct OnestepLp {
  LpResult lp;
  double value = 0.0;           // optimal adjusted value
  double friction_value = 0.0;  // ∫ f dπ at the optimizer
  double shift = 0.0;           // η(V) - μ(V)
};

OnestepLp solve_onestep_friction(const DiscreteMeasure& mu, const DiscreteMeasure& eta, const GridFunction& V,
                                 const FrictionSpec& f, Sense sense = Sense::Max);

struct ExtractResult {
  bool ok = false;
  BiatomicKernel kernel;
  std::vector<std::size_t> offending_rows;
};

ExtractResult extract_biatomic(const CouplingMatrix& c, double mass_tol = 1e-9);

// Two-point summary of every row: endpoints are the conditional barycenters of
// the mass below and above x (mass at x split in proportion); rows that stay at
// x are banded. Always succeeds; keeps the row resolution.
BiatomicKernel barycentric_kernel(const CouplingMatrix& c, double mass_tol = 1e-12, double tol_geo = 1e-12);

struct MonotoneViolation {
  std::size_t i = 0;   // source with the spread pair
  std::size_t j_lo = 0;
  std::size_t j_hi = 0;
  std::size_t i2 = 0;  // later source landing strictly inside
  std::size_t j2 = 0;
};

std::vector<MonotoneViolation> left_monotone_check(const CouplingMatrix& c, double tol, double mass_tol = 1e-9);

}  // namespace fricmot
