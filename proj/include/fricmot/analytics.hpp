#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fricmot/coupling.hpp"
#include "fricmot/frictions.hpp"
#include "fricmot/grid_function.hpp"
#include "fricmot/measures.hpp"
#include "fricmot/onestep.hpp"

namespace fricmot {

struct OnestepInstance {
  DiscreteMeasure mu;
  DiscreteMeasure eta;
  GridFunction V;
};

struct AtomStats {
  double x = 0.0;
  double weight = 0.0;
  double t_down = 0.0;
  double t_up = 0.0;
  double theta = 0.0;
  bool band = false;
  double turnover = 0.0;          // E[|Y - x| | X = x]
  double turnover_formula = 0.0;  // 2θ(1-θ)(T_u - T_d)
  double exec_cost = 0.0;         // E[f(x, Y - x) | X = x]
};

struct StepStats {
  double turnover = 0.0;
  double turnover_formula = 0.0;
  double exec_cost = 0.0;
  double band_mass = 0.0;
  double spread_bound = 0.0;  // ½∫(T_u - T_d) dμ
  double lq_bound = 0.0;      // ∫(|h| - a)₊ / 2b dμ; NaN without h or with b = 0 somewhere
  double alpha_lower = 0.0;   // ∫a(x) E|Y - x| dμ
  double beta_lower = 0.0;    // ∫b(x) θ(1-θ)(T_u - T_d)² dμ
  double identity_residual = 0.0;  // max per-atom |turnover - turnover_formula|
  double theta_excess = 0.0;       // max θ(1-θ) - ¼, clipped at 0
  std::vector<AtomStats> atoms;
};

StepStats step_stats(const BiatomicKernel& k, const FrictionSpec& f, const std::vector<double>* h = nullptr);
StepStats step_stats(const CouplingMatrix& c, const FrictionSpec& f, const std::vector<double>* h = nullptr);

struct SweepCell {
  double alpha = 0.0;
  double beta = 0.0;
  double value = 0.0;  // optimal adjusted value
  double msm_min = 0.0;
  bool msm_ok = false;
  StepStats stats;
};

struct MonotoneFinding {
  std::string param;     // "alpha" or "beta"
  double fixed = 0.0;    // the other parameter
  double from = 0.0, to = 0.0;
  std::string quantity;  // band_mass, turnover, up_displacement, down_displacement
  long atom = -1;        // -1 for aggregates
  double amount = 0.0;   // size of the violation
};

struct SweepReport {
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<SweepCell> cells;  // alphas x betas, row-major
  double sup_v2 = 0.0;           // max 2! x second divided difference of V on its nodes
  std::vector<char> curvature_ok;  // per beta: 2β > sup V''
  bool density_ok = true;          // every atom carries positive mass
  std::vector<MonotoneFinding> findings;
  double min_slack = 0.0;          // most negative monotonicity slack (0 if none)

  const SweepCell& cell(std::size_t ia, std::size_t ib) const { return cells[ia * betas.size() + ib]; }
  bool hypotheses() const;
};

// LP optimizer per (α, β) cell with constant coefficients; cells run concurrently.
SweepReport sweep(const OnestepInstance& inst, const std::vector<double>& alphas, const std::vector<double>& betas,
                  double tol = 1e-7, unsigned threads = 0);

struct VanishStep {
  std::size_t n = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double endpoint_distance = 0.0;     // geometric kernel vs frictionless reference
  double lp_endpoint_distance = 0.0;  // frictional LP optimizer vs the same reference
  double touching_residual = 0.0;     // max |equal-slope residual|
  double value = 0.0;                 // geometric kernel objective
};

struct VanishReport {
  std::vector<VanishStep> steps;
  double min_v3 = 0.0;  // min 3! x third divided difference of V on its nodes
};

// Left-curtain reference: LP minimizer of E(Y - X)³, two-point summary per row.
BiatomicKernel frictionless_reference(const DiscreteMeasure& mu, const DiscreteMeasure& eta);

// Σ_i w_i (|T_d - T_d'| + |T_u - T_u'|) on matching rows.
double endpoint_distance(const BiatomicKernel& a, const BiatomicKernel& b);

VanishReport vanishing_friction(const OnestepInstance& inst, const std::vector<std::pair<double, double>>& schedule);

struct StabilityRow {
  double eps = 0.0;
  double w1_mu = 0.0;
  double w1_eta = 0.0;
  double coupling_distance = 0.0;  // rearrangement bound on W1 between the couplings
  double endpoint_l1 = 0.0;        // after T = F_{μ_ε}⁻¹ ∘ F_μ
  double ratio = 0.0;              // endpoint_l1 / eps
  bool skipped = false;
  std::string note;
};

// Atom jitter of size eps on both marginals (re-centred), geometric kernels compared
// against the unperturbed one.
std::vector<StabilityRow> marginal_stability(const OnestepInstance& inst, const FrictionSpec& f,
                                             const std::vector<double>& eps, std::uint64_t seed = 7);

}  // namespace fricmot
