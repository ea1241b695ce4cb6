#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fricmot/coupling.hpp"
#include "fricmot/frictions.hpp"
#include "fricmot/lp_oracle.hpp"
#include "fricmot/measures.hpp"
#include "fricmot/onestep.hpp"

namespace fricmot {

enum class PayoffKind { Terminal, Lookback, Barrier, Asian, CustomGrid };
enum class OptionType { Call, Put, Identity };

const char* to_string(PayoffKind k);

// Phi is g applied to S_N (terminal, custom), to max S (lookback), to the
// average of S_0..S_N (asian), or flag * g(S_N) with an up-and-out flag
// 1{S_t < B for all t} (barrier).
struct PayoffSpec {
  PayoffKind kind = PayoffKind::Terminal;
  OptionType option = OptionType::Identity;
  double strike = 0.0;
  double barrier = std::numeric_limits<double>::quiet_NaN();
  PiecewiseLinear custom;  // CustomGrid: g on a grid, constant extrapolation

  double g(double z) const;
  bool path_dependent() const {
    return kind == PayoffKind::Lookback || kind == PayoffKind::Barrier || kind == PayoffKind::Asian;
  }
  double initial_state(double s0) const;
  double reduce(double state, double y) const;
  // Phi from the state after observing S_N = y.
  double terminal(double state, double y, std::size_t N) const;
  double evaluate(const std::vector<double>& path) const;
};

enum class Oracle { Lp, Geometric, Both };

struct MultistepOptions {
  Oracle oracle = Oracle::Lp;
  std::size_t asian_max_states = 5000;
  std::size_t asian_grid_points = 201;
  lp::Options lp;
  GeometricOptions geo;
};

// Transition mass from node (x, state) at time t to price y, landing in node
// state next_state at t+1.
struct StateTransition {
  double x = 0.0;
  double state = 0.0;
  double y = 0.0;
  double next_state = 0.0;
  double mass = 0.0;
};

struct MultiCoupling {
  std::vector<DiscreteMeasure> marginals;
  std::vector<double> initial_states;  // aligned with marginals[0] atoms
  std::vector<CouplingMatrix> steps;   // price-level joint laws
  std::vector<std::vector<StateTransition>> lifted;
};

// Backward value W_t and hedge slope H_t at node (x, state); touch_lo/touch_hi
// bracket x on the concave envelope.
struct Node {
  double x = 0.0;
  double state = 0.0;
  double mass = 0.0;
  double W = 0.0;
  double H = 0.0;
  double touch_lo = 0.0;
  double touch_hi = 0.0;
};

struct ContinuationGrid {
  std::vector<std::vector<double>> prices;   // per t = 0..N
  std::vector<std::vector<double>> states;   // per t, sorted
  std::vector<std::vector<double>> values;   // per t, prices x states row-major; NaN off the reachable set

  // Exact at nodes; bilinear in (price, state) between reachable nodes.
  double value(std::size_t t, double x, double state) const;
};

struct MultistepResult {
  double value = 0.0;       // primal
  double dual_value = 0.0;  // Σ_t ∫u_t dμ_t from the backward recursion
  double lp_dual = 0.0;
  bool lifted = false;
  ContinuationGrid continuation;
  std::vector<std::vector<Node>> nodes;  // t = 0..N-1
  std::vector<std::vector<double>> u;    // static legs on μ_t atoms, t = 0..N (u_0 = W_0)
  std::vector<double> dpp_residual;      // per-step value identity residual
  MultiCoupling coupling;
  std::vector<BiatomicKernel> kernels;   // per step
  std::vector<double> step_friction;     // ∫f_t dπ_t at the optimizer
  std::vector<double> oracle_deltas;     // geometric minus LP step value (Both mode)
  std::size_t lp_rows = 0, lp_cols = 0, lp_iterations = 0;
  std::vector<std::string> warnings;
};

MultistepResult backward_induction(const std::vector<DiscreteMeasure>& marginals,
                                   const std::vector<FrictionSpec>& frictions, const PayoffSpec& payoff,
                                   const MultistepOptions& opts = {});

// inf over couplings of E[Phi] + Σ ∫f_t dπ_t.
double subhedge_value(const std::vector<DiscreteMeasure>& marginals, const std::vector<FrictionSpec>& frictions,
                      const PayoffSpec& payoff, const MultistepOptions& opts = {});

struct Path {
  std::vector<double> prices;
  std::vector<double> states;  // node states used by the solver
  double weight = 0.0;
};

std::vector<Path> compose_forward(const MultiCoupling& mc, double mass_tol = 1e-14);

double primal_value(const std::vector<Path>& paths, const PayoffSpec& payoff,
                    const std::vector<FrictionSpec>& frictions);

}  // namespace fricmot
