#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fricmot/lp_oracle.hpp"
#include "fricmot/multistep.hpp"

namespace fricmot {

struct ShiftedPotentials {
  std::vector<double> phi;
  std::vector<double> psi;
  double objective_shift = 0.0;  // η(V) - μ(V)
};

// phi + V on source atoms, psi - V on target atoms.
ShiftedPotentials dual_shift(const std::vector<double>& phi, const std::vector<double>& psi, const GridFunction& V,
                             const DiscreteMeasure& mu, const DiscreteMeasure& eta);

// Friction certificate of one step, per node (x, state):
//   phi(n) + psi(n, y) + h(n) (y - x) <= f_t(x, y - x)
struct StepCertificate {
  std::vector<double> x;
  std::vector<double> state;
  std::vector<double> phi;
  std::vector<double> h;
  std::vector<double> y;
  std::vector<double> psi;  // nodes x y, row-major
  bool state_free = true;   // psi identical across nodes
};

// Static legs u_t on μ_t atoms and hedge slopes Δ_t = -h_t:
//   Phi - Σ f_t(S_t, ΔS_t) <= Σ_t u_t(S_t) + Σ_t Δ_t ΔS_t
struct GlobalDual {
  std::vector<std::vector<double>> grids;
  std::vector<std::vector<double>> u;
  std::vector<StepCertificate> steps;
  std::vector<double> lambda;  // u_N
  double nu = 0.0;             // ∫λ dμ_N
  double value = 0.0;          // Σ_t ∫u_t dμ_t
  std::string gauge = "psi(y0) = 0 per step";

  double static_leg(std::size_t t, double x) const;
  double slope(std::size_t t, double x, double state) const;
  std::size_t node_index(std::size_t t, double x, double state) const;
};

// From one-step friction certificates (Sense::Min on f_t) and the terminal
// payoff on μ_N atoms. Refuses when a certificate violates its inequality.
GlobalDual assemble_global_dual(const std::vector<DualCertificate>& certs, const std::vector<DiscreteMeasure>& marginals,
                                const std::vector<FrictionSpec>& frictions, const std::vector<double>& terminal,
                                double tol = 1e-8);

// From the backward recursion of a multistep solve.
GlobalDual assemble_global_dual(const MultistepResult& r, const std::vector<DiscreteMeasure>& marginals,
                                const std::vector<FrictionSpec>& frictions, const PayoffSpec& payoff,
                                double tol = 1e-8);

struct AuditReport {
  std::size_t paths = 0;
  double max_violation = 0.0;  // max over paths of (Phi - Σf) - Psi, clipped at 0
  double min_slack = 0.0;
  double max_slack = 0.0;
  double mean_slack = 0.0;     // weighted
  // max over path steps of phi + psi + h dS - f; pathwise-valid even when the
  // state transition is split across grid nodes
  double max_step_violation = 0.0;
  double fy_max_violation = 0.0;
  std::size_t fy_checks = 0;
};

AuditReport superhedge_audit(const GlobalDual& gd, const std::vector<Path>& paths, const PayoffSpec& payoff,
                             const std::vector<FrictionSpec>& frictions);

struct BandMismatch {
  std::size_t i = 0;
  double x = 0.0;
  double h = 0.0;
  double a = 0.0;
  bool identity_row = false;
};

// |h(x)| <= a(x) (within tol) against "row i is the identity" for every source atom.
std::vector<BandMismatch> band_check(const DualCertificate& cert, const CouplingMatrix& c, const FrictionSpec& f,
                                     double tol = 1e-7, double mass_tol = 1e-9);

struct PriceResult {
  double value = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double sub_value = 0.0;
  bool has_sub = false;
  MultistepResult result;
  GlobalDual certificate;
  AuditReport audit;
};

PriceResult superhedging_price(const std::vector<DiscreteMeasure>& marginals,
                               const std::vector<FrictionSpec>& frictions, const PayoffSpec& payoff,
                               const MultistepOptions& opts = {}, bool with_sub = false);

// JSON text: per step arrays (x, state, phi, h) and (y, psi), static legs and metadata.
std::string certificate_json(const GlobalDual& gd, double tol);

}  // namespace fricmot
