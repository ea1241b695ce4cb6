#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fricmot/frictions.hpp"
#include "fricmot/grid_function.hpp"
#include "fricmot/measures.hpp"
#include "fricmot/multistep.hpp"

namespace fricmot::cli {

struct GrowthSpec {
  bool given = false;
  double m = 0.0;
  double p = 2.0;
  double c = 0.0;
  std::vector<double> probe;  // defaults to the union of marginal atoms
};

struct AnalyticsSpec {
  std::size_t step = 0;
  GridFunction V;                 // on the union of the step's atoms unless a grid is given
  std::vector<double> alphas;     // sweep
  std::vector<double> betas;
  std::vector<std::pair<double, double>> schedule;  // vanish
  std::vector<double> eps;        // stability
};

struct RunConfig {
  std::string path;
  std::vector<DiscreteMeasure> marginals;
  std::vector<std::string> marginal_sources;
  std::vector<FrictionSpec> frictions;
  PayoffSpec payoff;
  MultistepOptions solver;
  double tol_gap = 1e-6;
  double tol_cert = 1e-8;
  double tol_order = 1e-12;
  GrowthSpec growth;
  AnalyticsSpec analytics;
  std::uint64_t seed = 7;
  std::string out_dir = "out";
};

// YAML config; relative file references resolve against the config's directory.
// Errors are ErrorKind::Config with the line and field.
RunConfig load_config(const std::string& path);

struct Options {
  std::string command;
  std::string config;
  std::optional<std::string> out;
  std::optional<std::string> oracle;
  std::optional<std::vector<double>> alphas;
  std::optional<std::vector<double>> betas;
  std::optional<std::vector<double>> eps;
  std::optional<int> steps;  // vanish schedule length
};

enum ExitCode { Ok = 0, Usage = 2, SolverFailure = 3 };

// Runs one command; progress text goes to `log`, data files into the output directory.
int run(const Options& opts, std::ostream& log);

// Parses argv with CLI11 and calls run().
int main(int argc, char** argv);

}  // namespace fricmot::cli
