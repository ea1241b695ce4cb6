#include "fricmot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "fricmot/analytics.hpp"
#include "fricmot/duality.hpp"
#include "fricmot/error.hpp"
#include "fricmot/io.hpp"
#include "fricmot/onestep.hpp"

namespace fricmot::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Ctx {
  std::string path;
  fs::path dir;

  [[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& msg) const {
    std::ostringstream os;
    os << path;
    if (n.IsDefined() && n.Mark().line >= 0) os << ":" << n.Mark().line + 1;
    os << ": field '" << field << "': " << msg;
    throw Error(ErrorKind::Config, os.str());
  }

  double num(const YAML::Node& n, const std::string& field) const {
    if (!n.IsScalar()) fail(n, field, "expected a number");
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, field, "expected a number, got '" + n.Scalar() + "'");
    }
  }

  double num(const YAML::Node& parent, const std::string& key, double dflt) const {
    const YAML::Node n = parent[key];
    return n ? num(n, key) : dflt;
  }

  double positive(const YAML::Node& parent, const std::string& key, double dflt) const {
    const double v = num(parent, key, dflt);
    if (!(v > 0.0)) fail(parent[key], key, "must be positive");
    return v;
  }

  std::vector<double> nums(const YAML::Node& n, const std::string& field) const {
    if (!n.IsSequence()) fail(n, field, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(num(e, field));
    return out;
  }

  std::string str(const YAML::Node& n, const std::string& field) const {
    if (!n.IsScalar()) fail(n, field, "expected a string");
    return n.Scalar();
  }

  std::string resolve(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q.string() : (dir / q).lexically_normal().string();
  }
};

void check_keys(const Ctx& c, const YAML::Node& n, const std::string& where, std::initializer_list<const char*> keys) {
  if (!n.IsMap()) c.fail(n, where, "expected a mapping");
  for (const auto& kv : n) {
    const std::string k = kv.first.Scalar();
    if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
      c.fail(kv.first, where + "." + k, "unknown key");
  }
}

DiscreteMeasure read_file(const Ctx& c, const YAML::Node& n, const std::string& field, const std::string& path,
                          double forward) {
  try {
    return read_marginal_csv(path, forward);
  } catch (const Error& e) {
    c.fail(n, field, e.what());
  }
}

DiscreteMeasure parse_marginal(const Ctx& c, const YAML::Node& n, std::size_t t, std::string& source) {
  const std::string field = "marginals[" + std::to_string(t) + "]";
  try {
    if (n.IsScalar()) {
      source = c.resolve(n.Scalar());
      return read_file(c, n, field, source, std::nan(""));
    }
    check_keys(c, n, field, {"file", "forward", "atoms", "weights", "uniform", "dirac", "normalize"});
    if (n["file"]) {
      source = c.resolve(c.str(n["file"], field + ".file"));
      return read_file(c, n, field, source, c.num(n, "forward", std::nan("")));
    }
    if (n["dirac"]) {
      const double x = c.num(n["dirac"], field + ".dirac");
      source = "dirac";
      return dirac(x);
    }
    if (n["uniform"]) {
      const YAML::Node u = n["uniform"];
      check_keys(c, u, field + ".uniform", {"n", "lo", "hi"});
      const double count = c.num(u["n"], field + ".uniform.n");
      if (!(count >= 1.0) || count != std::floor(count)) c.fail(u["n"], field + ".uniform.n", "must be a positive integer");
      const double lo = c.num(u["lo"], field + ".uniform.lo"), hi = c.num(u["hi"], field + ".uniform.hi");
      if (!(hi > lo)) c.fail(u, field + ".uniform", "needs lo < hi");
      source = "uniform";
      return quantile_grid(std::size_t(count), [=](double q) { return lo + (hi - lo) * q; });
    }
    if (n["atoms"]) {
      const auto x = c.nums(n["atoms"], field + ".atoms");
      std::vector<double> w = n["weights"] ? c.nums(n["weights"], field + ".weights")
                                           : std::vector<double>(x.size(), 1.0 / double(x.size()));
      if (w.size() != x.size()) c.fail(n["weights"], field + ".weights", "length differs from atoms");
      const bool norm = n["normalize"] && n["normalize"].as<bool>();
      source = "inline";
      return DiscreteMeasure::from_atoms(x, w, norm);
    }
    c.fail(n, field, "needs one of file, atoms, uniform, dirac");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    c.fail(n, field, e.what());
  }
}

Coefficient parse_coeff(const Ctx& c, const YAML::Node& n, const std::string& field) {
  if (!n) return Coefficient(0.0);
  if (n.IsScalar()) {
    const double v = c.num(n, field);
    if (!(v >= 0.0)) c.fail(n, field, "must be nonnegative");
    return Coefficient(v);
  }
  check_keys(c, n, field, {"grid", "values"});
  const auto g = c.nums(n["grid"], field + ".grid");
  const auto v = c.nums(n["values"], field + ".values");
  try {
    return Coefficient(g, v);
  } catch (const Error& e) {
    c.fail(n, field, e.what());
  }
}

FrictionSpec parse_friction(const Ctx& c, const YAML::Node& n, const std::string& field) {
  check_keys(c, n, field, {"alpha", "beta"});
  return FrictionSpec(parse_coeff(c, n["alpha"], field + ".alpha"), parse_coeff(c, n["beta"], field + ".beta"));
}

PayoffSpec parse_payoff(const Ctx& c, const YAML::Node& n) {
  PayoffSpec p;
  if (!n) return p;
  check_keys(c, n, "payoff", {"kind", "option", "strike", "barrier", "grid"});
  const std::string kind = n["kind"] ? c.str(n["kind"], "payoff.kind") : "terminal";
  if (kind == "terminal") p.kind = PayoffKind::Terminal;
  else if (kind == "lookback") p.kind = PayoffKind::Lookback;
  else if (kind == "barrier") p.kind = PayoffKind::Barrier;
  else if (kind == "asian") p.kind = PayoffKind::Asian;
  else if (kind == "custom") p.kind = PayoffKind::CustomGrid;
  else c.fail(n["kind"], "payoff.kind", "expected terminal|lookback|barrier|asian|custom");
  const std::string opt = n["option"] ? c.str(n["option"], "payoff.option") : "identity";
  if (opt == "call") p.option = OptionType::Call;
  else if (opt == "put") p.option = OptionType::Put;
  else if (opt == "identity") p.option = OptionType::Identity;
  else c.fail(n["option"], "payoff.option", "expected call|put|identity");
  p.strike = c.num(n, "strike", 0.0);
  if (n["barrier"]) p.barrier = c.num(n["barrier"], "payoff.barrier");
  if (p.kind == PayoffKind::Barrier && std::isnan(p.barrier)) c.fail(n, "payoff.barrier", "required for kind barrier");
  if (p.kind == PayoffKind::CustomGrid) {
    const YAML::Node g = n["grid"];
    if (!g) c.fail(n, "payoff.grid", "required for kind custom");
    check_keys(c, g, "payoff.grid", {"x", "y"});
    const auto xs = c.nums(g["x"], "payoff.grid.x"), ys = c.nums(g["y"], "payoff.grid.y");
    if (xs.size() != ys.size() || xs.empty()) c.fail(g, "payoff.grid", "x and y need equal nonzero length");
    if (!std::is_sorted(xs.begin(), xs.end())) c.fail(g["x"], "payoff.grid.x", "must be sorted");
    p.custom = PiecewiseLinear(xs, ys, Extrapolation::Constant);
  }
  return p;
}

std::vector<double> union_grid(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  std::vector<double> g = a.locations();
  g.insert(g.end(), b.locations().begin(), b.locations().end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

void parse_analytics(const Ctx& c, const YAML::Node& n, RunConfig& cfg) {
  AnalyticsSpec& a = cfg.analytics;
  const std::size_t N = cfg.frictions.size();
  double cubic = 1.0 / 6.0;
  std::optional<YAML::Node> grid;
  if (n) {
    check_keys(c, n, "analytics", {"step", "continuation", "sweep", "vanish", "stability"});
    const double s = c.num(n, "step", 0.0);
    if (!(s >= 0.0) || s != std::floor(s) || std::size_t(s) >= N) c.fail(n["step"], "analytics.step", "must index a step");
    a.step = std::size_t(s);
    if (const YAML::Node v = n["continuation"]) {
      check_keys(c, v, "analytics.continuation", {"cubic", "grid"});
      if (v["cubic"]) cubic = c.num(v["cubic"], "analytics.continuation.cubic");
      if (v["grid"]) grid.emplace(v["grid"]);
    }
    if (const YAML::Node s2 = n["sweep"]) {
      check_keys(c, s2, "analytics.sweep", {"alphas", "betas"});
      if (s2["alphas"]) a.alphas = c.nums(s2["alphas"], "analytics.sweep.alphas");
      if (s2["betas"]) a.betas = c.nums(s2["betas"], "analytics.sweep.betas");
      if (s2["alphas"] && a.alphas.empty()) c.fail(s2["alphas"], "analytics.sweep.alphas", "empty grid");
      if (s2["betas"] && a.betas.empty()) c.fail(s2["betas"], "analytics.sweep.betas", "empty grid");
    }
    if (const YAML::Node v = n["vanish"]) {
      check_keys(c, v, "analytics.vanish", {"base", "steps", "schedule"});
      if (v["schedule"]) {
        if (!v["schedule"].IsSequence()) c.fail(v["schedule"], "analytics.vanish.schedule", "expected a list of [alpha, beta]");
        for (const auto& e : v["schedule"]) {
          const auto ab = c.nums(e, "analytics.vanish.schedule");
          if (ab.size() != 2) c.fail(e, "analytics.vanish.schedule", "entries are [alpha, beta]");
          a.schedule.emplace_back(ab[0], ab[1]);
        }
      } else {
        const double base = c.positive(v, "base", 0.4);
        const double steps = c.num(v, "steps", 8.0);
        if (!(steps >= 0.0) || steps != std::floor(steps)) c.fail(v["steps"], "analytics.vanish.steps", "must be an integer");
        for (int k = 1; k <= int(steps); ++k) a.schedule.emplace_back(base * std::ldexp(1.0, -k), base * std::ldexp(1.0, -k));
      }
    }
    if (const YAML::Node s3 = n["stability"]) {
      check_keys(c, s3, "analytics.stability", {"eps"});
      if (s3["eps"]) a.eps = c.nums(s3["eps"], "analytics.stability.eps");
    }
  }
  if (grid) {
    const YAML::Node& g = *grid;
    check_keys(c, g, "analytics.continuation.grid", {"x", "y"});
    const auto xs = c.nums(g["x"], "analytics.continuation.grid.x"), ys = c.nums(g["y"], "analytics.continuation.grid.y");
    if (xs.size() != ys.size() || xs.size() < 2) c.fail(g, "analytics.continuation.grid", "x and y need equal length >= 2");
    try {
      a.V = GridFunction(xs, ys);
    } catch (const Error& e) {
      c.fail(g, "analytics.continuation.grid", e.what());
    }
  } else {
    a.V = GridFunction::sample(union_grid(cfg.marginals[a.step], cfg.marginals[a.step + 1]),
                               [=](double y) { return cubic * y * y * y; });
  }
  if (!n || !n["vanish"])
    for (int k = 1; k <= 8; ++k) a.schedule.emplace_back(0.4 * std::ldexp(1.0, -k), 0.4 * std::ldexp(1.0, -k));
  if (!n || !n["stability"] || !n["stability"]["eps"]) a.eps = {1e-3, 5e-4, 2.5e-4};
}

// ---- output helpers ----

void write_json(const fs::path& dir, const std::string& name, const json& j) {
  write_text_file((dir / name).string(), j.dump(2) + "\n");
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string flag(bool b) { return b ? "1" : "0"; }

json manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "fricmot";
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = cfg.path;
  m["outputs"] = outputs;
  m["seed"] = cfg.seed;
  m["oracle"] = cfg.solver.oracle == Oracle::Lp ? "lp" : cfg.solver.oracle == Oracle::Geometric ? "geometric" : "both";
  m["tolerances"] = {{"gap", cfg.tol_gap},
                     {"certificate", cfg.tol_cert},
                     {"convex_order", cfg.tol_order},
                     {"lp_feasibility", cfg.solver.lp.feasibility_tol},
                     {"lp_optimality", cfg.solver.lp.optimality_tol}};
  m["marginals"] = cfg.marginal_sources;
  return m;
}

int exit_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
    case ErrorKind::Validation:
    case ErrorKind::Ordering:
    case ErrorKind::Arbitrage:
    case ErrorKind::Domain:
      return Usage;
    default:
      return SolverFailure;
  }
}

// ---- commands ----

struct Validation {
  bool ok = true;
  json report;
  std::vector<std::string> warnings;
};

Validation validate(const RunConfig& cfg) {
  Validation v;
  const std::size_t N = cfg.frictions.size();
  const bool geo = cfg.solver.oracle != Oracle::Lp;
  json order = json::array(), msm = json::array(), growth = json::array();
  for (std::size_t t = 0; t < N; ++t) {
    const OrderReport r = convex_order_report(cfg.marginals[t], cfg.marginals[t + 1], cfg.tol_order);
    order.push_back({{"step", t}, {"ok", r.ok}, {"worst_gap", r.worst_gap}, {"worst_k", r.worst_k},
                     {"mean_gap", r.mean_gap}, {"reason", r.reason}});
    if (!r.ok) v.ok = false;
  }
  std::vector<double> probe;
  for (const auto& m : cfg.marginals) probe.insert(probe.end(), m.locations().begin(), m.locations().end());
  std::sort(probe.begin(), probe.end());
  probe.erase(std::unique(probe.begin(), probe.end()), probe.end());
  for (std::size_t t = 0; t < N; ++t) {
    const FrictionSpec& f = cfg.frictions[t];
    const auto& mu = cfg.marginals[t];
    const auto& eta = cfg.marginals[t + 1];
    json e{{"step", t}};
    if (mu.size() >= 2 && eta.size() >= 2) {
      const MsmReport r = msm_check(GridFunction::zero(), f, mu.locations(), eta.locations());
      const double tol = 1e-12 * (1.0 + std::abs(r.kappa_estimate));
      const std::string status = r.min_increment > tol ? "strict" : r.min_increment >= -tol ? "degenerate" : "fail";
      e.update({{"min_increment", r.min_increment}, {"x", r.x}, {"x2", r.x2}, {"y_lo", r.y_lo}, {"y_hi", r.y_hi},
                {"kappa_estimate", r.kappa_estimate}, {"rectangles", r.rectangles}, {"subsampled", r.subsampled},
                {"status", status}});
      if (status != "strict" && geo)
        v.warnings.push_back("step " + std::to_string(t) + ": MSM " + status +
                             "; geometric solver will refuse, LP fallback");
    } else {
      e["status"] = "skipped";
    }
    msm.push_back(e);
    const double bmin = f.b_coeff().min_value();
    json g{{"step", t}, {"b_min", bmin}, {"superlinear", bmin > 0.0}};
    if (bmin <= 0.0)
      v.warnings.push_back("step " + std::to_string(t) + ": beta = 0 somewhere" +
                           (geo ? std::string("; geometric solver refuses, LP fallback") : std::string("; LP oracle only")));
    if (cfg.growth.given) {
      const GrowthReport r = growth_check(f, cfg.growth.probe.empty() ? probe : cfg.growth.probe, cfg.growth.m,
                                          cfg.growth.p, cfg.growth.c);
      g.update({{"pass", r.pass}, {"worst_margin", r.worst_margin}, {"worst_x", r.worst_x}, {"worst_v", r.worst_v}});
      if (!r.pass) v.ok = false;
    }
    growth.push_back(g);
  }
  v.report = {{"ok", v.ok}, {"convex_order", order}, {"msm", msm}, {"growth", growth}, {"warnings", v.warnings}};
  return v;
}

void print_validation(const Validation& v, std::ostream& log) {
  for (const auto& e : v.report["convex_order"]) {
    log << "step " << e["step"].get<std::size_t>() << ": convex order " << (e["ok"].get<bool>() ? "ok" : "FAILS");
    if (!e["ok"].get<bool>()) log << " (" << e["reason"].get<std::string>() << ")";
    log << "\n";
  }
  for (const auto& e : v.report["msm"])
    log << "step " << e["step"].get<std::size_t>() << ": MSM " << e["status"].get<std::string>() << "\n";
  for (const auto& e : v.report["growth"])
    if (e.contains("pass"))
      log << "step " << e["step"].get<std::size_t>() << ": growth " << (e["pass"].get<bool>() ? "ok" : "FAILS") << "\n";
  for (const auto& w : v.warnings) log << "warning: " << w << "\n";
}

int cmd_validate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const Validation v = validate(cfg);
  print_validation(v, log);
  fs::create_directories(out);
  write_json(out, "validate.json", v.report);
  write_json(out, "manifest.json", manifest(cfg, "validate", {"validate.json"}));
  return v.ok ? Ok : Usage;
}

int cmd_price(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const Validation v = validate(cfg);
  print_validation(v, log);
  fs::create_directories(out);
  write_json(out, "validate.json", v.report);
  if (!v.ok) {
    log << "validation failed\n";
    return Usage;
  }
  const PriceResult p = superhedging_price(cfg.marginals, cfg.frictions, cfg.payoff, cfg.solver, true);
  std::vector<std::string> warnings = v.warnings;
  warnings.insert(warnings.end(), p.result.warnings.begin(), p.result.warnings.end());
  const bool gap_ok = std::abs(p.gap) <= cfg.tol_gap * (1.0 + std::abs(p.value));
  if (!gap_ok) warnings.push_back("duality gap above tolerance");
  double dpp = 0.0;
  for (double d : p.result.dpp_residual) dpp = std::max(dpp, d);

  json val;
  val["primal"] = p.value;
  val["dual"] = p.dual;
  val["gap"] = p.gap;
  val["gap_ok"] = gap_ok;
  val["sub_value"] = num_or_null(p.sub_value);
  val["lp_dual"] = p.result.lp_dual;
  val["oracle_deltas"] = p.result.oracle_deltas;
  val["step_friction"] = p.result.step_friction;
  val["dpp_residual_max"] = dpp;
  val["payoff"] = to_string(cfg.payoff.kind);
  val["audit"] = {{"paths", p.audit.paths},
                  {"max_violation", p.audit.max_violation},
                  {"max_step_violation", p.audit.max_step_violation},
                  {"mean_slack", p.audit.mean_slack},
                  {"min_slack", p.audit.min_slack},
                  {"max_slack", p.audit.max_slack},
                  {"fenchel_young_max_violation", p.audit.fy_max_violation}};
  val["warnings"] = warnings;
  write_json(out, "value.json", val);
  write_text_file((out / "certificate.json").string(), certificate_json(p.certificate, cfg.tol_cert) + "\n");

  CsvWriter kernels({"t", "x", "t_down", "t_up", "theta", "band"});
  CsvWriter stats({"t", "turnover", "turnover_formula", "exec_cost", "band_mass", "spread_bound", "alpha_lower",
                   "beta_lower", "identity_residual"});
  for (std::size_t t = 0; t < p.result.kernels.size(); ++t) {
    const BiatomicKernel& k = p.result.kernels[t];
    for (std::size_t i = 0; i < k.size(); ++i)
      kernels.row({std::to_string(t), format_double(k.x[i]), format_double(k.t_down[i]), format_double(k.t_up[i]),
                   format_double(k.theta[i]), flag(k.band[i])});
    const StepStats s = step_stats(k, cfg.frictions[t]);
    stats.row({std::to_string(t), format_double(s.turnover), format_double(s.turnover_formula),
               format_double(s.exec_cost), format_double(s.band_mass), format_double(s.spread_bound),
               format_double(s.alpha_lower), format_double(s.beta_lower), format_double(s.identity_residual)});
  }
  write_text_file((out / "kernels.csv").string(), kernels.str());
  write_text_file((out / "stats.csv").string(), stats.str());
  json m = manifest(cfg, "price", {"validate.json", "value.json", "certificate.json", "kernels.csv", "stats.csv"});
  m["lp"] = {{"rows", p.result.lp_rows}, {"cols", p.result.lp_cols}, {"iterations", p.result.lp_iterations}};
  write_json(out, "manifest.json", m);
  log << "primal " << format_double(p.value) << "  dual " << format_double(p.dual) << "  gap "
      << format_double(p.gap) << "  sub " << format_double(p.sub_value) << "\n";
  for (const auto& w : p.result.warnings) log << "warning: " << w << "\n";
  return Ok;
}

OnestepInstance instance_of(const RunConfig& cfg) {
  const std::size_t s = cfg.analytics.step;
  return {cfg.marginals[s], cfg.marginals[s + 1], cfg.analytics.V};
}

int cmd_sweep(const RunConfig& cfg, const Options& o, const fs::path& out, std::ostream& log) {
  const std::size_t s = cfg.analytics.step;
  const double x0 = cfg.marginals[s].mean();
  std::vector<double> alphas = o.alphas ? *o.alphas : cfg.analytics.alphas;
  std::vector<double> betas = o.betas ? *o.betas : cfg.analytics.betas;
  if (!o.alphas && alphas.empty()) alphas = {cfg.frictions[s].a(x0)};
  if (!o.betas && betas.empty()) betas = {cfg.frictions[s].b(x0)};
  const SweepReport r = sweep(instance_of(cfg), alphas, betas);
  fs::create_directories(out);
  CsvWriter t({"alpha", "beta", "value", "band_mass", "turnover", "exec_cost", "spread_bound", "lq_bound", "msm_min"});
  for (const auto& c : r.cells)
    t.row({format_double(c.alpha), format_double(c.beta), format_double(c.value), format_double(c.stats.band_mass),
           format_double(c.stats.turnover), format_double(c.stats.exec_cost), format_double(c.stats.spread_bound),
           format_double(c.stats.lq_bound), format_double(c.msm_min)});
  CsvWriter f({"param", "fixed", "from", "to", "quantity", "atom", "amount"});
  for (const auto& v : r.findings)
    f.row({v.param, format_double(v.fixed), format_double(v.from), format_double(v.to), v.quantity,
           std::to_string(v.atom), format_double(v.amount)});
  write_text_file((out / "sweep.csv").string(), t.str());
  write_text_file((out / "sweep_findings.csv").string(), f.str());
  json rep{{"step", s},
           {"sup_v2", r.sup_v2},
           {"curvature_ok", std::vector<bool>(r.curvature_ok.begin(), r.curvature_ok.end())},
           {"density_ok", r.density_ok},
           {"hypotheses", r.hypotheses()},
           {"min_slack", r.min_slack},
           {"findings", r.findings.size()}};
  write_json(out, "sweep.json", rep);
  write_json(out, "manifest.json", manifest(cfg, "sweep", {"sweep.csv", "sweep_findings.csv", "sweep.json"}));
  log << r.cells.size() << " cells, " << r.findings.size() << " monotonicity findings, hypotheses "
      << (r.hypotheses() ? "hold" : "fail") << "\n";
  return Ok;
}

int cmd_vanish(const RunConfig& cfg, const Options& o, const fs::path& out, std::ostream& log) {
  auto sched = cfg.analytics.schedule;
  if (o.steps) {
    if (*o.steps <= 0) throw Error(ErrorKind::Validation, "--steps must be positive");
    const double base = sched.empty() ? 0.4 : sched.front().first * 2.0;
    sched.clear();
    for (int k = 1; k <= *o.steps; ++k) sched.emplace_back(base * std::ldexp(1.0, -k), base * std::ldexp(1.0, -k));
  }
  const VanishReport r = vanishing_friction(instance_of(cfg), sched);
  fs::create_directories(out);
  CsvWriter t({"n", "alpha", "beta", "endpoint_distance", "lp_endpoint_distance", "touching_residual", "value"});
  for (const auto& s : r.steps)
    t.row({std::to_string(s.n), format_double(s.alpha), format_double(s.beta), format_double(s.endpoint_distance),
           format_double(s.lp_endpoint_distance), format_double(s.touching_residual), format_double(s.value)});
  write_text_file((out / "vanish.csv").string(), t.str());
  write_json(out, "manifest.json", manifest(cfg, "vanish", {"vanish.csv"}));
  if (!r.steps.empty())
    log << r.steps.size() << " steps, final endpoint distance " << format_double(r.steps.back().endpoint_distance)
        << ", touching residual " << format_double(r.steps.back().touching_residual) << "\n";
  return Ok;
}

int cmd_stability(const RunConfig& cfg, const Options& o, const fs::path& out, std::ostream& log) {
  const std::vector<double> eps = o.eps ? *o.eps : cfg.analytics.eps;
  const auto rows = marginal_stability(instance_of(cfg), cfg.frictions[cfg.analytics.step], eps, cfg.seed);
  fs::create_directories(out);
  CsvWriter t({"eps", "w1_mu", "w1_eta", "coupling_distance", "endpoint_l1", "ratio", "skipped", "note"});
  for (const auto& r : rows)
    t.row({format_double(r.eps), format_double(r.w1_mu), format_double(r.w1_eta), format_double(r.coupling_distance),
           format_double(r.endpoint_l1), format_double(r.ratio), flag(r.skipped), r.note});
  write_text_file((out / "stability.csv").string(), t.str());
  write_json(out, "manifest.json", manifest(cfg, "stability", {"stability.csv"}));
  log << rows.size() << " perturbation sizes\n";
  return Ok;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
      throw CLI::ValidationError(flag, "not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  Ctx c{path, fs::path(path).parent_path()};
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw Error(ErrorKind::Config, "cannot open " + path);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::Config, path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw Error(ErrorKind::Config, path + ": top level must be a mapping");
  check_keys(c, root, "config", {"marginals", "frictions", "payoff", "solver", "growth", "analytics", "seed", "output"});
  RunConfig cfg;
  cfg.path = path;
  const YAML::Node ms = root["marginals"];
  if (!ms || !ms.IsSequence()) c.fail(ms ? ms : root, "marginals", "expected a list");
  if (ms.size() < 2) c.fail(ms, "marginals", "need at least two marginals");
  for (std::size_t t = 0; t < ms.size(); ++t) {
    std::string src;
    cfg.marginals.push_back(parse_marginal(c, ms[t], t, src));
    cfg.marginal_sources.push_back(src);
  }
  const std::size_t N = cfg.marginals.size() - 1;
  const YAML::Node fr = root["frictions"];
  if (!fr) c.fail(root, "frictions", "required");
  if (fr.IsSequence()) {
    if (fr.size() != N)
      c.fail(fr, "frictions", "expected " + std::to_string(N) + " entries (one per step), got " + std::to_string(fr.size()));
    for (std::size_t t = 0; t < N; ++t) cfg.frictions.push_back(parse_friction(c, fr[t], "frictions[" + std::to_string(t) + "]"));
  } else {
    cfg.frictions.assign(N, parse_friction(c, fr, "frictions"));
  }
  cfg.payoff = parse_payoff(c, root["payoff"]);
  if (const YAML::Node s = root["solver"]) {
    check_keys(c, s, "solver", {"oracle", "force_msm", "asian_max_states", "asian_grid_points", "tol_gap", "tol_cert",
                                "tol_order", "lp_tol_feas", "lp_tol_opt", "lp_max_iterations"});
    if (s["oracle"]) {
      const std::string o = c.str(s["oracle"], "solver.oracle");
      if (o == "lp") cfg.solver.oracle = Oracle::Lp;
      else if (o == "geometric") cfg.solver.oracle = Oracle::Geometric;
      else if (o == "both") cfg.solver.oracle = Oracle::Both;
      else c.fail(s["oracle"], "solver.oracle", "expected lp|geometric|both");
    }
    if (s["force_msm"]) cfg.solver.geo.force = s["force_msm"].as<bool>();
    cfg.solver.asian_max_states = std::size_t(c.positive(s, "asian_max_states", double(cfg.solver.asian_max_states)));
    const double gp = c.positive(s, "asian_grid_points", double(cfg.solver.asian_grid_points));
    if (gp < 2.0) c.fail(s["asian_grid_points"], "solver.asian_grid_points", "must be >= 2");
    cfg.solver.asian_grid_points = std::size_t(gp);
    cfg.tol_gap = c.positive(s, "tol_gap", cfg.tol_gap);
    cfg.tol_cert = c.positive(s, "tol_cert", cfg.tol_cert);
    cfg.tol_order = c.positive(s, "tol_order", cfg.tol_order);
    cfg.solver.lp.feasibility_tol = c.positive(s, "lp_tol_feas", cfg.solver.lp.feasibility_tol);
    cfg.solver.lp.optimality_tol = c.positive(s, "lp_tol_opt", cfg.solver.lp.optimality_tol);
    if (s["lp_max_iterations"])
      cfg.solver.lp.max_iterations = std::size_t(c.positive(s, "lp_max_iterations", 0.0));
  }
  if (const YAML::Node g = root["growth"]) {
    check_keys(c, g, "growth", {"m", "p", "c", "probe"});
    cfg.growth.given = true;
    cfg.growth.m = c.num(g, "m", 0.0);
    cfg.growth.p = c.positive(g, "p", 2.0);
    cfg.growth.c = c.num(g, "c", 0.0);
    if (g["probe"]) cfg.growth.probe = c.nums(g["probe"], "growth.probe");
  }
  if (const YAML::Node s = root["seed"]) {
    const double v = c.num(s, "seed");
    if (!(v >= 0.0) || v != std::floor(v)) c.fail(s, "seed", "must be a nonnegative integer");
    cfg.seed = std::uint64_t(v);
  }
  if (const YAML::Node o = root["output"]) {
    check_keys(c, o, "output", {"dir"});
    if (o["dir"]) cfg.out_dir = c.resolve(c.str(o["dir"], "output.dir"));
  }
  parse_analytics(c, root["analytics"], cfg);
  return cfg;
}

int run(const Options& opts, std::ostream& log) {
  fs::path out;
  try {
    RunConfig cfg = load_config(opts.config);
    if (opts.oracle) {
      if (*opts.oracle == "lp") cfg.solver.oracle = Oracle::Lp;
      else if (*opts.oracle == "geometric") cfg.solver.oracle = Oracle::Geometric;
      else if (*opts.oracle == "both") cfg.solver.oracle = Oracle::Both;
      else throw Error(ErrorKind::Validation, "--oracle expects lp|geometric|both");
    }
    out = opts.out ? fs::path(*opts.out) : fs::path(cfg.out_dir);
    if (opts.command == "validate") return cmd_validate(cfg, out, log);
    if (opts.command == "price") return cmd_price(cfg, out, log);
    if (opts.command == "sweep") return cmd_sweep(cfg, opts, out, log);
    if (opts.command == "vanish") return cmd_vanish(cfg, opts, out, log);
    if (opts.command == "stability") return cmd_stability(cfg, opts, out, log);
    throw Error(ErrorKind::Validation, "unknown command '" + opts.command + "'");
  } catch (const Error& e) {
    log << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    const int code = exit_for(e.kind());
    if (code == SolverFailure && !out.empty()) {
      fs::create_directories(out);
      write_json(out, "error.json", {{"kind", to_string(e.kind())}, {"message", e.what()}, {"command", opts.command}});
    }
    return code;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    if (!out.empty()) {
      fs::create_directories(out);
      write_json(out, "error.json", {{"kind", "internal"}, {"message", e.what()}, {"command", opts.command}});
    }
    return SolverFailure;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"Frictional martingale transport: pricing, duality certificates and diagnostics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;
  const std::vector<std::pair<std::string, std::string>> cmds{
      {"validate", "check convex order, MSM and friction growth"},
      {"price", "superhedging price, dual certificate, kernels and statistics"},
      {"sweep", "comparative statics over alpha/beta grids"},
      {"vanish", "vanishing-friction convergence table"},
      {"stability", "marginal perturbation table"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : cmds) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", o.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
    s->add_option_function<std::string>("--out", [&](const std::string& v) { o.out = v; }, "output directory");
    s->add_option_function<std::string>("--oracle", [&](const std::string& v) { o.oracle = v; }, "lp|geometric|both")
        ->check(CLI::IsMember({"lp", "geometric", "both"}));
    if (name == "sweep") {
      s->add_option_function<std::string>("--alphas", [&](const std::string& v) { o.alphas = parse_list(v, "--alphas"); },
                                                  "comma-separated alpha grid");
      s->add_option_function<std::string>("--betas", [&](const std::string& v) { o.betas = parse_list(v, "--betas"); },
                                                  "comma-separated beta grid");
    }
    if (name == "vanish")
      s->add_option_function<int>("--steps", [&](int v) { o.steps = v; }, "schedule length (base * 2^-n)");
    if (name == "stability")
      s->add_option_function<std::string>("--eps", [&](const std::string& v) { o.eps = parse_list(v, "--eps"); },
                                                  "comma-separated perturbation sizes");
    subs.push_back(s);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : Usage;
  }
  for (CLI::App* s : subs)
    if (s->parsed()) o.command = s->get_name();
  return run(o, std::cerr);
}

}  // namespace fricmot::cli
