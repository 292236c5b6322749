#pragma once

// Experiment pipeline behind the command-line tool: config parsing, solve,
// audit and output files. Exit statuses:
//   0 ok, 1 config error, 2 solver error, 3 audit failure.

#include "kldescent/catalog.hpp"
#include "kldescent/core.hpp"
#include "kldescent/diagnostics.hpp"
#include "kldescent/npg_major.hpp"
#include "kldescent/pgenls.hpp"
#include "kldescent/report.hpp"
#include "kldescent/trace_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace kldescent {

enum ExitStatus : int { kExitOk = 0, kExitConfig = 1, kExitSolver = 2, kExitAudit = 3 };

/// Config is malformed; the message names the offending field.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct DiagnosticsSettings {
  double tau = 0.5;
  std::optional<double> mu;
  std::optional<std::int64_t> k_bar;
  std::optional<std::int64_t> rate_k_min;
  std::optional<std::int64_t> rate_k_max;
};

struct ExperimentConfig {
  std::string problem_id;
  nlohmann::json params = nlohmann::json::object();
  std::string algorithm = "npg_major";  // npg_major | pgenls | pgnls
  NpgConfig npg;
  PgenlsConfig pgenls;
  DiagnosticsSettings diagnostics;
  std::filesystem::path output_dir;
  /// The config as given, stored alongside the trace for verify.
  nlohmann::json raw = nlohmann::json::object();

  int memory() const { return algorithm == "npg_major" ? npg.m : pgenls.m; }
};

namespace detail {

class Fields {
 public:
  Fields(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_ + " must be an object");
  }

  std::string name(const std::string& key) const { return prefix_ + "." + key; }

  void real(const std::string& key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_number()) throw ConfigError(name(key) + " must be a number");
    out = j_[key].get<double>();
  }

  void real(const std::string& key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_[key].is_null()) return;
    if (!j_[key].is_number()) throw ConfigError(name(key) + " must be a number");
    out = j_[key].get<double>();
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_[key];
    if (v.is_number_integer()) {
      out = static_cast<Int>(v.get<long long>());
    } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
      out = static_cast<Int>(v.get<double>());
    } else {
      throw ConfigError(name(key) + " must be an integer");
    }
  }

  template <class Int>
  void integer(const std::string& key, std::optional<Int>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_[key].is_null()) return;
    Int v{};
    integer(key, v);
    out = v;
  }

  void choice(const std::string& key, std::string& out, std::initializer_list<const char*> allowed) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_string()) throw ConfigError(name(key) + " must be a string");
    out = j_[key].get<std::string>();
    for (const char* a : allowed)
      if (out == a) return;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    throw ConfigError(name(key) + " must be one of: " + list);
  }

  void reject_unknown() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown field " + name(key));
  }

 private:
  const nlohmann::json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline GammaInit parse_gamma_init(const std::string& s) {
  return s == "constant" ? GammaInit::constant : GammaInit::spectral;
}

inline void read_npg(const nlohmann::json& j, NpgConfig& c) {
  Fields f(j, "solver");
  std::string gamma_init = "spectral";
  f.integer("m", c.m);
  f.real("gamma_min", c.gamma_min);
  f.real("gamma_max", c.gamma_max);
  f.real("rho", c.rho);
  f.real("delta", c.delta);
  f.real("alpha", c.alpha);
  f.real("c", c.c);
  f.integer("max_outer", c.max_outer);
  f.integer("max_inner", c.max_inner);
  f.real("tol_step", c.tol_step);
  f.real("tol_resid", c.tol_resid);
  f.choice("gamma_init", gamma_init, {"constant", "spectral"});
  f.reject_unknown();
  c.gamma_init = parse_gamma_init(gamma_init);
}

inline void read_pgenls(const nlohmann::json& j, PgenlsConfig& c, bool plain) {
  Fields f(j, "solver");
  std::string gamma_init = "spectral";
  std::string beta_init = "constant";
  f.integer("m", c.m);
  f.real("delta", c.delta);
  f.real("alpha", c.alpha);
  f.real("gamma_min", c.gamma_min);
  f.real("gamma_max", c.gamma_max);
  f.real("beta_max", c.beta_max);
  f.real("rho", c.rho);
  f.real("nu", c.nu);
  f.integer("max_outer", c.max_outer);
  f.integer("max_inner", c.max_inner);
  f.real("tol_step", c.tol_step);
  f.real("tol_resid", c.tol_resid);
  f.choice("gamma_init", gamma_init, {"constant", "spectral"});
  f.choice("beta_init", beta_init, {"constant", "nesterov"});
  f.reject_unknown();
  c.gamma_init = parse_gamma_init(gamma_init);
  c.beta_init = beta_init == "nesterov" ? BetaInit::nesterov : BetaInit::constant;
  if (plain) {
    if ((j.contains("delta") && c.delta != 0.0) || (j.contains("beta_max") && c.beta_max != 0.0))
      throw ConfigError("solver.delta and solver.beta_max must be 0 for pgnls");
    c.delta = 0.0;
    c.beta_max = 0.0;
  }
}

inline DiagnosticsSettings read_diagnostics(const nlohmann::json& j) {
  DiagnosticsSettings d;
  if (j.is_null()) return d;
  Fields f(j, "diagnostics");
  f.real("tau", d.tau);
  f.real("mu", d.mu);
  f.integer("k_bar", d.k_bar);
  f.integer("rate_k_min", d.rate_k_min);
  f.integer("rate_k_max", d.rate_k_max);
  f.reject_unknown();
  return d;
}

inline void validate_diagnostics(const DiagnosticsSettings& d, int m) {
  if (!(d.tau > 0.0 && d.tau < 1.0)) throw ConfigError("diagnostics.tau must lie in (0,1)");
  if (d.mu && !(*d.mu >= 0.0 && std::isfinite(*d.mu))) throw ConfigError("diagnostics.mu must be >= 0");
  if (d.k_bar && *d.k_bar <= m) throw ConfigError("diagnostics.k_bar must exceed solver.m");
}

inline nlohmann::json diagnostics_to_json(const DiagnosticsSettings& d) {
  nlohmann::json j;
  j["tau"] = d.tau;
  if (d.mu) j["mu"] = *d.mu;
  if (d.k_bar) j["k_bar"] = *d.k_bar;
  if (d.rate_k_min) j["rate_k_min"] = *d.rate_k_min;
  if (d.rate_k_max) j["rate_k_max"] = *d.rate_k_max;
  return j;
}

}  // namespace detail

/// Relative paths (output_dir, *_csv parameters) resolve against base_dir.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::Fields top(j, "config");
  ExperimentConfig cfg;
  cfg.raw = j;

  static const nlohmann::json empty = nlohmann::json::object();
  if (!j.contains("problem") || !j["problem"].is_object()) throw ConfigError("problem must be an object");
  const nlohmann::json& problem = j["problem"];
  detail::Fields pf(problem, "problem");
  pf.choice("id", cfg.problem_id, {"lasso", "l0-ls", "l1-l2-dc", "power4-1d", "quad-l1"});
  if (cfg.problem_id.empty()) throw ConfigError("problem.id is required");
  if (problem.contains("params")) {
    if (!problem["params"].is_object()) throw ConfigError("problem.params must be an object");
    cfg.params = problem["params"];
  }
  for (const auto& [key, _] : problem.items())
    if (key != "id" && key != "params") throw ConfigError("unknown field problem." + key);
  for (auto& [key, value] : cfg.params.items()) {
    if (key.size() > 4 && key.ends_with("_csv") && value.is_string()) {
      const std::filesystem::path p = value.get<std::string>();
      if (p.is_relative() && !base_dir.empty()) value = (base_dir / p).string();
    }
  }

  top.choice("algorithm", cfg.algorithm, {"npg_major", "pgenls", "pgnls"});
  const nlohmann::json& solver = j.contains("solver") ? j["solver"] : empty;
  if (cfg.algorithm == "npg_major")
    detail::read_npg(solver, cfg.npg);
  else
    detail::read_pgenls(solver, cfg.pgenls, cfg.algorithm == "pgnls");
  cfg.diagnostics = detail::read_diagnostics(j.contains("diagnostics") ? j["diagnostics"] : nlohmann::json());

  std::string out = "out";
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("output_dir must be a string");
    out = j["output_dir"].get<std::string>();
  }
  cfg.output_dir = std::filesystem::path(out).is_relative() && !base_dir.empty() ? base_dir / out : std::filesystem::path(out);
  for (const auto& [key, _] : j.items())
    if (key != "problem" && key != "algorithm" && key != "solver" && key != "diagnostics" && key != "output_dir")
      throw ConfigError("unknown field " + key);

  try {
    if (cfg.algorithm == "npg_major")
      cfg.npg.validate();
    else
      cfg.pgenls.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }
  detail::validate_diagnostics(cfg.diagnostics, cfg.memory());
  if (cfg.algorithm != "npg_major" && cfg.problem_id == "l1-l2-dc")
    throw ConfigError("algorithm " + cfg.algorithm + " cannot solve problem l1-l2-dc: it has a concave part -h");
  return cfg;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  try {
    nlohmann::json j;
    is >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path), path.parent_path());
}

inline AuditOptions audit_options(const DiagnosticsSettings& d) {
  AuditOptions o;
  o.tau = d.tau;
  o.mu = d.mu;
  o.k_bar = d.k_bar;
  o.rate.k_min = d.rate_k_min;
  o.rate.k_max = d.rate_k_max;
  return o;
}

inline Trace solve(const ExperimentConfig& cfg, const ProblemInstance& inst) {
  Trace t = cfg.algorithm == "npg_major" ? npg_solve(inst.problem, inst.x0, cfg.npg)
                                         : pgenls_solve(inst.problem, inst.x0, cfg.pgenls);
  if (cfg.algorithm == "pgnls") t.meta.algorithm = "pgnls";
  t.meta.seed = inst.seed;
  nlohmann::json stored = cfg.raw;
  stored["diagnostics"] = detail::diagnostics_to_json(cfg.diagnostics);
  t.meta.config_json = stored.dump();
  return t;
}

struct RunOutcome {
  int status = kExitOk;
  std::string message;
  std::optional<DiagnosticsReport> report;
};

/// Solve, audit and write trace.csv, report.json and summary.txt.
inline RunOutcome run_experiment(const ExperimentConfig& cfg) {
  RunOutcome out;
  std::optional<ProblemInstance> inst;
  try {
    inst.emplace(make_problem(cfg.problem_id, cfg.params));
  } catch (const InvalidInput& e) {
    return {kExitConfig, e.what(), std::nullopt};
  }
  Trace trace;
  try {
    trace = solve(cfg, *inst);
  } catch (const Error& e) {
    return {kExitSolver, e.what(), std::nullopt};
  }
  try {
    std::filesystem::create_directories(cfg.output_dir);
    write_trace(cfg.output_dir / "trace.csv", trace);
    DiagnosticsReport rep = audit(trace, audit_options(cfg.diagnostics));
    std::ofstream(cfg.output_dir / "report.json") << report_to_string(rep);
    std::ofstream(cfg.output_dir / "summary.txt") << report_summary(rep);
    out.status = rep.pass() ? kExitOk : kExitAudit;
    if (!rep.pass()) {
      std::string names;
      for (const auto& f : rep.failures) names += (names.empty() ? "" : ", ") + f;
      out.message = "audit failed: " + names;
    }
    out.report = std::move(rep);
  } catch (const std::filesystem::filesystem_error& e) {
    return {kExitConfig, std::string("output: ") + e.what(), std::nullopt};
  } catch (const Error& e) {
    return {kExitAudit, std::string("audit: ") + e.what(), std::nullopt};
  }
  return out;
}

inline int run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const RunOutcome r = run_experiment(cfg);
  if (r.report) out << report_summary(*r.report);
  if (!r.message.empty()) err << (r.status == kExitSolver ? "solver error: " : "") << r.message << '\n';
  return r.status;
}

// ---------------------------------------------------------------------------
// sweep

/// Severity for combining sub-run statuses: config > solver > audit > ok.
inline int status_severity(int status) {
  switch (status) {
    case kExitOk: return 0;
    case kExitAudit: return 1;
    case kExitSolver: return 2;
    default: return 3;
  }
}

inline std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(list);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cell.substr(b, e - b + 1));
  }
  return out;
}

inline const std::set<std::string>& solver_field_names() {
  static const std::set<std::string> names = {"m",        "gamma_min", "gamma_max", "rho",       "delta",
                                              "alpha",    "c",         "beta_max",  "nu",        "max_outer",
                                              "max_inner", "tol_step", "tol_resid"};
  return names;
}

/// Sets `param` in a raw config. Dotted paths are taken literally; bare names
/// go to solver, then diagnostics, then problem.params.
inline void set_parameter(nlohmann::json& raw, const std::string& param, const nlohmann::json& value) {
  if (param.find('.') != std::string::npos) {
    nlohmann::json* node = &raw;
    std::istringstream ss(param);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) (*node)[parts[i]] = nlohmann::json::object();
      node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = value;
    return;
  }
  static const std::set<std::string> diag = {"tau", "mu", "k_bar", "rate_k_min", "rate_k_max"};
  if (solver_field_names().count(param))
    raw["solver"][param] = value;
  else if (diag.count(param))
    raw["diagnostics"][param] = value;
  else
    raw["problem"]["params"][param] = value;
}

struct SweepRow {
  std::string value;
  int status = kExitOk;
  std::string message;
  std::optional<DiagnosticsReport> report;
};

inline std::size_t sweep_threads(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("KLDESCENT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(cap, jobs));
}

inline std::string csv_quote(const std::string& s) {
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline int sweep(const std::filesystem::path& config_path, const std::string& param,
                 const std::vector<std::string>& values, std::ostream& out, std::ostream& err) {
  if (values.empty()) {
    err << "config error: --values is empty\n";
    return kExitConfig;
  }
  if (param.empty()) {
    err << "config error: --param is empty\n";
    return kExitConfig;
  }
  nlohmann::json base;
  ExperimentConfig base_cfg;
  try {
    base = read_json_file(config_path);
    base_cfg = parse_config(base, config_path.parent_path());
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::vector<SweepRow> rows(values.size());
  std::vector<std::optional<ExperimentConfig>> configs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows[i].value = values[i];
    try {
      nlohmann::json v;
      try {
        v = nlohmann::json::parse(values[i]);
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("value '" + values[i] + "' for " + param + " is not a number");
      }
      if (!v.is_number()) throw ConfigError("value '" + values[i] + "' for " + param + " is not a number");
      nlohmann::json raw = base;
      set_parameter(raw, param, v);
      raw["output_dir"] = (base_cfg.output_dir / (param + "=" + values[i])).string();
      configs[i] = parse_config(raw, config_path.parent_path());
    } catch (const InvalidInput& e) {
      rows[i].status = kExitConfig;
      rows[i].message = e.what();
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      if (!configs[i]) continue;
      RunOutcome r = run_experiment(*configs[i]);
      rows[i].status = r.status;
      rows[i].message = std::move(r.message);
      rows[i].report = std::move(r.report);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n_threads = sweep_threads(values.size());
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int worst = kExitOk;
  try {
    std::filesystem::create_directories(base_cfg.output_dir);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::ofstream csv(base_cfg.output_dir / "sweep.csv");
  csv << "value,status,iterations,final_F,verdict,rho,slope,theta,warnings,message\n";
  for (const auto& r : rows) {
    if (status_severity(r.status) > status_severity(worst)) worst = r.status;
    csv << r.value << ',' << r.status << ',';
    if (r.report) {
      std::string warnings;
      for (const auto& w : r.report->warnings) warnings += (warnings.empty() ? "" : " | ") + w;
      csv << r.report->iterations << ',' << format_double(r.report->final_F) << ','
          << to_string(r.report->rate.verdict) << ',' << format_double(r.report->rate.rho) << ','
          << format_double(r.report->rate.slope) << ',' << format_double(r.report->rate.theta) << ','
          << csv_quote(warnings) << ',';
    } else {
      csv << ",,,,,,\"\",";
    }
    csv << csv_quote(r.message) << '\n';
    out << param << '=' << r.value << "  status " << r.status;
    if (r.report) out << "  iterations " << r.report->iterations << "  rate " << to_string(r.report->rate.verdict);
    out << '\n';
    if (!r.message.empty()) err << param << '=' << r.value << ": " << r.message << '\n';
  }
  return worst;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOverrides {
  std::optional<int> m;
  std::optional<double> a;
  std::optional<double> tau;
  std::optional<double> mu;
  std::optional<std::int64_t> k_bar;
  std::optional<double> lipschitz;
  std::optional<double> delta;
  std::optional<std::string> algorithm;
  std::optional<std::string> step_block;
  std::optional<std::string> phi_column;
  std::optional<std::filesystem::path> report;
};

/// Re-audits a trace file. Metadata next to the trace supplies the solver
/// constants; traces without it need at least m and a.
inline int verify(const std::filesystem::path& trace_path, const VerifyOverrides& ov, std::ostream& out,
                  std::ostream& err) {
  Trace trace;
  bool has_meta = false;
  try {
    trace = read_trace(trace_path, &has_meta);
  } catch (const TraceFormatError& e) {
    err << "trace error: " << trace_path.string();
    if (e.line() > 0) err << ":" << e.line();
    err << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidInput& e) {
    err << "trace error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (!has_meta && (!ov.m || !ov.a)) {
    err << "config error: " << trace_path.string() << " has no metadata; pass --m and --a\n";
    return kExitConfig;
  }
  if (ov.m) trace.meta.m = *ov.m;
  if (ov.a) trace.meta.h1_constant = *ov.a;
  if (ov.delta) trace.meta.delta = *ov.delta;
  if (ov.algorithm) trace.meta.algorithm = *ov.algorithm;
  if (ov.step_block) {
    if (*ov.step_block != "x" && *ov.step_block != "z") {
      err << "config error: --step-block must be x or z\n";
      return kExitConfig;
    }
    trace.meta.step_block = *ov.step_block == "x" ? StepBlock::x : StepBlock::z;
  }
  if (ov.phi_column) {
    if (*ov.phi_column != "F" && *ov.phi_column != "merit") {
      err << "config error: --phi must be F or merit\n";
      return kExitConfig;
    }
    trace.meta.phi_column = *ov.phi_column == "F" ? PhiColumn::F : PhiColumn::merit;
  }

  DiagnosticsSettings d;
  try {
    const auto stored = nlohmann::json::parse(trace.meta.config_json);
    if (stored.contains("diagnostics")) d = detail::read_diagnostics(stored["diagnostics"]);
    if (ov.tau) d.tau = *ov.tau;
    if (ov.mu) d.mu = *ov.mu;
    if (ov.k_bar) d.k_bar = *ov.k_bar;
    detail::validate_diagnostics(d, trace.meta.m);
    if (ov.a && !(*ov.a > 0.0)) throw ConfigError("--a must be > 0");
    if (ov.m && *ov.m < 0) throw ConfigError("--m must be >= 0");
    if (ov.lipschitz && !(*ov.lipschitz > 0.0)) throw ConfigError("--lipschitz must be > 0");
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: stored config: " << e.what() << '\n';
    return kExitConfig;
  }

  AuditOptions opts = audit_options(d);
  opts.lipschitz = ov.lipschitz;
  DiagnosticsReport rep;
  try {
    rep = audit(trace, opts);
  } catch (const Error& e) {
    err << "audit error: " << e.what() << '\n';
    return kExitAudit;
  }
  const auto report_path = ov.report ? *ov.report : trace_path.parent_path() / "report.json";
  std::ofstream os(report_path);
  if (!os) {
    err << "config error: cannot write " << report_path.string() << '\n';
    return kExitConfig;
  }
  os << report_to_string(rep);
  out << report_summary(rep);
  if (!rep.pass()) {
    std::string names;
    for (const auto& f : rep.failures) names += (names.empty() ? "" : ", ") + f;
    err << "audit failed: " << names << '\n';
    return kExitAudit;
  }
  return kExitOk;
}

}  // namespace kldescent
