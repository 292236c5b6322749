#pragma once

#include "kldescent/core.hpp"
#include "kldescent/diagnostics.hpp"

#include <nlohmann/json.hpp>

#include <sstream>
#include <string>

namespace kldescent {

/// Flat JSON with dotted keys. Keys are sorted and non-finite values become
/// null, so identical reports serialize to identical bytes.
inline nlohmann::json report_to_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["algorithm"] = r.algorithm;
  j["problem_id"] = r.problem_id;
  j["iterations"] = r.iterations;
  j["terminated_by"] = r.terminated_by;
  j["final_F"] = r.final_F;
  j["pass"] = r.pass();
  j["failures"] = r.failures;
  j["warnings"] = r.warnings;
  j["trace.issues"] = r.trace_issues;

  j["h1.a"] = r.h1.a;
  j["h1.max_violation"] = r.h1.max_violation;
  j["h1.worst_k"] = r.h1.worst_k;
  j["h1.slack"] = r.h1.slack;
  j["h1.pass"] = r.h1.pass;

  j["h3.applicable"] = r.h3.applicable;
  j["h3.sandwich_max_violation"] = r.h3.sandwich_max_violation;
  j["h3.b_cap"] = r.h3.b_cap;
  j["h3.pass"] = r.h3.pass;

  j["constants.b_hat"] = r.h3.b_hat;
  j["constants.b_bar"] = r.bbar.b_bar;
  j["constants.b_bar_degenerate"] = r.bbar.degenerate;
  j["constants.gamma_star"] = r.h3.gamma_star;
  j["constants.lipschitz"] = r.h3.applicable ? nlohmann::json(r.h3.lipschitz) : nlohmann::json(nullptr);
  j["constants.lipschitz_source"] = r.lipschitz_source;

  j["h4.tau"] = r.h4.tau;
  j["h4.mu"] = r.h4.mu;
  j["h4.k_bar"] = r.h4.k_bar;
  j["h4.max_violation"] = r.h4.max_violation;
  j["h4.worst_k"] = r.h4.worst_k;
  j["h4.worst_i"] = r.h4.worst_i;
  j["h4.checked"] = r.h4.checked;
  j["h4.vacuous"] = r.h4.vacuous;
  j["h4.pass"] = r.h4.pass;

  j["series.xi_sum"] = r.series.xi_sum;
  j["series.gamma_sum"] = r.series.gamma_sum;
  j["series.xi_tail_sum"] = r.series.xi_tail_sum;
  j["series.gamma_tail_sum"] = r.series.gamma_tail_sum;
  j["series.xi_tail_max"] = r.series.xi_tail_max;
  j["series.gamma_tail_max"] = r.series.gamma_tail_max;
  j["series.tail_max_small"] = r.series.tail_max_small;
  j["series.applicable"] = r.series.applicable;
  j["series.pass"] = r.series.pass;
  if (!r.series.error.empty()) j["series.error"] = r.series.error;

  j["prop_bound.c"] = r.prop_bound.c;
  j["prop_bound.max_violation"] = r.prop_bound.max_violation;
  j["prop_bound.worst_k"] = r.prop_bound.worst_k;
  j["prop_bound.pass"] = r.prop_bound.pass;

  j["rate.verdict"] = to_string(r.rate.verdict);
  j["rate.rho"] = r.rate.rho;
  j["rate.r2_linear"] = r.rate.r2_linear;
  j["rate.slope"] = r.rate.slope;
  j["rate.r2_power"] = r.rate.r2_power;
  j["rate.theta"] = r.rate.theta;
  j["rate.points"] = r.rate.points;
  j["rate.k_first"] = r.rate.k_first;
  j["rate.k_last"] = r.rate.k_last;
  j["rate.reference"] = r.rate.reference;
  if (!r.rate.note.empty()) j["rate.note"] = r.rate.note;
  return j;
}

inline std::string report_to_string(const DiagnosticsReport& r) { return report_to_json(r).dump(2) + "\n"; }

/// Human-readable digest for summary.txt.
inline std::string report_summary(const DiagnosticsReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << kVersion << '\n';
  os << "problem     " << r.problem_id << '\n';
  os << "algorithm   " << r.algorithm << '\n';
  os << "iterations  " << r.iterations << " (" << r.terminated_by << ")\n";
  os << "final F     " << r.final_F << '\n';
  os << "H1          " << (r.h1.pass ? "pass" : "FAIL") << "  max violation " << r.h1.max_violation << '\n';
  if (r.h3.applicable)
    os << "H3          " << (r.h3.pass ? "pass" : "FAIL") << "  b_hat " << r.h3.b_hat << " <= " << r.h3.b_cap
       << "  (L " << r.h3.lipschitz << ", " << r.lipschitz_source << ")\n";
  else
    os << "H3          skipped (no Lipschitz constant)\n";
  os << "H4          " << (r.h4.pass ? "pass" : "FAIL") << (r.h4.vacuous ? " (vacuous)" : "") << "  mu " << r.h4.mu
     << "  tau " << r.h4.tau << "  b_bar " << r.bbar.b_bar << '\n';
  os << "path bound  " << (r.prop_bound.pass ? "pass" : "FAIL") << "  c " << r.prop_bound.c << '\n';
  os << "series      " << (r.series.pass ? "pass" : "FAIL") << (r.series.applicable ? "" : " (not checked)")
     << "  sum Xi " << r.series.xi_sum << "  sum Gamma " << r.series.gamma_sum << '\n';
  os << "rate        " << to_string(r.rate.verdict);
  if (r.rate.verdict == RateVerdict::linear) os << "  rho " << r.rate.rho << "  R2 " << r.rate.r2_linear;
  if (r.rate.verdict == RateVerdict::sublinear)
    os << "  slope " << r.rate.slope << "  theta " << r.rate.theta << "  R2 " << r.rate.r2_power;
  os << '\n';
  for (const auto& w : r.warnings) os << "warning     " << w << '\n';
  os << "status      " << (r.pass() ? "pass" : "FAIL") << '\n';
  return os.str();
}

}  // namespace kldescent
