#pragma once

// Post-hoc audits of solver traces against the H1-H4 convergence framework
// of GLL-type nonmonotone descent methods.
//
// Notation used throughout: Phi is the framework objective (F for the DC
// solver, F_delta for the extrapolated one), d_k the framework step
// (||x^k - x^{k-1}|| or ||z^k - z^{k-1}||), and ell(k) the window argmax with
// largest-index tie-break.

#include "kldescent/core.hpp"
#include "kldescent/npg_major.hpp"
#include "kldescent/oracles.hpp"
#include "kldescent/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kldescent {

/// Relative slack applied to value-scale framework inequalities.
inline constexpr double kValueSlack = 1e-10;
/// Absolute slack on path-length inequalities.
inline constexpr double kPathSlack = 1e-10;
/// Negative Gamma radicands above this are rounding, below it a violation.
inline constexpr double kRadicandClip = -1e-12;

/// Trace quantities in framework form.
struct FrameworkView {
  std::vector<double> phi;   // Phi(x^k), k = 0..K
  std::vector<double> step;  // d_k, step[0] = 0
  std::vector<std::int64_t> ell;
  /// 1e-10 * (1 + max |Phi|)
  double value_slack = kValueSlack;

  std::int64_t last() const { return static_cast<std::int64_t>(phi.size()) - 1; }
};

inline FrameworkView framework_view(const Trace& trace) {
  FrameworkView v;
  const std::size_t n = trace.rows.size();
  v.phi.resize(n);
  v.step.resize(n);
  v.ell.resize(n);
  double scale = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = trace.rows[k];
    v.phi[k] = trace.meta.phi_column == PhiColumn::F ? r.F : r.merit;
    v.ell[k] = r.ell;
    if (std::isfinite(v.phi[k])) scale = std::max(scale, std::abs(v.phi[k]));
    if (k == 0) {
      v.step[k] = 0.0;
    } else if (trace.meta.step_block == StepBlock::x) {
      v.step[k] = r.step_norm;
    } else {
      const double prev = k >= 2 ? trace.rows[k - 1].step_norm : 0.0;
      v.step[k] = std::sqrt(r.step_norm * r.step_norm + prev * prev);
    }
  }
  v.value_slack = kValueSlack * (1.0 + scale);
  return v;
}

/// Structural checks: ell(k) in [[k-m]_+, k], contiguous k, and step_norm
/// consistent with the stored iterates.
inline std::vector<std::string> validate_trace(const Trace& trace) {
  std::vector<std::string> issues;
  const int m = trace.meta.m;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const auto& r = trace.rows[i];
    const auto k = static_cast<std::int64_t>(i);
    if (r.k != k) issues.push_back("row " + std::to_string(i) + ": k=" + std::to_string(r.k));
    if (r.ell < std::max<std::int64_t>(0, k - m) || r.ell > k)
      issues.push_back("row " + std::to_string(i) + ": ell=" + std::to_string(r.ell) + " outside [[k-m]_+, k]");
    if (i > 0 && r.x.size() > 0 && trace.rows[i - 1].x.size() == r.x.size()) {
      const double actual = (r.x - trace.rows[i - 1].x).norm();
      if (std::abs(actual - r.step_norm) > 1e-12 * (1.0 + actual))
        issues.push_back("row " + std::to_string(i) + ": step_norm inconsistent with iterates");
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Xi / Gamma series

struct XiGamma {
  std::vector<double> xi;     // Xi_k, k = 0..K
  std::vector<double> gamma;  // Gamma_k, k = 0..K-1
};

/// Xi_k = d_{ell(k)}, Gamma_k = sqrt(Phi(x^{ell(k)}) - Phi(x^{ell(k+1)})).
inline XiGamma xi_gamma(const Trace& trace) {
  if (trace.rows.size() < 2) throw InsufficientTrace("xi_gamma: need at least 2 rows");
  const FrameworkView v = framework_view(trace);
  const auto K = v.last();
  XiGamma out;
  out.xi.resize(static_cast<std::size_t>(K + 1));
  out.gamma.resize(static_cast<std::size_t>(K));
  for (std::int64_t k = 0; k <= K; ++k) {
    const auto l = v.ell[k];
    if (l < 0 || l > k) throw FrameworkViolation("xi_gamma: invalid ell at k=" + std::to_string(k));
    out.xi[k] = v.step[l];
  }
  for (std::int64_t k = 0; k < K; ++k) {
    double radicand = v.phi[v.ell[k]] - v.phi[v.ell[k + 1]];
    if (radicand < 0.0) {
      if (radicand < kRadicandClip)
        throw FrameworkViolation("xi_gamma: Phi(x^ell(k)) increases at k=" + std::to_string(k) + " by " +
                                 std::to_string(-radicand));
      radicand = 0.0;
    }
    out.gamma[k] = std::sqrt(radicand);
  }
  return out;
}

struct SeriesSummary {
  double xi_sum = 0.0;
  double gamma_sum = 0.0;
  double xi_tail_sum = 0.0;
  double gamma_tail_sum = 0.0;
  double xi_tail_max = 0.0;
  double gamma_tail_max = 0.0;
  /// Informational: both tail maxima below 1e-6. Depends on the solver
  /// tolerance because Xi_k points back up to m steps.
  bool tail_max_small = true;
  /// The summability check only applies to tolerance-terminated traces.
  bool applicable = false;
  bool pass = true;
  std::string error;
};

/// Partial sums from k = 1 and their last-decile tails.
inline SeriesSummary summarize_series(const XiGamma& s, bool applicable) {
  SeriesSummary out;
  out.applicable = applicable;
  auto tally = [](const std::vector<double>& v, double& sum, double& tail_sum, double& tail_max) {
    if (v.size() <= 1) return;
    const std::size_t count = v.size() - 1;
    const std::size_t tail = std::max<std::size_t>(1, count / 10);
    for (std::size_t k = 1; k < v.size(); ++k) {
      sum += v[k];
      if (k >= v.size() - tail) {
        tail_sum += v[k];
        tail_max = std::max(tail_max, v[k]);
      }
    }
  };
  tally(s.xi, out.xi_sum, out.xi_tail_sum, out.xi_tail_max);
  tally(s.gamma, out.gamma_sum, out.gamma_tail_sum, out.gamma_tail_max);
  out.tail_max_small = out.xi_tail_max <= 1e-6 && out.gamma_tail_max <= 1e-6;
  if (applicable) out.pass = out.xi_tail_sum <= 0.01 * out.xi_sum && out.gamma_tail_sum <= 0.01 * out.gamma_sum;
  return out;
}

// ---------------------------------------------------------------------------
// H1

struct H1Audit {
  double a = 0.0;
  double max_violation = -kInfinity;
  std::int64_t worst_k = -1;
  double slack = 0.0;
  bool pass = true;
};

/// v_k = Phi(x^{k+1}) + a d_{k+1}^2 - Phi(x^{ell(k)}).
inline H1Audit check_h1(const Trace& trace, double a) {
  require_positive(a, "check_h1: a");
  const FrameworkView v = framework_view(trace);
  H1Audit out;
  out.a = a;
  out.slack = v.value_slack;
  for (std::int64_t k = 0; k < v.last(); ++k) {
    const double viol = v.phi[k + 1] + a * v.step[k + 1] * v.step[k + 1] - v.phi[v.ell[k]];
    const double val = std::isnan(viol) ? kInfinity : viol;
    if (val > out.max_violation) {
      out.max_violation = val;
      out.worst_k = k;
    }
  }
  if (v.last() < 1) out.max_violation = 0.0;
  out.pass = out.max_violation <= out.slack;
  return out;
}

// ---------------------------------------------------------------------------
// H3

struct H3Audit {
  bool applicable = false;
  double lipschitz = 0.0;
  double sandwich_max_violation = 0.0;
  std::int64_t worst_k = -1;
  double b_hat = 0.0;
  double b_cap = 0.0;
  double gamma_star = 0.0;
  bool pass = true;
};

inline double max_observed_gamma(const Trace& trace) {
  double g = 0.0;
  for (const auto& r : trace.rows) g = std::max(g, r.gamma);
  return g;
}

/// Phi(x^{k+1}) <= Theta(z^{k+1}) <= Phi(x^{ell(k)}) + (L_f/2) d_{k+1}^2 and
/// the residual-to-step ratio b_hat against its theoretical cap. Theta comes
/// from the merit column, or is recomputed with theta_dc when a problem is
/// given and the rows carry xi.
inline H3Audit check_h3(const Trace& trace, double lipschitz, const CompositeProblem* problem = nullptr) {
  require_positive(lipschitz, "check_h3: L_f");
  const FrameworkView v = framework_view(trace);
  H3Audit out;
  out.applicable = true;
  out.lipschitz = lipschitz;
  out.gamma_star = max_observed_gamma(trace);
  const auto K = v.last();
  const bool recompute = problem != nullptr && !trace.rows.empty() && trace.rows.front().xi.has_value();
  double worst = -kInfinity;
  for (std::int64_t k = 0; k < K; ++k) {
    const double theta = recompute ? theta_dc(trace.rows[k], trace.rows[k + 1], *problem) : trace.rows[k + 1].merit;
    const double lower = v.phi[k + 1] - theta;
    const double upper = theta - v.phi[v.ell[k]] - 0.5 * lipschitz * v.step[k + 1] * v.step[k + 1];
    const double viol = std::max(lower, upper);
    if (viol > worst) {
      worst = viol;
      out.worst_k = k;
    }
  }
  out.sandwich_max_violation = K >= 1 ? worst : 0.0;

  // The dC/dF_delta bound is stated in ||x^k - x^{k-1}|| for the DC solver and in
  // ||z^k - z^{k-1}|| for the extrapolated one, whatever block H1 uses.
  const bool extrapolated = trace.meta.algorithm == "pgenls" || trace.meta.algorithm == "pgnls";
  for (std::int64_t k = 1; k <= K; ++k) {
    const double s = trace.rows[k].step_norm;
    const double sp = k >= 2 ? trace.rows[k - 1].step_norm : 0.0;
    const double denom = extrapolated ? std::sqrt(s * s + sp * sp) : s;
    const double res = trace.rows[k].residual;
    if (denom > 0.0 && std::isfinite(res)) out.b_hat = std::max(out.b_hat, res / denom);
  }
  out.b_cap = extrapolated ? std::sqrt(2.0) * (lipschitz + out.gamma_star + 2.0 * trace.meta.delta)
                           : 1.0 + lipschitz + out.gamma_star;
  out.pass = out.sandwich_max_violation <= v.value_slack && out.b_hat <= out.b_cap;
  return out;
}

// ---------------------------------------------------------------------------
// H4 via the bounded-increase route

struct BbarEstimate {
  double b_bar = 0.0;
  std::int64_t worst_k = -1;
  /// Every step was zero; b_bar = 0 is a notice, not an estimate.
  bool degenerate = false;
};

/// Increases of Phi below this (relative to |Phi|) are treated as rounding in b_bar.
inline constexpr double kIncreaseFloor = 1e-13;

/// b_bar = max(0, max_k 2 (Phi(x^{k+1}) - Phi(x^k) - eta_k) / d_{k+1}^2) over nonzero
/// steps, eta_k = 1e-13 (1 + max(|Phi(x^k)|, |Phi(x^{k+1})|)). Without eta_k one-ulp
/// jitter of Phi over a tiny final step dominates the maximum.
inline BbarEstimate estimate_bbar(const Trace& trace) {
  if (trace.rows.size() < 2) throw InsufficientTrace("estimate_bbar: need at least 2 rows");
  const FrameworkView v = framework_view(trace);
  BbarEstimate out;
  bool any = false;
  for (std::int64_t k = 0; k < v.last(); ++k) {
    const double d = v.step[k + 1];
    if (!(d > 0.0)) continue;
    any = true;
    const double eta = kIncreaseFloor * (1.0 + std::max(std::abs(v.phi[k]), std::abs(v.phi[k + 1])));
    const double ratio = 2.0 * (v.phi[k + 1] - v.phi[k] - eta) / (d * d);
    if (ratio > out.b_bar) {
      out.b_bar = ratio;
      out.worst_k = k;
    }
  }
  out.degenerate = !any;
  return out;
}

struct H4Audit {
  double tau = 0.5;
  double mu = 0.0;
  std::int64_t k_bar = 0;
  double a = 0.0;
  double max_violation = 0.0;
  std::int64_t worst_k = -1;
  std::int64_t worst_i = -1;
  std::int64_t checked = 0;  // number of (k, i) pairs
  bool vacuous = true;
  double slack = 0.0;
  bool pass = true;
};

/// For k >= k_bar and ell(k-1)+1 <= i <= ell(k)-1:
///   sqrt(Phi(x^{ell(k)}) - Phi(x^i)) <= tau sqrt(a) d_i + mu sum_{j=i+1}^{ell(k)} d_j,
/// checked in squared form so the slack lives on the value scale.
inline H4Audit check_h4(const Trace& trace, double tau, double mu, std::int64_t k_bar, double a) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("check_h4: tau must lie in (0,1)");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidInput("check_h4: mu must be a nonnegative number");
  require_positive(a, "check_h4: a");
  if (k_bar <= trace.meta.m) throw InvalidInput("check_h4: k_bar must exceed m");
  const FrameworkView v = framework_view(trace);
  H4Audit out;
  out.tau = tau;
  out.mu = mu;
  out.k_bar = k_bar;
  out.a = a;
  out.slack = v.value_slack;
  const auto K = v.last();
  std::vector<double> prefix(v.step.size() + 1, 0.0);  // prefix[i] = d_0 + ... + d_{i-1}
  for (std::size_t i = 0; i < v.step.size(); ++i) prefix[i + 1] = prefix[i] + v.step[i];
  double worst = -kInfinity;
  for (std::int64_t k = k_bar; k <= K; ++k) {
    const auto lk = v.ell[k];
    for (std::int64_t i = v.ell[k - 1] + 1; i <= lk - 1; ++i) {
      const double gap = v.phi[lk] - v.phi[i];
      const double tail = prefix[lk + 1] - prefix[i + 1];  // d_{i+1} + ... + d_{ell(k)}
      const double rhs = tau * std::sqrt(a) * v.step[i] + mu * tail;
      const double viol = gap - rhs * rhs;
      ++out.checked;
      if (viol > worst) {
        worst = viol;
        out.worst_k = k;
        out.worst_i = i;
      }
    }
  }
  out.vacuous = out.checked == 0;
  out.max_violation = out.vacuous ? 0.0 : worst;
  out.pass = out.max_violation <= out.slack;
  return out;
}

// ---------------------------------------------------------------------------
// Path-length bound

/// c(mu, tau, a, m) = (m+1)(1+mubar)^{m-1} max{1/(sqrt(a)(1-tau)), (1+mubar)^{-(m-1)} + mubar},
/// mubar = mu / (sqrt(a)(1-tau)).
inline double c_constant(double mu, double tau, double a, int m) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("c_constant: tau must lie in (0,1)");
  if (!(mu >= 0.0)) throw InvalidInput("c_constant: mu must be >= 0");
  require_positive(a, "c_constant: a");
  if (m < 0) throw InvalidInput("c_constant: m must be >= 0");
  const double base = 1.0 / (std::sqrt(a) * (1.0 - tau));
  const double mubar = mu * base;
  const double growth = std::pow(1.0 + mubar, m - 1);
  return (m + 1) * growth * std::max(base, 1.0 / growth + mubar);
}

struct PropBoundAudit {
  double c = 0.0;
  double max_violation = 0.0;
  std::int64_t worst_k = -1;
  std::int64_t checked = 0;
  bool pass = true;
};

/// For k >= k_bar:
///   sum_{j=ell(k-1)}^{ell(k)-1} d_{j+1} <= c [ sum_{j=k-m-1}^{k-1} Gamma_j + Xi_k ].
inline PropBoundAudit check_prop_bound(const Trace& trace, double mu, double tau, double a, int m,
                                       std::int64_t k_bar) {
  if (k_bar <= m) throw InvalidInput("check_prop_bound: k_bar must exceed m");
  const double c = c_constant(mu, tau, a, m);
  const FrameworkView v = framework_view(trace);
  const XiGamma s = xi_gamma(trace);
  PropBoundAudit out;
  out.c = c;
  const auto K = v.last();
  std::vector<double> prefix(v.step.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.step.size(); ++i) prefix[i + 1] = prefix[i] + v.step[i];
  double worst = -kInfinity;
  for (std::int64_t k = k_bar; k <= K; ++k) {
    const auto lo = v.ell[k - 1];
    const auto hi = v.ell[k];
    const double lhs = hi > lo ? prefix[hi + 1] - prefix[lo + 1] : 0.0;  // d_{lo+1} + ... + d_{hi}
    double gsum = 0.0;
    for (std::int64_t j = k - m - 1; j <= k - 1; ++j) gsum += s.gamma[j];
    const double rhs = std::isinf(c) ? kInfinity : c * (gsum + s.xi[k]);
    const double viol = lhs - rhs;
    ++out.checked;
    if (viol > worst) {
      worst = viol;
      out.worst_k = k;
    }
  }
  out.max_violation = out.checked > 0 ? worst : 0.0;
  out.pass = out.max_violation <= kPathSlack;
  return out;
}

// ---------------------------------------------------------------------------
// Rate fitting

enum class RateVerdict { finite_termination, linear, sublinear, inconclusive };

inline const char* to_string(RateVerdict v) {
  switch (v) {
    case RateVerdict::finite_termination: return "finite-termination";
    case RateVerdict::linear: return "linear";
    case RateVerdict::sublinear: return "sublinear";
    case RateVerdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

struct RateOptions {
  /// Reference point x-bar; the final iterate when unset.
  std::optional<Vector> reference;
  /// Explicit fit window in k; otherwise the first drop_fraction of the trace is skipped.
  std::optional<std::int64_t> k_min;
  std::optional<std::int64_t> k_max;
  double drop_fraction = 0.2;
  double floor = 1e-13;
  /// The power model must beat the linear one by this much R^2.
  double r2_margin = 0.02;
  double min_r2_linear = 0.9;
  std::size_t min_points = 10;
};

struct RateReport {
  RateVerdict verdict = RateVerdict::inconclusive;
  double rho = kNaN;
  double r2_linear = kNaN;
  double slope = kNaN;
  double r2_power = kNaN;
  double theta = kNaN;
  std::size_t points = 0;
  std::int64_t k_first = -1;
  std::int64_t k_last = -1;
  std::int64_t finite_k = -1;
  std::string reference = "final";
  std::string note;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LineFit least_squares_line(const std::vector<double>& t, const std::vector<double>& y) {
  const auto n = static_cast<double>(t.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = stt > 0.0 ? sty / stt : 0.0;
  f.intercept = my - f.slope * mt;
  double sse = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * t[i]);
    sse += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

/// theta from the power-law exponent s = (1 - theta)/(1 - 2 theta).
inline double theta_from_slope(double s) { return (1.0 - s) / (1.0 - 2.0 * s); }

inline RateReport fit_rate(const Trace& trace, const RateOptions& opt = {}) {
  RateReport out;
  if (trace.rows.empty()) {
    out.note = "empty trace";
    return out;
  }
  const Vector xbar = opt.reference ? *opt.reference : trace.rows.back().x;
  out.reference = opt.reference ? "given" : "final";
  const auto n = static_cast<std::int64_t>(trace.rows.size());
  std::vector<double> e(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    if (trace.rows[k].x.size() != xbar.size()) {
      out.note = "iterates unavailable";
      return out;
    }
    e[k] = (trace.rows[k].x - xbar).norm();
  }

  std::int64_t end = n - 1;
  while (end >= 0 && !(e[end] > opt.floor)) --end;
  const std::int64_t zero_run = n - 1 - end;
  if (zero_run >= 2) {
    out.verdict = RateVerdict::finite_termination;
    out.finite_k = end + 1;
    return out;
  }
  if (!trace.tolerance_terminated() && n < 100) {
    out.note = "trace neither tolerance-terminated nor long enough";
    return out;
  }
  std::int64_t start = end;
  while (start > 0 && e[start - 1] > opt.floor) --start;
  std::int64_t lo = std::max<std::int64_t>(start, static_cast<std::int64_t>(std::ceil(opt.drop_fraction * (n - 1))));
  std::int64_t hi = end;
  if (opt.k_min) lo = std::max(start, *opt.k_min);
  if (opt.k_max) hi = std::min(end, *opt.k_max);
  lo = std::max<std::int64_t>(lo, 1);

  std::vector<double> ks, logks, loges;
  for (std::int64_t k = lo; k <= hi; ++k) {
    ks.push_back(static_cast<double>(k));
    logks.push_back(std::log(static_cast<double>(k)));
    loges.push_back(std::log(e[k]));
  }
  out.points = ks.size();
  if (out.points < opt.min_points) {
    out.note = "fewer than " + std::to_string(opt.min_points) + " usable points";
    return out;
  }
  out.k_first = lo;
  out.k_last = hi;
  const LineFit lin = least_squares_line(ks, loges);
  const LineFit pow = least_squares_line(logks, loges);
  out.rho = std::exp(lin.slope);
  out.r2_linear = lin.r2;
  out.slope = pow.slope;
  out.r2_power = pow.r2;
  if (pow.r2 >= lin.r2 + opt.r2_margin && pow.slope < 0.0) {
    out.verdict = RateVerdict::sublinear;
    out.theta = theta_from_slope(pow.slope);
  } else if (lin.slope < 0.0 && lin.r2 >= opt.min_r2_linear) {
    out.verdict = RateVerdict::linear;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full audit

struct AuditOptions {
  double tau = 0.5;
  std::optional<double> mu;
  std::optional<std::int64_t> k_bar;
  std::optional<double> a;
  std::optional<double> lipschitz;
  const CompositeProblem* problem = nullptr;
  RateOptions rate;
};

struct DiagnosticsReport {
  std::string algorithm;
  std::string problem_id;
  std::int64_t iterations = 0;
  std::string terminated_by;
  double final_F = kNaN;
  std::vector<std::string> trace_issues;
  std::vector<std::string> warnings;
  std::vector<std::string> failures;

  H1Audit h1;
  H3Audit h3;
  BbarEstimate bbar;
  H4Audit h4;
  XiGamma series_values;
  SeriesSummary series;
  PropBoundAudit prop_bound;
  RateReport rate;
  std::string lipschitz_source = "none";

  bool pass() const { return failures.empty(); }
};

inline DiagnosticsReport audit(const Trace& trace, const AuditOptions& opt = {}) {
  if (trace.rows.size() < 2) throw InsufficientTrace("audit: need at least 2 rows");
  DiagnosticsReport rep;
  rep.algorithm = trace.meta.algorithm;
  rep.problem_id = trace.meta.problem_id;
  rep.iterations = static_cast<std::int64_t>(trace.rows.size()) - 1;
  rep.terminated_by = trace.meta.terminated_by;
  rep.final_F = trace.rows.back().F;
  rep.warnings = trace.meta.warnings;
  rep.trace_issues = validate_trace(trace);
  if (!rep.trace_issues.empty()) rep.failures.push_back("trace");

  const double a = opt.a.value_or(trace.meta.h1_constant);
  const int m = trace.meta.m;
  rep.h1 = check_h1(trace, a);
  if (!rep.h1.pass) rep.failures.push_back("h1");

  std::optional<double> lipschitz = opt.lipschitz ? opt.lipschitz : trace.meta.lipschitz;
  rep.lipschitz_source = opt.lipschitz ? "override" : trace.meta.lipschitz_source;
  if (lipschitz && *lipschitz > 0.0) {
    rep.h3 = check_h3(trace, *lipschitz, opt.problem);
    if (!rep.h3.pass) rep.failures.push_back("h3");
  }
  rep.h3.gamma_star = max_observed_gamma(trace);

  rep.bbar = estimate_bbar(trace);
  const double mu = opt.mu.value_or(std::sqrt(rep.bbar.b_bar / 2.0));
  const std::int64_t k_bar = opt.k_bar.value_or(m + 2);
  rep.h4 = check_h4(trace, opt.tau, mu, k_bar, a);
  if (!rep.h4.pass) rep.failures.push_back("h4");

  try {
    rep.series_values = xi_gamma(trace);
    rep.series = summarize_series(rep.series_values, trace.tolerance_terminated());
    if (!rep.series.pass) rep.failures.push_back("series");
    rep.prop_bound = check_prop_bound(trace, mu, opt.tau, a, m, k_bar);
    if (!rep.prop_bound.pass) rep.failures.push_back("prop_bound");
  } catch (const FrameworkViolation& e) {
    rep.series.pass = false;
    rep.series.error = e.what();
    rep.prop_bound.pass = false;
    rep.failures.push_back("xi_gamma");
  }

  RateOptions ro = opt.rate;
  if (!ro.reference && trace.meta.rate_reference) ro.reference = trace.meta.rate_reference;
  rep.rate = fit_rate(trace, ro);
  return rep;
}

}  // namespace kldescent
