#pragma once

// Nonmonotone proximal gradient with majorization for F = f + g - h.
//
// Each outer iteration linearizes f and -h at x^k (with xi^k = -s, s in dh(x^k)),
// solves the prox subproblem for an increasing sequence gamma_{k,j} = rho^j gamma_{k,0}
// and accepts the first trial with
//
//   F(x^{k,j}) <= max_{[k-m]_+ <= i <= k} F(x^i) - ((alpha delta gamma_{k,j} + (1-alpha) c)/2) ||x^{k,j} - x^k||^2.

#include "kldescent/core.hpp"
#include "kldescent/gll_memory.hpp"
#include "kldescent/oracles.hpp"
#include "kldescent/trace.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace kldescent {

enum class GammaInit { constant, spectral };

struct NpgConfig {
  int m = 5;
  double gamma_min = 1e-6;
  double gamma_max = 1e8;
  double rho = 2.0;
  double delta = 0.5;
  double alpha = 0.0;
  double c = 1e-4;
  int max_outer = 10000;
  int max_inner = 60;
  double tol_step = 1e-8;
  double tol_resid = 1e-8;
  GammaInit gamma_init = GammaInit::spectral;

  void validate() const {
    if (m < 0) throw InvalidInput("npg: m must be >= 0");
    if (!(gamma_min > 0.0) || !(gamma_min <= gamma_max) || !std::isfinite(gamma_max))
      throw InvalidInput("npg: need 0 < gamma_min <= gamma_max < inf");
    if (!(rho > 1.0)) throw InvalidInput("npg: rho must be > 1");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("npg: delta must lie in (0,1)");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("npg: alpha must lie in [0,1]");
    if (!(c > 0.0)) throw InvalidInput("npg: c must be > 0");
    if (max_outer < 1 || max_inner < 1) throw InvalidInput("npg: iteration caps must be positive");
    if (!(tol_step > 0.0) || !(tol_resid > 0.0)) throw InvalidInput("npg: tolerances must be positive");
  }

  /// Coefficient of ||x^{k,j} - x^k||^2 in the acceptance test.
  double decrement_coefficient(double gamma) const { return 0.5 * (alpha * delta * gamma + (1.0 - alpha) * c); }

  /// H1 constant a = (alpha delta gamma_min + (1 - alpha) c) / 2.
  double h1_constant() const { return decrement_coefficient(gamma_min); }
};

struct NpgState {
  std::int64_t k = 0;
  Vector x_curr;
  Vector x_prev;
  Vector grad_curr;
  Vector grad_prev;
  /// xi^{k-1}; z^k = (x^k, xi^{k-1}).
  Vector xi_prev;
  MemoryWindow window{0};
  double gamma_prev = 0.0;
};

struct StepResult {
  Vector x_next;
  /// Extrapolation point of the accepted trial (extrapolated solver only).
  Vector y;
  Vector grad_y;
  double gamma = 0.0;
  double beta = 0.0;
  int j = 0;
  Vector xi;
  double decrement = 0.0;
  double merit_next = 0.0;  // merit the window compared against
  double F_next = 0.0;
  double window_max = 0.0;
  /// (gamma_{k,j}, beta_{k,j}) for every trial, accepted one last.
  std::vector<std::pair<double, double>> trials;
  /// No trial accepted: a rejected trial was already below the step tolerance
  /// and within rounding of the current merit. x_next is unset.
  bool stalled = false;
};

/// Merit differences below this (relative to |merit|) are rounding noise.
inline constexpr double kMeritNoise = 1e-12;

namespace detail {

/// The acceptance test is decided by rounding once both the step and the
/// merit change sit at the floating-point floor.
inline bool at_fp_floor(double trial_merit, double current_merit, double step, double step_tol) {
  return step <= step_tol && trial_merit <= current_merit + kMeritNoise * (1.0 + std::abs(current_merit));
}

}  // namespace detail

inline NpgState npg_initial_state(const CompositeProblem& p, const Vector& x0, const NpgConfig& cfg) {
  p.check_dimension(x0);
  require_finite(x0, "npg: x0");
  const double F0 = p.objective(x0);
  if (!std::isfinite(F0)) throw InvalidInput("npg: x0 is not in dom g");
  NpgState s;
  s.k = 0;
  s.x_curr = x0;
  s.x_prev = x0;
  s.grad_curr = p.f().gradient(x0);
  s.grad_prev = s.grad_curr;
  s.xi_prev = Vector::Zero(x0.size());
  s.window = MemoryWindow(cfg.m);
  s.window.push(0, F0);
  return s;
}

namespace detail {

inline double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

/// Barzilai-Borwein curvature <dx, dg>/<dx, dx>, or nullopt when undefined.
inline std::optional<double> bb_ratio(const Vector& x, const Vector& x_prev, const Vector& g, const Vector& g_prev) {
  const Vector dx = x - x_prev;
  const double dxx = dx.squaredNorm();
  if (dxx == 0.0) return std::nullopt;
  const double r = dx.dot(g - g_prev) / dxx;
  if (!(r > 0.0) || !std::isfinite(r)) return std::nullopt;
  return r;
}

inline double initial_gamma(GammaInit rule, std::int64_t k, const Vector& x, const Vector& x_prev, const Vector& g,
                            const Vector& g_prev, const std::optional<double>& hint, double gamma_min,
                            double gamma_max) {
  if (rule == GammaInit::constant) return gamma_min;
  if (k == 0) return clip(hint.value_or(gamma_min), gamma_min, gamma_max);
  const auto bb = bb_ratio(x, x_prev, g, g_prev);
  return bb ? clip(*bb, gamma_min, gamma_max) : gamma_min;
}

}  // namespace detail

inline StepResult npg_step(const CompositeProblem& p, const NpgState& s, const NpgConfig& cfg) {
  if (s.window.empty()) throw LogicError("npg_step: empty window");
  const Vector& x = s.x_curr;
  StepResult r;
  r.xi = p.xi(x);
  r.window_max = s.window.max().value;
  const Vector shifted = s.grad_curr + r.xi;
  const double current = s.window.entries().back().value;
  const double step_tol = cfg.tol_step * (1.0 + x.norm());
  double gamma = detail::initial_gamma(cfg.gamma_init, s.k, x, s.x_prev, s.grad_curr, s.grad_prev,
                                       p.f().lipschitz_hint, cfg.gamma_min, cfg.gamma_max);
  Vector cand;
  for (int j = 0; j < cfg.max_inner; ++j) {
    r.trials.emplace_back(gamma, 0.0);
    cand = p.g().prox(x - shifted / gamma, gamma);
    const double gval = p.g().value(cand);
    if (gval == kInfinity) throw OracleInconsistency("npg_step: prox returned a point outside dom g");
    const double Fc = p.f().value(cand) + gval - p.h_value(cand);
    const double step_sq = (cand - x).squaredNorm();
    const double dec = cfg.decrement_coefficient(gamma) * step_sq;
    if (!std::isnan(Fc) && s.window.accept(Fc, dec)) {
      r.x_next = std::move(cand);
      r.gamma = gamma;
      r.j = j;
      r.decrement = dec;
      r.F_next = Fc;
      r.merit_next = Fc;
      return r;
    }
    if (!std::isnan(Fc) && detail::at_fp_floor(Fc, current, std::sqrt(step_sq), step_tol)) {
      r.stalled = true;
      r.gamma = gamma;
      r.j = j;
      return r;
    }
    gamma *= cfg.rho;
  }
  throw BacktrackingFailure("npg_step: no acceptable trial within " + std::to_string(cfg.max_inner) + " trials",
                            cand, gamma / cfg.rho, cfg.max_inner);
}

/// Norm of (grad f(x^k) - grad f(x^{k-1}) - gamma_{k-1}(x^k - x^{k-1}), x^k - x^{k-1}),
/// an element of dTheta(z^k).
inline double dc_residual(const Vector& grad_curr, const Vector& grad_prev, const Vector& x_curr,
                          const Vector& x_prev, double gamma_prev) {
  const Vector dx = x_curr - x_prev;
  const Vector first = grad_curr - grad_prev - gamma_prev * dx;
  return std::sqrt(first.squaredNorm() + dx.squaredNorm());
}

inline double dc_residual(const CompositeProblem& p, const Vector& x_curr, const Vector& x_prev, double gamma_prev) {
  return dc_residual(p.f().gradient(x_curr), p.f().gradient(x_prev), x_curr, x_prev, gamma_prev);
}

/// Theta(z^{k+1}) = f(x^{k+1}) + g(x^{k+1}) - h(x^k) + <xi^k, x^{k+1} - x^k>.
/// Exact because -xi^k is a subgradient of h at x^k (Fenchel equality).
inline double theta_dc(const CompositeProblem& p, const Vector& x_next, const Vector& x_curr, const Vector& xi_curr) {
  return p.f().value(x_next) + p.g().value(x_next) - p.h_value(x_curr) + xi_curr.dot(x_next - x_curr);
}

inline double theta_dc(const IterateRecord& curr, const IterateRecord& next, const CompositeProblem& p) {
  if (!curr.xi) throw InsufficientTrace("theta_dc: row " + std::to_string(curr.k) + " carries no xi");
  return theta_dc(p, next.x, curr.x, *curr.xi);
}

inline Trace npg_solve(const CompositeProblem& p, const Vector& x0, const NpgConfig& cfg) {
  cfg.validate();
  NpgState s = npg_initial_state(p, x0, cfg);

  Trace trace;
  trace.meta.algorithm = "npg_major";
  trace.meta.problem_id = p.id();
  trace.meta.m = cfg.m;
  trace.meta.h1_constant = cfg.h1_constant();
  trace.meta.step_block = StepBlock::x;
  trace.meta.phi_column = PhiColumn::F;

  IterateRecord row0;
  row0.k = 0;
  row0.x = x0;
  row0.F = s.window.max().value;
  row0.merit = row0.F;
  row0.ell = 0;
  trace.rows.push_back(std::move(row0));

  double lipschitz_seen = 0.0;
  for (int it = 0; it < cfg.max_outer; ++it) {
    StepResult step;
    try {
      step = npg_step(p, s, cfg);
    } catch (const Error& e) {
      throw SolverError("npg_major iteration " + std::to_string(s.k) + ": " + e.what(), static_cast<int>(s.k));
    }
    trace.rows.back().xi = step.xi;
    if (step.stalled) {
      trace.meta.terminated_by = "fp_floor";
      break;
    }

    const Vector grad_next = p.f().gradient(step.x_next);
    const double step_norm = (step.x_next - s.x_curr).norm();
    const double residual = dc_residual(grad_next, s.grad_curr, step.x_next, s.x_curr, step.gamma);
    if (step_norm > 0.0) lipschitz_seen = std::max(lipschitz_seen, (grad_next - s.grad_curr).norm() / step_norm);

    IterateRecord row;
    row.k = s.k + 1;
    row.x = step.x_next;
    row.F = step.F_next;
    row.merit = theta_dc(p, step.x_next, s.x_curr, step.xi);
    row.gamma = step.gamma;
    row.j_inner = step.j;
    row.step_norm = step_norm;
    row.residual = residual;

    const double x_norm = s.x_curr.norm();
    s.window.push(row.k, row.F);
    row.ell = s.window.max().ell;
    s.x_prev = std::move(s.x_curr);
    s.x_curr = step.x_next;
    s.grad_prev = std::move(s.grad_curr);
    s.grad_curr = grad_next;
    s.xi_prev = step.xi;
    s.gamma_prev = step.gamma;
    s.k = row.k;
    trace.rows.push_back(std::move(row));

    if (step_norm == 0.0) {
      trace.meta.terminated_by = "stationary";
      break;
    }
    if (step_norm <= cfg.tol_step * (1.0 + x_norm) && residual <= cfg.tol_resid) {
      trace.meta.terminated_by = "tolerance";
      break;
    }
  }
  if (!trace.rows.back().xi) trace.rows.back().xi = p.xi(s.x_curr);

  if (p.f().lipschitz_hint) {
    trace.meta.lipschitz = *p.f().lipschitz_hint;
    trace.meta.lipschitz_source = "hint";
  } else if (lipschitz_seen > 0.0) {
    trace.meta.lipschitz = lipschitz_seen;
    trace.meta.lipschitz_source = "estimated";
  }
  if (p.known_minimizer()) trace.meta.rate_reference = *p.known_minimizer();
  return trace;
}

}  // namespace kldescent
