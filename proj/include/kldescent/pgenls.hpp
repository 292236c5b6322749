#pragma once

// Nonmonotone line-search proximal gradient with extrapolation for F = f + g.
//
// Trials use y^{k,j} = x^k + beta_{k,j}(x^k - x^{k-1}) with beta shrinking by nu and
// gamma growing by rho; acceptance is a GLL test on the merit
//
//   F_delta(x, u) = F(x) + (delta/2) ||x - u||^2.
//
// delta = 0 and beta_max = 0 give the plain nonmonotone line-search PG method.

#include "kldescent/core.hpp"
#include "kldescent/gll_memory.hpp"
#include "kldescent/npg_major.hpp"
#include "kldescent/oracles.hpp"
#include "kldescent/trace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kldescent {

enum class BetaInit { constant, nesterov };

struct PgenlsConfig {
  int m = 5;
  double delta = 1.0;
  double alpha = 1e-4;
  double gamma_min = 1e-6;
  double gamma_max = 1e8;
  double beta_max = 0.9;
  double rho = 2.0;
  double nu = 0.4;
  int max_outer = 10000;
  int max_inner = 60;
  double tol_step = 1e-8;
  double tol_resid = 1e-8;
  GammaInit gamma_init = GammaInit::spectral;
  BetaInit beta_init = BetaInit::constant;

  void validate() const {
    if (m < 0) throw InvalidInput("pgenls: m must be >= 0");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw InvalidInput("pgenls: delta must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("pgenls: alpha must lie in (0,1)");
    if (!(gamma_min > 0.0) || !(gamma_min <= gamma_max) || !std::isfinite(gamma_max))
      throw InvalidInput("pgenls: need 0 < gamma_min <= gamma_max < inf");
    if (!(beta_max >= 0.0 && beta_max <= 1.0)) throw InvalidInput("pgenls: beta_max must lie in [0,1]");
    if (!(rho > 1.0)) throw InvalidInput("pgenls: rho must be > 1");
    if (!(nu > 0.0) || !(nu * rho < 1.0)) throw InvalidInput("pgenls: nu must lie in (0, 1/rho)");
    if (max_outer < 1 || max_inner < 1) throw InvalidInput("pgenls: iteration caps must be positive");
    if (!(tol_step > 0.0) || !(tol_resid > 0.0)) throw InvalidInput("pgenls: tolerances must be positive");
  }

  /// Extrapolation without the proximal term in the merit: the H1 constant
  /// (alpha/2) min{gamma_min, delta} vanishes.
  bool degenerate_merit() const { return delta == 0.0 && beta_max > 0.0; }

  /// H1 constant for the audit and the step block it refers to. With delta = 0
  /// the guarantee only covers the x-block.
  double h1_constant() const {
    return delta > 0.0 ? 0.5 * alpha * std::min(gamma_min, delta) : 0.5 * alpha * gamma_min;
  }

  StepBlock step_block() const { return delta > 0.0 ? StepBlock::z : StepBlock::x; }
};

/// z^k = (x^k, x^{k-1}) plus what the next step needs.
struct AugmentedState {
  std::int64_t k = 0;
  Vector x;
  Vector u;
  Vector grad_x;
  Vector grad_u;
  MemoryWindow window{0};
  double gamma_prev = 0.0;
  double beta_prev = 0.0;
  Vector y_prev;
  Vector grad_y_prev;
  // Nesterov momentum sequence t_{k-1}, t_k.
  double t_prev = 1.0;
  double t_curr = 1.0;
};

/// F(x) + (delta/2)||x - u||^2; +infinity iff g(x) is.
inline double f_delta(const CompositeProblem& p, const Vector& x, const Vector& u, double delta) {
  if (!(delta >= 0.0)) throw InvalidInput("f_delta: delta must be >= 0");
  const double F = p.objective(x);
  if (F == kInfinity) return kInfinity;
  return F + 0.5 * delta * (x - u).squaredNorm();
}

inline AugmentedState pgenls_initial_state(const CompositeProblem& p, const Vector& x0, const PgenlsConfig& cfg) {
  p.check_dimension(x0);
  require_finite(x0, "pgenls: x0");
  const double F0 = p.objective(x0);
  if (!std::isfinite(F0)) throw InvalidInput("pgenls: x0 is not in dom g");
  AugmentedState s;
  s.x = x0;
  s.u = x0;  // x^{-1} = x^0
  s.grad_x = p.f().gradient(x0);
  s.grad_u = s.grad_x;
  s.y_prev = x0;
  s.grad_y_prev = s.grad_x;
  s.window = MemoryWindow(cfg.m);
  s.window.push(0, F0);
  return s;
}

inline StepResult pgenls_step(const CompositeProblem& p, const AugmentedState& s, const PgenlsConfig& cfg) {
  if (p.has_h()) throw InvalidInput("pgenls_step: problem has a concave part -h");
  if (s.window.empty()) throw LogicError("pgenls_step: empty window");
  const Vector& x = s.x;
  const Vector d = x - s.u;
  const double prev_sq = d.squaredNorm();
  StepResult r;
  r.window_max = s.window.max().value;

  double gamma = detail::initial_gamma(cfg.gamma_init, s.k, x, s.u, s.grad_x, s.grad_u, p.f().lipschitz_hint,
                                       cfg.gamma_min, cfg.gamma_max);
  double beta = cfg.beta_max;
  if (cfg.beta_init == BetaInit::nesterov) beta = detail::clip((s.t_prev - 1.0) / s.t_curr, 0.0, cfg.beta_max);

  const double current = s.window.entries().back().value;
  const double step_tol = cfg.tol_step * (1.0 + x.norm());
  Vector cand;
  for (int j = 0; j < cfg.max_inner; ++j) {
    r.trials.emplace_back(gamma, beta);
    Vector y = (beta == 0.0 || prev_sq == 0.0) ? x : Vector(x + beta * d);
    Vector gy = (beta == 0.0 || prev_sq == 0.0) ? s.grad_x : p.f().gradient(y);
    cand = p.g().prox(y - gy / gamma, gamma);
    const double gval = p.g().value(cand);
    if (gval == kInfinity) throw OracleInconsistency("pgenls_step: prox returned a point outside dom g");
    const double Fc = p.f().value(cand) + gval;
    const double step_sq = (cand - x).squaredNorm();
    const double merit = Fc + 0.5 * cfg.delta * step_sq;
    const double dec = 0.5 * cfg.alpha * gamma * step_sq + 0.5 * cfg.alpha * cfg.delta * prev_sq;
    if (!std::isnan(merit) && s.window.accept(merit, dec)) {
      r.x_next = std::move(cand);
      r.y = std::move(y);
      r.grad_y = std::move(gy);
      r.gamma = gamma;
      r.beta = beta;
      r.j = j;
      r.decrement = dec;
      r.F_next = Fc;
      r.merit_next = merit;
      return r;
    }
    if (!std::isnan(merit) && std::sqrt(prev_sq) <= step_tol &&
        detail::at_fp_floor(merit, current, std::sqrt(step_sq), step_tol)) {
      r.stalled = true;
      r.gamma = gamma;
      r.beta = beta;
      r.j = j;
      return r;
    }
    gamma *= cfg.rho;
    beta *= cfg.nu;
  }
  throw BacktrackingFailure("pgenls_step: no acceptable trial within " + std::to_string(cfg.max_inner) + " trials",
                            cand, gamma / cfg.rho, cfg.max_inner);
}

/// Norm of (grad f(x^k) - grad f(y^k) - gamma_{k-1}(x^k - y^k) + delta(x^k - x^{k-1}),
/// delta(x^{k-1} - x^k)), an element of dF_delta(z^k).
inline double pg_residual(const Vector& grad_x, const Vector& grad_y, const Vector& x, const Vector& y,
                          const Vector& x_prev, double gamma_prev, double delta) {
  const Vector dx = x - x_prev;
  const Vector first = grad_x - grad_y - gamma_prev * (x - y) + delta * dx;
  return std::sqrt(first.squaredNorm() + delta * delta * dx.squaredNorm());
}

inline double pg_residual(const CompositeProblem&, const AugmentedState& s, double delta) {
  return pg_residual(s.grad_x, s.grad_y_prev, s.x, s.y_prev, s.u, s.gamma_prev, delta);
}

inline Trace pgenls_solve(const CompositeProblem& p, const Vector& x0, const PgenlsConfig& cfg) {
  cfg.validate();
  if (p.has_h()) throw InvalidInput("pgenls: problem '" + p.id() + "' has a concave part -h; use npg_major");
  AugmentedState s = pgenls_initial_state(p, x0, cfg);

  Trace trace;
  trace.meta.algorithm = "pgenls";
  trace.meta.problem_id = p.id();
  trace.meta.m = cfg.m;
  trace.meta.delta = cfg.delta;
  trace.meta.h1_constant = cfg.h1_constant();
  trace.meta.step_block = cfg.step_block();
  trace.meta.phi_column = PhiColumn::merit;
  if (cfg.degenerate_merit())
    trace.meta.warnings.push_back("delta=0 with beta_max>0: H1 constant degenerates; auditing the x-block only");

  IterateRecord row0;
  row0.x = x0;
  row0.F = s.window.max().value;
  row0.merit = row0.F;
  trace.rows.push_back(std::move(row0));

  double lipschitz_seen = 0.0;
  for (int it = 0; it < cfg.max_outer; ++it) {
    StepResult step;
    try {
      step = pgenls_step(p, s, cfg);
    } catch (const Error& e) {
      throw SolverError("pgenls iteration " + std::to_string(s.k) + ": " + e.what(), static_cast<int>(s.k));
    }
    if (step.stalled) {
      trace.meta.terminated_by = "fp_floor";
      break;
    }
    const Vector grad_next = p.f().gradient(step.x_next);
    const double step_norm = (step.x_next - s.x).norm();
    const double residual = pg_residual(grad_next, step.grad_y, step.x_next, step.y, s.x, step.gamma, cfg.delta);
    if (step_norm > 0.0) lipschitz_seen = std::max(lipschitz_seen, (grad_next - s.grad_x).norm() / step_norm);
    const double xy = (step.x_next - step.y).norm();
    if (xy > 0.0) lipschitz_seen = std::max(lipschitz_seen, (grad_next - step.grad_y).norm() / xy);

    IterateRecord row;
    row.k = s.k + 1;
    row.x = step.x_next;
    row.F = step.F_next;
    row.merit = step.merit_next;
    row.gamma = step.gamma;
    row.beta = step.beta;
    row.j_inner = step.j;
    row.step_norm = step_norm;
    row.residual = residual;

    const double x_norm = s.x.norm();
    const bool was_still = s.x == s.u;
    s.window.push(row.k, row.merit);
    row.ell = s.window.max().ell;
    s.u = std::move(s.x);
    s.grad_u = std::move(s.grad_x);
    s.x = step.x_next;
    s.grad_x = grad_next;
    s.y_prev = std::move(step.y);
    s.grad_y_prev = std::move(step.grad_y);
    s.gamma_prev = step.gamma;
    s.beta_prev = step.beta;
    s.k = row.k;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s.t_curr * s.t_curr));
    s.t_prev = s.t_curr;
    s.t_curr = t_next;
    trace.rows.push_back(std::move(row));

    if (step_norm == 0.0 && was_still) {
      trace.meta.terminated_by = "stationary";
      break;
    }
    if (step_norm <= cfg.tol_step * (1.0 + x_norm) && residual <= cfg.tol_resid) {
      trace.meta.terminated_by = "tolerance";
      break;
    }
  }

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
