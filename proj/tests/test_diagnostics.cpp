#include "kldescent/catalog.hpp"
#include "kldescent/diagnostics.hpp"
#include "kldescent/npg_major.hpp"
#include "kldescent/pgenls.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using kldescent::Matrix;
using kldescent::Trace;
using kldescent::Vector;

namespace {

/// 1-D trace with the given Phi values and steps; iterates accumulate the steps
/// and ell(k) follows the memory-m window rule.
Trace synthetic(const std::vector<double>& phi, const std::vector<double>& step, int m,
                const std::string& terminated_by = "tolerance") {
  Trace t;
  t.meta.m = m;
  t.meta.terminated_by = terminated_by;
  double x = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    kldescent::IterateRecord r;
    r.k = static_cast<std::int64_t>(k);
    if (k > 0) {
      r.step_norm = step[k];
      x += step[k];
    }
    r.x = Vector::Constant(1, x);
    r.F = phi[k];
    r.merit = phi[k];
    const std::size_t lo = k >= static_cast<std::size_t>(m) ? k - m : 0;
    std::size_t ell = lo;
    for (std::size_t i = lo; i <= k; ++i)
      if (phi[i] >= phi[ell]) ell = i;
    r.ell = static_cast<std::int64_t>(ell);
    t.rows.push_back(std::move(r));
  }
  return t;
}

/// Trace whose iterates are the given scalars.
Trace from_iterates(const std::vector<double>& xs, const std::string& terminated_by = "tolerance") {
  Trace t;
  t.meta.terminated_by = terminated_by;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    kldescent::IterateRecord r;
    r.k = static_cast<std::int64_t>(k);
    r.x = Vector::Constant(1, xs[k]);
    r.F = 0.5 * xs[k] * xs[k];
    r.merit = r.F;
    r.ell = r.k;
    if (k > 0) r.step_norm = std::abs(xs[k] - xs[k - 1]);
    t.rows.push_back(std::move(r));
  }
  return t;
}

kldescent::CompositeProblem half_square() {
  return {kldescent::make_quadratic(Matrix::Identity(1, 1), Vector::Zero(1)), kldescent::make_zero_prox(),
          std::nullopt, 1, "half-square"};
}

Trace halving_trace(int iterations) {
  kldescent::NpgConfig cfg;
  cfg.gamma_init = kldescent::GammaInit::constant;
  cfg.gamma_min = cfg.gamma_max = 2.0;
  cfg.m = 0;
  cfg.max_outer = iterations;
  return kldescent::npg_solve(half_square(), Vector::Constant(1, 1.0), cfg);
}

}  // namespace

TEST(XiGamma, HalvingClosedForm) {
  const Trace t = halving_trace(30);
  const auto s = kldescent::xi_gamma(t);
  for (std::size_t k = 1; k < s.xi.size(); ++k) EXPECT_DOUBLE_EQ(s.xi[k], std::ldexp(1.0, -static_cast<int>(k)));
  for (std::size_t k = 0; k < s.gamma.size(); ++k)
    EXPECT_NEAR(s.gamma[k], std::ldexp(1.0, -static_cast<int>(k)) * std::sqrt(3.0 / 8.0), 1e-15);
}

TEST(XiGamma, ConstantTraceAndPlateau) {
  const auto s = kldescent::xi_gamma(synthetic({4, 4, 4, 4}, {0, 0, 0, 0}, 2));
  for (double v : s.xi) EXPECT_EQ(v, 0.0);
  for (double v : s.gamma) EXPECT_EQ(v, 0.0);
}

TEST(XiGamma, IncreasingWindowMaxIsAViolation) {
  Trace t = synthetic({1, 2, 3}, {0, 1, 1}, 0);
  EXPECT_THROW(kldescent::xi_gamma(t), kldescent::FrameworkViolation);
  EXPECT_THROW(kldescent::xi_gamma(synthetic({1}, {0}, 0)), kldescent::InsufficientTrace);
}

TEST(XiGamma, RoundingIncreaseIsClipped) {
  const auto s = kldescent::xi_gamma(synthetic({1.0, 1.0 + 1e-13}, {0, 1e-3}, 0));
  EXPECT_EQ(s.gamma[0], 0.0);
}

TEST(Series, TailSums) {
  std::vector<double> xi(101), gamma(100);
  for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = std::pow(0.5, static_cast<double>(k));
  for (std::size_t k = 0; k < gamma.size(); ++k) gamma[k] = std::pow(0.5, static_cast<double>(k));
  const auto s = kldescent::summarize_series({xi, gamma}, true);
  EXPECT_NEAR(s.xi_sum, 1.0, 1e-12);
  EXPECT_LT(s.xi_tail_sum, 1e-20);
  EXPECT_TRUE(s.pass);
  std::vector<double> flat(101, 1.0);
  const auto f = kldescent::summarize_series({flat, flat}, true);
  EXPECT_FALSE(f.pass);
  EXPECT_TRUE(kldescent::summarize_series({flat, flat}, false).pass);
}

TEST(H1, BoundaryPasses) {
  const auto r = kldescent::check_h1(synthetic({2.0, 1.5}, {0, 1.0}, 0), 0.5);
  EXPECT_EQ(r.max_violation, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(H1, IncreasingTraceFails) {
  const auto r = kldescent::check_h1(synthetic({1.0, 1.2, 1.1, 1.5}, {0, 0.1, 0.1, 0.1}, 1), 0.5);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.max_violation, 0.0);
  EXPECT_EQ(r.worst_k, 2);
}

TEST(H1, SolverTracesPass) {
  for (int seed = 0; seed < 3; ++seed) {
    const auto inst = kldescent::make_problem("l1-l2-dc", {{"seed", seed}});
    const auto t = kldescent::npg_solve(inst.problem, inst.x0, {});
    EXPECT_TRUE(kldescent::check_h1(t, t.meta.h1_constant).pass);
    const auto lasso = kldescent::make_problem("lasso", {{"seed", seed}});
    const auto u = kldescent::pgenls_solve(lasso.problem, lasso.x0, {});
    EXPECT_TRUE(kldescent::check_h1(u, u.meta.h1_constant).pass);
  }
}

TEST(H3, SandwichOnDcTrace) {
  const auto inst = kldescent::make_problem("l1-l2-dc", {{"seed", 1}});
  const auto t = kldescent::npg_solve(inst.problem, inst.x0, {});
  const auto r = kldescent::check_h3(t, *t.meta.lipschitz, &inst.problem);
  EXPECT_TRUE(r.pass) << r.sandwich_max_violation << " " << r.b_hat << " " << r.b_cap;
  const auto stored = kldescent::check_h3(t, *t.meta.lipschitz);
  EXPECT_NEAR(stored.sandwich_max_violation, r.sandwich_max_violation, 1e-12);
}

TEST(H3, HalvingResidualRatio) {
  const auto r = kldescent::check_h3(halving_trace(20), 1.0);
  EXPECT_NEAR(r.b_hat, std::sqrt(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(r.b_cap, 4.0);
  EXPECT_TRUE(r.pass);
}

TEST(Bbar, SingleRatio) {
  const auto b = kldescent::estimate_bbar(synthetic({1.0, 1.5}, {0, 1.0}, 1));
  EXPECT_NEAR(b.b_bar, 1.0, 1e-12);
}

TEST(Bbar, MonotoneAndDegenerate) {
  EXPECT_EQ(kldescent::estimate_bbar(halving_trace(20)).b_bar, 0.0);
  const auto d = kldescent::estimate_bbar(synthetic({3, 3, 3}, {0, 0, 0}, 0));
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.b_bar, 0.0);
}

TEST(H4, VacuousWithoutMemory) {
  const auto r = kldescent::check_h4(halving_trace(20), 0.5, 1.0, 2, 0.5);
  EXPECT_TRUE(r.vacuous);
  EXPECT_TRUE(r.pass);
}

TEST(H4, LocatesSpike) {
  const Trace t = synthetic({5, 1, 1, 1, 4, 0.5}, {0, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3}, 3);
  const auto r = kldescent::check_h4(t, 0.5, 1.0, 4, 0.5);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.worst_k, 4);
  EXPECT_GE(r.worst_i, 1);
  EXPECT_LE(r.worst_i, 3);
}

TEST(H4, NpgTracesPassWithDerivedMu) {
  for (int seed = 0; seed < 3; ++seed) {
    const auto inst = kldescent::make_problem("l1-l2-dc", {{"seed", seed}});
    const auto t = kldescent::npg_solve(inst.problem, inst.x0, {});
    const double L = *t.meta.lipschitz;
    ASSERT_LE(kldescent::estimate_bbar(t).b_bar, L + 1e-8);
    const auto r = kldescent::check_h4(t, 0.5, std::sqrt(L / 2.0), t.meta.m + 2, t.meta.h1_constant);
    EXPECT_TRUE(r.pass) << r.max_violation;
  }
}

TEST(H4, RejectsBadArguments) {
  const Trace t = halving_trace(5);
  EXPECT_THROW(kldescent::check_h4(t, 1.5, 1.0, 2, 0.5), kldescent::InvalidInput);
  EXPECT_THROW(kldescent::check_h4(t, 0.0, 1.0, 2, 0.5), kldescent::InvalidInput);
  EXPECT_THROW(kldescent::check_h4(t, 0.5, 1.0, 0, 0.5), kldescent::InvalidInput);
}

TEST(CConstant, ClosedForm) {
  EXPECT_DOUBLE_EQ(kldescent::c_constant(0.5, 0.5, 1.0, 1), 4.0);
  EXPECT_NEAR(kldescent::c_constant(1e-12, 0.5, 1.0, 1), 4.0, 1e-9);
  EXPECT_THROW(kldescent::c_constant(0.5, 1.0, 1.0, 1), kldescent::InvalidInput);
}

TEST(CConstant, NondecreasingInMemory) {
  for (double mu : {0.0, 0.1, 0.5, 2.0})
    for (double tau : {0.1, 0.5, 0.9})
      for (double a : {1e-4, 0.1, 1.0, 10.0})
        for (int m = 0; m < 12; ++m)
          EXPECT_LE(kldescent::c_constant(mu, tau, a, m), kldescent::c_constant(mu, tau, a, m + 1))
              << mu << " " << tau << " " << a << " " << m;
}

TEST(PropBound, ConstantAndHalvingTraces) {
  const auto c = kldescent::check_prop_bound(synthetic({2, 2, 2, 2, 2}, {0, 0, 0, 0, 0}, 0), 0.5, 0.5, 1.0, 0, 2);
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.max_violation, 0.0);
  const Trace h = halving_trace(30);
  const auto r = kldescent::check_prop_bound(h, 0.0, 0.5, h.meta.h1_constant, 0, 2);
  EXPECT_GE(r.c, 1.0);
  EXPECT_TRUE(r.pass);
}

TEST(PropBound, HoldsWhereH1AndH4Hold) {
  for (const char* id : {"lasso", "l0-ls", "l1-l2-dc", "quad-l1"}) {
    for (int m : {0, 3}) {
      const auto inst = kldescent::make_problem(id, {{"seed", 4}});
      kldescent::NpgConfig cfg;
      cfg.m = m;
      const auto t = kldescent::npg_solve(inst.problem, inst.x0, cfg);
      const double a = t.meta.h1_constant;
      const double mu = std::sqrt(kldescent::estimate_bbar(t).b_bar / 2.0);
      ASSERT_TRUE(kldescent::check_h1(t, a).pass);
      ASSERT_TRUE(kldescent::check_h4(t, 0.5, mu, m + 2, a).pass);
      const auto r = kldescent::check_prop_bound(t, mu, 0.5, a, m, m + 2);
      EXPECT_TRUE(r.pass) << id << " m=" << m << " " << r.max_violation;
    }
  }
}

TEST(FitRate, GeometricSequence) {
  std::vector<double> xs;
  for (int k = 0; k <= 60; ++k) xs.push_back(std::pow(0.7, k));
  kldescent::RateOptions opt;
  opt.reference = Vector::Zero(1);
  const auto r = kldescent::fit_rate(from_iterates(xs), opt);
  EXPECT_EQ(r.verdict, kldescent::RateVerdict::linear);
  EXPECT_NEAR(r.rho, 0.7, 1e-3);
  EXPECT_GE(r.r2_linear, 0.999);
}

TEST(FitRate, PowerSequence) {
  std::vector<double> xs{1.0};
  for (int k = 1; k <= 1000; ++k) xs.push_back(1.0 / (static_cast<double>(k) * k));
  kldescent::RateOptions opt;
  opt.reference = Vector::Zero(1);
  const auto r = kldescent::fit_rate(from_iterates(xs), opt);
  EXPECT_EQ(r.verdict, kldescent::RateVerdict::sublinear);
  EXPECT_NEAR(r.slope, -2.0, 1e-3);
  EXPECT_NEAR(r.theta, kldescent::theta_from_slope(-2.0), 1e-3);
}

TEST(FitRate, FiniteTermination) {
  std::vector<double> xs;
  for (int k = 0; k < 10; ++k) xs.push_back(std::pow(0.5, k));
  for (int k = 10; k < 20; ++k) xs.push_back(0.0);
  const auto r = kldescent::fit_rate(from_iterates(xs));
  EXPECT_EQ(r.verdict, kldescent::RateVerdict::finite_termination);
  EXPECT_EQ(r.finite_k, 10);
}

TEST(FitRate, HalvingTrace) {
  const Trace t = halving_trace(60);
  kldescent::RateOptions opt;
  opt.reference = Vector::Zero(1);
  const auto r = kldescent::fit_rate(t, opt);
  EXPECT_EQ(r.verdict, kldescent::RateVerdict::linear);
  EXPECT_NEAR(r.rho, 0.5, 0.01);
  EXPECT_GE(r.r2_linear, 0.999);
}

TEST(FitRate, InconclusiveCases) {
  EXPECT_EQ(kldescent::fit_rate(from_iterates({1.0, 0.5, 0.25, 0.125}, "tolerance")).verdict,
            kldescent::RateVerdict::inconclusive);
  std::vector<double> xs;
  for (int k = 0; k < 50; ++k) xs.push_back(std::pow(0.9, k));
  const auto r = kldescent::fit_rate(from_iterates(xs, "max_outer"));
  EXPECT_EQ(r.verdict, kldescent::RateVerdict::inconclusive);
  EXPECT_FALSE(r.note.empty());
}

TEST(FitRate, ExponentFormula) {
  EXPECT_DOUBLE_EQ(kldescent::theta_from_slope(-0.5), 0.75);
  EXPECT_NEAR(kldescent::theta_from_slope(-2.0), 0.6, 1e-15);
}

TEST(Audit, CleanOnSolverTraces) {
  const auto inst = kldescent::make_problem("l1-l2-dc", {{"seed", 3}});
  const auto t = kldescent::npg_solve(inst.problem, inst.x0, {});
  kldescent::AuditOptions opt;
  opt.problem = &inst.problem;
  const auto rep = kldescent::audit(t, opt);
  EXPECT_TRUE(rep.pass()) << (rep.failures.empty() ? "" : rep.failures.front());
  EXPECT_TRUE(rep.h3.applicable);
  EXPECT_FALSE(rep.h4.vacuous);
}

TEST(Audit, TraceValidation) {
  Trace t = synthetic({2, 1, 0.5}, {0, 1, 1}, 0);
  t.rows[2].step_norm = 3.0;
  t.rows[1].ell = 0;
  const auto issues = kldescent::validate_trace(t);
  EXPECT_EQ(issues.size(), 2u);
}
