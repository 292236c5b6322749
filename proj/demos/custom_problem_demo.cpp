// Builds a box-constrained least-squares problem by hand and checks the
// sufficient-decrease audit on the solver trace.

#include "kldescent/diagnostics.hpp"
#include "kldescent/npg_major.hpp"
#include "kldescent/oracles.hpp"

#include <iostream>
#include <random>

int main() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  kldescent::Matrix A(30, 10);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = normal(rng);
  kldescent::Vector b(30);
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = normal(rng);

  const kldescent::CompositeProblem p(kldescent::make_least_squares(A, b), kldescent::make_box_prox(kldescent::Vector::Constant(10, -0.1), kldescent::Vector::Constant(10, 0.1)),
                                      std::nullopt, 10, "box-ls");
  kldescent::NpgConfig cfg;
  cfg.m = 4;
  const auto t = kldescent::npg_solve(p, kldescent::Vector::Zero(10), cfg);
  const auto h1 = kldescent::check_h1(t, t.meta.h1_constant);
  std::cout << "iterations " << t.rows.size() - 1 << " (" << t.meta.terminated_by << ")\n"
            << "final F    " << t.rows.back().F << '\n'
            << "x          " << t.rows.back().x.transpose() << '\n'
            << "H1         " << (h1.pass ? "pass" : "FAIL") << " with a = " << t.meta.h1_constant << '\n';
}
