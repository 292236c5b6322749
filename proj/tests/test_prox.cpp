#include "kldescent/oracles.hpp"
#include "kldescent/prox.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using kldescent::Vector;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Minimizer of phi over the integer grid {k * h} covering [lo, hi].
double grid_argmin(const std::function<double(double)>& phi, double lo, double hi, double h = 1e-4) {
  const auto k0 = static_cast<long>(std::floor(lo / h));
  const auto k1 = static_cast<long>(std::ceil(hi / h));
  double best_x = 0.0;
  double best = phi(0.0);
  for (long k = k0; k <= k1; ++k) {
    const double x = static_cast<double>(k) * h;
    const double val = phi(x);
    if (val < best) {
      best = val;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

TEST(ProxL1, SoftThresholds) {
  const Vector p = kldescent::prox_l1(vec({3.0, -0.5}), 1.0, 1.0);
  EXPECT_DOUBLE_EQ(p[0], 2.0);
  EXPECT_DOUBLE_EQ(p[1], 0.0);
}

TEST(ProxL1, OriginIsFixed) {
  EXPECT_EQ(kldescent::prox_l1(Vector::Zero(2), 0.3, 7.0), Vector::Zero(2));
}

TEST(ProxL1, TinyPenaltyIsNearIdentity) {
  EXPECT_NEAR(kldescent::prox_l1(vec({5.0}), 1e-12, 1.0)[0], 5.0, 1e-11);
}

TEST(ProxL1, RejectsNonFinite) {
  EXPECT_THROW(kldescent::prox_l1(vec({NAN}), 1.0, 1.0), kldescent::InvalidInput);
  EXPECT_THROW(kldescent::prox_l1(vec({1.0}), -1.0, 1.0), kldescent::InvalidInput);
  EXPECT_THROW(kldescent::prox_l1(vec({1.0}), 1.0, 0.0), kldescent::InvalidInput);
}

TEST(ProxL0, HardThresholds) {
  const Vector p = kldescent::prox_l0(vec({2.0, 0.5}), 1.0, 2.0);
  EXPECT_DOUBLE_EQ(p[0], 2.0);
  EXPECT_DOUBLE_EQ(p[1], 0.0);
}

TEST(ProxL0, TieGoesToZero) {
  // |v| = sqrt(2 lambda / gamma) = 1: both candidates cost 1/2.
  EXPECT_DOUBLE_EQ(kldescent::prox_l0(vec({1.0}), 1.0, 2.0)[0], 0.0);
  EXPECT_DOUBLE_EQ(kldescent::prox_l0(vec({-1.0}), 1.0, 2.0)[0], 0.0);
}

TEST(ProxL0, ZeroStaysZero) { EXPECT_EQ(kldescent::prox_l0(Vector::Zero(4), 1.0, 1.0), Vector::Zero(4)); }

TEST(ProxL0, RejectsNonFinite) {
  EXPECT_THROW(kldescent::prox_l0(vec({INFINITY}), 1.0, 1.0), kldescent::InvalidInput);
}

TEST(ProxBox, Projects) {
  const Vector p = kldescent::prox_box(vec({2.0, -3.0}), vec({-1.0, -1.0}), vec({1.0, 1.0}), 1.0);
  EXPECT_EQ(p, vec({1.0, -1.0}));
  EXPECT_EQ(kldescent::prox_box(vec({0.2, -0.7}), vec({-1.0, -1.0}), vec({1.0, 1.0}), 1.0), vec({0.2, -0.7}));
}

TEST(ProxBox, IndependentOfGamma) {
  EXPECT_EQ(kldescent::prox_box(vec({0.5}), vec({0.0}), vec({1.0}), 7.0), vec({0.5}));
  EXPECT_EQ(kldescent::prox_box(vec({0.5}), vec({0.0}), vec({1.0}), 0.1), vec({0.5}));
}

TEST(ProxBox, RejectsInvertedBounds) {
  EXPECT_THROW(kldescent::prox_box(vec({0.5}), vec({1.0}), vec({0.0}), 1.0), kldescent::InvalidInput);
  EXPECT_THROW(kldescent::make_box_prox(vec({1.0}), vec({0.0})), kldescent::InvalidInput);
}

TEST(SubgradL2, Selector) {
  const Vector s = kldescent::subgrad_l2_norm(vec({3.0, 4.0}), 1.0);
  EXPECT_DOUBLE_EQ(s[0], 0.6);
  EXPECT_DOUBLE_EQ(s[1], 0.8);
  EXPECT_EQ(kldescent::subgrad_l2_norm(Vector::Zero(2), 5.0), Vector::Zero(2));
  EXPECT_EQ(kldescent::subgrad_l2_norm(vec({-2.0, 0.0}), 2.0), vec({-2.0, 0.0}));
}

TEST(ProxGrid, L1MatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uv(-3.0, 3.0), ul(0.1, 2.0), ug(0.5, 3.0);
  for (int t = 0; t < 100; ++t) {
    const double v = uv(rng), lambda = ul(rng), gamma = ug(rng);
    const double got = kldescent::prox_l1(vec({v}), lambda, gamma)[0];
    const double ref = grid_argmin(
        [&](double x) { return lambda * std::abs(x) + 0.5 * gamma * (x - v) * (x - v); }, -std::abs(v) - 1.0,
        std::abs(v) + 1.0);
    EXPECT_NEAR(got, ref, 1e-4) << "v=" << v << " lambda=" << lambda << " gamma=" << gamma;
  }
}

TEST(ProxGrid, L0MatchesBruteForce) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> uv(-3.0, 3.0), ul(0.1, 2.0), ug(0.5, 3.0);
  for (int t = 0; t < 100; ++t) {
    const double v = uv(rng), lambda = ul(rng), gamma = ug(rng);
    const double got = kldescent::prox_l0(vec({v}), lambda, gamma)[0];
    const double ref = grid_argmin(
        [&](double x) { return (x != 0.0 ? lambda : 0.0) + 0.5 * gamma * (x - v) * (x - v); }, -std::abs(v) - 1.0,
        std::abs(v) + 1.0);
    EXPECT_NEAR(got, ref, 1e-4) << "v=" << v << " lambda=" << lambda << " gamma=" << gamma;
  }
}

namespace {

void expect_prox_optimal(const kldescent::ProxOracle& g, std::mt19937_64& rng, Eigen::Index n,
                         const std::function<Vector(std::mt19937_64&)>& probe) {
  std::normal_distribution<double> normal(0.0, 1.5);
  std::uniform_real_distribution<double> ug(0.1, 5.0);
  for (int t = 0; t < 100; ++t) {
    Vector v(n);
    for (auto& x : v) x = normal(rng);
    const double gamma = ug(rng);
    const Vector p = g.prox(v, gamma);
    const double best = g.value(p) + 0.5 * gamma * (p - v).squaredNorm();
    for (int u = 0; u < 100; ++u) {
      const Vector w = probe(rng);
      const double other = g.value(w) + 0.5 * gamma * (w - v).squaredNorm();
      ASSERT_LE(best, other + 1e-10);
    }
  }
}

}  // namespace

TEST(ProxOptimality, AllCatalogProxMaps) {
  const Eigen::Index n = 5;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.5);
  std::bernoulli_distribution keep(0.5);
  std::uniform_real_distribution<double> inside(-1.0, 2.0);
  auto sparse_probe = [&](std::mt19937_64& r) {
    Vector w(n);
    for (auto& x : w) x = keep(r) ? normal(r) : 0.0;
    return w;
  };
  auto box_probe = [&](std::mt19937_64& r) {
    Vector w(n);
    for (auto& x : w) x = inside(r);
    return w;
  };
  expect_prox_optimal(kldescent::make_l1_prox(0.7), rng, n, sparse_probe);
  expect_prox_optimal(kldescent::make_l0_prox(0.7), rng, n, sparse_probe);
  expect_prox_optimal(kldescent::make_zero_prox(), rng, n, sparse_probe);
  expect_prox_optimal(kldescent::make_box_prox(Vector::Constant(n, -1.0), Vector::Constant(n, 2.0)), rng, n,
                      box_probe);
}

TEST(BoxOracle, ValueIsInfiniteOutside) {
  const auto g = kldescent::make_box_prox(vec({0.0}), vec({1.0}));
  EXPECT_EQ(g.value(vec({0.5})), 0.0);
  EXPECT_EQ(g.value(vec({1.5})), kldescent::kInfinity);
}
