#pragma once

// Closed-form proximal maps used by the problem catalog. All maps solve
//
//     argmin_x  g(x) + (gamma/2) * ||x - v||^2
//
// i.e. gamma plays the role of an inverse step size.

#include "kldescent/core.hpp"

#include <cmath>

namespace kldescent {

/// Soft thresholding at lambda/gamma.
inline Vector prox_l1(const Vector& v, double lambda, double gamma) {
  require_finite(v, "prox_l1");
  require_positive(lambda, "prox_l1: lambda");
  require_positive(gamma, "prox_l1: gamma");
  const double t = lambda / gamma;
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]) - t;
    out[i] = mag > 0.0 ? std::copysign(mag, v[i]) : 0.0;
  }
  return out;
}

/// Hard thresholding at sqrt(2 lambda / gamma). Entries exactly at the
/// threshold go to zero: both candidates tie and the sparser one wins.
inline Vector prox_l0(const Vector& v, double lambda, double gamma) {
  require_finite(v, "prox_l0");
  require_positive(lambda, "prox_l0: lambda");
  require_positive(gamma, "prox_l0: gamma");
  const double t = std::sqrt(2.0 * lambda / gamma);
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::abs(v[i]) > t ? v[i] : 0.0;
  return out;
}

/// Projection onto [lo, hi]; gamma does not enter.
inline Vector prox_box(const Vector& v, const Vector& lo, const Vector& hi, double gamma) {
  require_finite(v, "prox_box");
  require_positive(gamma, "prox_box: gamma");
  if (lo.size() != v.size() || hi.size() != v.size())
    throw InvalidInput("prox_box: bound dimension mismatch");
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(lo[i] <= hi[i])) throw InvalidInput("prox_box: lo > hi at index " + std::to_string(i));
  }
  return v.cwiseMax(lo).cwiseMin(hi);
}

/// A subgradient of lambda * ||x||_2. Selects 0 at the origin.
inline Vector subgrad_l2_norm(const Vector& x, double lambda) {
  require_finite(x, "subgrad_l2_norm");
  require_positive(lambda, "subgrad_l2_norm: lambda");
  const double nrm = x.norm();
  if (nrm == 0.0) return Vector::Zero(x.size());
  return (lambda / nrm) * x;
}

}  // namespace kldescent
