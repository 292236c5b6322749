#pragma once

// Oracle interfaces for composite problems F = f + g - h and a few standard
// oracle constructors. Oracles are immutable once built: every closure
// captures its data by shared const pointer, so copies are cheap and
// concurrent evaluation is safe.

#include "kldescent/core.hpp"
#include "kldescent/prox.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace kldescent {

struct SmoothOracle {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  /// Upper estimate of the gradient's Lipschitz constant, when one exists.
  std::optional<double> lipschitz_hint;
};

struct ProxOracle {
  /// May return +infinity outside dom g.
  std::function<double(const Vector&)> value;
  /// argmin_x g(x) + (gamma/2)||x - v||^2
  std::function<Vector(const Vector&, double)> prox;
};

struct ConvexOracle {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> subgradient;
};

/// F(x) = f(x) + g(x) - h(x); h absent means h == 0.
class CompositeProblem {
 public:
  CompositeProblem(SmoothOracle f, ProxOracle g, std::optional<ConvexOracle> h, Eigen::Index dimension,
                   std::string id = "custom")
      : f_(std::move(f)), g_(std::move(g)), h_(std::move(h)), dimension_(dimension), id_(std::move(id)) {
    if (dimension_ < 1) throw InvalidInput("CompositeProblem: dimension must be >= 1");
    if (!f_.value || !f_.gradient) throw InvalidInput("CompositeProblem: smooth oracle incomplete");
    if (!g_.value || !g_.prox) throw InvalidInput("CompositeProblem: prox oracle incomplete");
    if (h_ && (!h_->value || !h_->subgradient)) throw InvalidInput("CompositeProblem: convex oracle incomplete");
  }

  const SmoothOracle& f() const { return f_; }
  const ProxOracle& g() const { return g_; }
  const std::optional<ConvexOracle>& h() const { return h_; }
  bool has_h() const { return h_.has_value(); }
  Eigen::Index dimension() const { return dimension_; }
  const std::string& id() const { return id_; }

  /// Known minimizer, used as the reference point of rate fits when set.
  const std::optional<Vector>& known_minimizer() const { return known_minimizer_; }
  void set_known_minimizer(Vector x) { known_minimizer_ = std::move(x); }

  double h_value(const Vector& x) const { return h_ ? h_->value(x) : 0.0; }

  /// xi = -s with s the selected member of dh(x); zero when h is absent.
  Vector xi(const Vector& x) const { return h_ ? Vector(-h_->subgradient(x)) : Vector(Vector::Zero(x.size())); }

  double objective(const Vector& x) const {
    const double gx = g_.value(x);
    if (gx == kInfinity) return kInfinity;
    return f_.value(x) + gx - h_value(x);
  }

  void check_dimension(const Vector& x) const {
    if (x.size() != dimension_)
      throw InvalidInput("point has dimension " + std::to_string(x.size()) + ", problem expects " +
                         std::to_string(dimension_));
  }

 private:
  SmoothOracle f_;
  ProxOracle g_;
  std::optional<ConvexOracle> h_;
  Eigen::Index dimension_;
  std::string id_;
  std::optional<Vector> known_minimizer_;
};

namespace detail {

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

}  // namespace detail

/// Largest eigenvalue of a symmetric PSD operator by power iteration, stopped
/// once the Rayleigh quotient changes by less than rtol (relative).
template <class Apply>
double largest_eigenvalue_psd(Apply&& apply, Eigen::Index n, double rtol = 1e-12, int max_iter = 20000) {
  Vector v(n);
  // Deterministic, non-symmetric start so it rarely sits orthogonal to the top eigenvector.
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = apply(v);
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 0 && std::abs(next - lambda) <= rtol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

/// f(x) = 1/2 ||Ax - b||^2.
inline SmoothOracle make_least_squares(Matrix A, Vector b) {
  if (A.rows() != b.size()) throw InvalidInput("make_least_squares: A has " + std::to_string(A.rows()) +
                                               " rows but b has " + std::to_string(b.size()) + " entries");
  if (A.rows() == 0 || A.cols() == 0) throw InvalidInput("make_least_squares: empty matrix");
  detail::require_finite(A, "make_least_squares: A");
  require_finite(b, "make_least_squares: b");
  auto Ap = std::make_shared<const Matrix>(std::move(A));
  auto bp = std::make_shared<const Vector>(std::move(b));
  const Eigen::Index n = Ap->cols();
  SmoothOracle f;
  f.value = [Ap, bp, n](const Vector& x) {
    if (x.size() != n) throw InvalidInput("least squares: dimension mismatch");
    return 0.5 * (*Ap * x - *bp).squaredNorm();
  };
  f.gradient = [Ap, bp, n](const Vector& x) -> Vector {
    if (x.size() != n) throw InvalidInput("least squares: dimension mismatch");
    return Ap->transpose() * (*Ap * x - *bp);
  };
  f.lipschitz_hint = largest_eigenvalue_psd(
      [&](const Vector& v) -> Vector { return Ap->transpose() * (*Ap * v); }, n);
  return f;
}

/// f(x) = 1/2 x'Qx - q'x for symmetric PSD Q.
inline SmoothOracle make_quadratic(Matrix Q, Vector q) {
  if (Q.rows() != Q.cols() || Q.rows() != q.size()) throw InvalidInput("make_quadratic: dimension mismatch");
  detail::require_finite(Q, "make_quadratic: Q");
  require_finite(q, "make_quadratic: q");
  if (!Q.isApprox(Q.transpose(), 1e-12)) throw InvalidInput("make_quadratic: Q not symmetric");
  auto Qp = std::make_shared<const Matrix>(std::move(Q));
  auto qp = std::make_shared<const Vector>(std::move(q));
  const Eigen::Index n = Qp->rows();
  SmoothOracle f;
  f.value = [Qp, qp, n](const Vector& x) {
    if (x.size() != n) throw InvalidInput("quadratic: dimension mismatch");
    return 0.5 * x.dot(*Qp * x) - qp->dot(x);
  };
  f.gradient = [Qp, qp, n](const Vector& x) -> Vector {
    if (x.size() != n) throw InvalidInput("quadratic: dimension mismatch");
    return *Qp * x - *qp;
  };
  f.lipschitz_hint = largest_eigenvalue_psd([&](const Vector& v) -> Vector { return *Qp * v; }, n);
  return f;
}

/// f(x) = x^4 / 4 on the real line. The gradient is only locally Lipschitz,
/// so no hint is given.
inline SmoothOracle make_power4_1d() {
  SmoothOracle f;
  f.value = [](const Vector& x) {
    if (x.size() != 1) throw InvalidInput("power4_1d: dimension must be 1");
    const double t = x[0];
    return 0.25 * t * t * t * t;
  };
  f.gradient = [](const Vector& x) -> Vector {
    if (x.size() != 1) throw InvalidInput("power4_1d: dimension must be 1");
    Vector gx(1);
    gx[0] = x[0] * x[0] * x[0];
    return gx;
  };
  return f;
}

inline ProxOracle make_zero_prox() {
  return {[](const Vector&) { return 0.0; }, [](const Vector& v, double) -> Vector { return v; }};
}

inline ProxOracle make_l1_prox(double lambda) {
  require_positive(lambda, "l1 penalty: lambda");
  return {[lambda](const Vector& x) { return lambda * x.lpNorm<1>(); },
          [lambda](const Vector& v, double gamma) { return prox_l1(v, lambda, gamma); }};
}

inline ProxOracle make_l0_prox(double lambda) {
  require_positive(lambda, "l0 penalty: lambda");
  return {[lambda](const Vector& x) {
            return lambda * static_cast<double>((x.array() != 0.0).count());
          },
          [lambda](const Vector& v, double gamma) { return prox_l0(v, lambda, gamma); }};
}

inline ProxOracle make_box_prox(Vector lo, Vector hi) {
  if (lo.size() != hi.size()) throw InvalidInput("box: bound dimension mismatch");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i])) throw InvalidInput("box: lo > hi at index " + std::to_string(i));
  auto lop = std::make_shared<const Vector>(std::move(lo));
  auto hip = std::make_shared<const Vector>(std::move(hi));
  return {[lop, hip](const Vector& x) {
            if (x.size() != lop->size()) throw InvalidInput("box: dimension mismatch");
            for (Eigen::Index i = 0; i < x.size(); ++i)
              if (x[i] < (*lop)[i] || x[i] > (*hip)[i]) return kInfinity;
            return 0.0;
          },
          [lop, hip](const Vector& v, double gamma) { return prox_box(v, *lop, *hip, gamma); }};
}

/// h(x) = lambda ||x||_2.
inline ConvexOracle make_l2_norm(double lambda) {
  require_positive(lambda, "l2 norm: lambda");
  return {[lambda](const Vector& x) { return lambda * x.norm(); },
          [lambda](const Vector& x) { return subgrad_l2_norm(x, lambda); }};
}

}  // namespace kldescent
