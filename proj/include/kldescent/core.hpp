#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace kldescent {

inline constexpr const char* kVersion = "kldescent 0.1.0";

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Error hierarchy. Everything derives from std::runtime_error so callers that
// only care about "something went wrong" can catch a single type.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Misuse of a stateful structure (e.g. non-contiguous window pushes).
class LogicError : public Error {
 public:
  using Error::Error;
};

/// A solver inner loop exhausted its trial budget.
class BacktrackingFailure : public Error {
 public:
  BacktrackingFailure(const std::string& what, Vector last_trial, double last_gamma, int trials)
      : Error(what), last_trial_(std::move(last_trial)), last_gamma_(last_gamma), trials_(trials) {}

  const Vector& last_trial() const { return last_trial_; }
  double last_gamma() const { return last_gamma_; }
  int trials() const { return trials_; }

 private:
  Vector last_trial_;
  double last_gamma_;
  int trials_;
};

/// An oracle returned something its contract forbids (prox outside dom g).
class OracleInconsistency : public Error {
 public:
  using Error::Error;
};

/// A trace contradicts a property that every conforming sequence must have.
class FrameworkViolation : public Error {
 public:
  using Error::Error;
};

/// The trace lacks data an audit needs.
class InsufficientTrace : public Error {
 public:
  using Error::Error;
};

/// Wraps a solver error with the outer iteration it happened in.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, int iteration) : Error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

inline void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw InvalidInput(std::string(what) + " must be a positive finite number");
}

}  // namespace kldescent
