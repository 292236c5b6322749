#pragma once

#include "kldescent/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kldescent {

/// One row of a solver trace. Row k describes x^k and the step that produced
/// it; row 0 carries zeros in the step fields and a NaN residual.
struct IterateRecord {
  std::int64_t k = 0;
  Vector x;
  double F = 0.0;
  /// Theta(z^k) for the DC solver, F_delta(z^k) for the extrapolated one.
  double merit = 0.0;
  double gamma = 0.0;  // gamma_{k-1}
  double beta = 0.0;   // beta_{k-1}
  int j_inner = 0;     // j_{k-1}
  std::int64_t ell = 0;
  double step_norm = 0.0;  // ||x^k - x^{k-1}||
  double residual = kNaN;
  /// xi^k (DC solver only, in-memory only).
  std::optional<Vector> xi;
};

/// Which step sequence the convergence framework is stated in. The DC solver
/// works with ||x^k - x^{k-1}||; the extrapolated solver with delta > 0 works
/// with ||z^k - z^{k-1}|| for z^k = (x^k, x^{k-1}).
enum class StepBlock { x, z };

inline const char* to_string(StepBlock b) { return b == StepBlock::x ? "x" : "z"; }

/// Which column holds the framework objective Phi.
enum class PhiColumn { F, merit };

inline const char* to_string(PhiColumn c) { return c == PhiColumn::F ? "F" : "merit"; }

struct TraceMeta {
  std::string algorithm = "external";  // npg_major | pgenls | pgnls | external
  std::string problem_id;
  std::optional<std::uint64_t> seed;
  int m = 0;
  /// H1 constant guaranteed by the algorithm's acceptance test.
  double h1_constant = 0.0;
  double delta = 0.0;
  StepBlock step_block = StepBlock::x;
  PhiColumn phi_column = PhiColumn::F;
  std::optional<double> lipschitz;
  std::string lipschitz_source = "none";  // hint | estimated | override | none
  std::optional<Vector> rate_reference;
  /// tolerance | stationary | fp_floor | max_outer
  std::string terminated_by = "max_outer";
  std::vector<std::string> warnings;
  std::string config_json = "{}";
};

struct Trace {
  TraceMeta meta;
  std::vector<IterateRecord> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  Eigen::Index dimension() const { return rows.empty() ? 0 : rows.front().x.size(); }
  bool tolerance_terminated() const {
    return meta.terminated_by == "tolerance" || meta.terminated_by == "stationary" ||
           meta.terminated_by == "fp_floor";
  }
};

}  // namespace kldescent
