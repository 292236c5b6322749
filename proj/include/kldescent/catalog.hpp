#pragma once

// Canned problems addressable by id. Randomized instances draw from a single
// std::mt19937_64 seeded from the "seed" parameter, so identical parameters
// give identical data on a given platform.

#include "kldescent/core.hpp"
#include "kldescent/oracles.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace kldescent {

struct ProblemInstance {
  CompositeProblem problem;
  Vector x0;
  std::optional<std::uint64_t> seed;
};

struct ProblemInfo {
  std::string id;
  std::string summary;
  std::string params;
};

inline std::vector<ProblemInfo> list_problems() {
  return {
      {"lasso", "1/2||Ax-b||^2 + lambda||x||_1, Gaussian A",
       "seed, rows=50, cols=100, nonzeros=10, noise=0.01, lambda=0.1||A'b||_inf, A_csv, b_csv, x0"},
      {"l0-ls", "1/2||Ax-b||^2 + lambda||x||_0, Gaussian A",
       "seed, rows=50, cols=100, nonzeros=10, noise=0.01, lambda=0.05, A_csv, b_csv, x0"},
      {"l1-l2-dc", "1/2||Ax-b||^2 + lambda(||x||_1 - ||x||_2), Gaussian A",
       "seed, rows=20, cols=40, nonzeros=5, noise=0.01, lambda=0.1||A'b||_inf, A_csv, b_csv, x0"},
      {"power4-1d", "x^4/4 on the real line, g = 0", "x0=1"},
      {"quad-l1", "1/2 x'Qx - q'x + lambda||x||_1, Q = M'M/rows + mu I",
       "seed, n=50, rows=100, mu=0.1, lambda=0.1, x0"},
  };
}

/// Dense matrix from comma-separated rows without a header.
inline Matrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput(path.string() + ": no data");
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  return M;
}

/// Vector from a CSV holding one column or one row.
inline Vector load_vector_csv(const std::filesystem::path& path) {
  const Matrix M = load_matrix_csv(path);
  if (M.cols() == 1) return M.col(0);
  if (M.rows() == 1) return M.row(0).transpose();
  throw InvalidInput(path.string() + ": expected a single row or column");
}

namespace detail {

class Params {
 public:
  Params(const nlohmann::json& j, std::string problem) : j_(j), problem_(std::move(problem)) {
    if (!j_.is_null() && !j_.is_object()) throw InvalidInput("problem.params must be an object");
  }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key) && !j_[key].is_null(); }

  double number(const std::string& key, double fallback) const {
    used_.insert(key);
    if (!has(key)) return fallback;
    if (!j_[key].is_number()) throw InvalidInput(field(key) + " must be a number");
    return j_[key].get<double>();
  }

  std::optional<double> optional_number(const std::string& key) const {
    if (!has(key)) {
      used_.insert(key);
      return std::nullopt;
    }
    return number(key, 0.0);
  }

  Eigen::Index count(const std::string& key, Eigen::Index fallback) const {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_[key];
    if (!v.is_number_integer() || v.get<long long>() < 1) throw InvalidInput(field(key) + " must be a positive integer");
    return static_cast<Eigen::Index>(v.get<long long>());
  }

  std::optional<std::string> path(const std::string& key) const {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    if (!j_[key].is_string()) throw InvalidInput(field(key) + " must be a file path");
    return j_[key].get<std::string>();
  }

  std::uint64_t seed() const {
    used_.insert("seed");
    if (!has("seed")) throw InvalidInput(field("seed") + " is required for randomized problems");
    const auto& v = j_["seed"];
    if (!v.is_number_integer() || v.get<long long>() < 0) throw InvalidInput(field("seed") + " must be an integer >= 0");
    return v.get<std::uint64_t>();
  }

  /// x0 as a scalar fill or an explicit array.
  Vector start(Eigen::Index n, double fill) const {
    used_.insert("x0");
    if (!has("x0")) return Vector::Constant(n, fill);
    const auto& v = j_["x0"];
    if (v.is_number()) return Vector::Constant(n, v.get<double>());
    if (v.is_array()) {
      const auto xs = v.get<std::vector<double>>();
      if (static_cast<Eigen::Index>(xs.size()) != n)
        throw InvalidInput(field("x0") + " has " + std::to_string(xs.size()) + " entries, problem dimension is " +
                           std::to_string(n));
      return Eigen::Map<const Vector>(xs.data(), n);
    }
    throw InvalidInput(field("x0") + " must be a number or an array");
  }

  void reject_unknown() const {
    if (!j_.is_object()) return;
    for (const auto& [key, _] : j_.items())
      if (!used_.count(key)) throw InvalidInput("unknown parameter " + field(key));
  }

 private:
  std::string field(const std::string& key) const { return "problem.params." + key + " (" + problem_ + ")"; }

  const nlohmann::json& j_;
  std::string problem_;
  mutable std::set<std::string> used_;
};

struct RegressionData {
  Matrix A;
  Vector b;
  std::optional<std::uint64_t> seed;
};

/// A with N(0, 1/rows) entries, b = A x_true + noise, x_true with `nonzeros`
/// N(0,1) entries on random positions. CSV files override the generator.
inline RegressionData regression_data(const Params& p, Eigen::Index rows, Eigen::Index cols, Eigen::Index nonzeros) {
  RegressionData d;
  const auto a_csv = p.path("A_csv");
  const auto b_csv = p.path("b_csv");
  const Eigen::Index r = p.count("rows", rows);
  const Eigen::Index c = p.count("cols", cols);
  const Eigen::Index nz = p.count("nonzeros", nonzeros);
  const double noise = p.number("noise", 0.01);
  if (a_csv || b_csv) {
    if (!a_csv || !b_csv) throw InvalidInput("problem.params: A_csv and b_csv must be given together");
    d.A = load_matrix_csv(*a_csv);
    d.b = load_vector_csv(*b_csv);
    if (p.has("seed")) d.seed = p.seed();
    return d;
  }
  d.seed = p.seed();
  if (nz > c) throw InvalidInput("problem.params.nonzeros exceeds cols");
  std::mt19937_64 rng(*d.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  d.A.resize(r, c);
  const double scale = 1.0 / std::sqrt(static_cast<double>(r));
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) d.A(i, j) = scale * normal(rng);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(c));
  for (Eigen::Index j = 0; j < c; ++j) idx[j] = j;
  std::shuffle(idx.begin(), idx.end(), rng);
  Vector truth = Vector::Zero(c);
  for (Eigen::Index t = 0; t < nz; ++t) truth[idx[t]] = normal(rng);
  d.b = d.A * truth;
  for (Eigen::Index i = 0; i < r; ++i) d.b[i] += noise * normal(rng);
  return d;
}

/// Fixed-step proximal gradient with gamma = L run to its floating-point fixed
/// point. Used as the reference minimizer of strongly convex instances.
inline Vector fixed_step_minimizer(const CompositeProblem& p, Vector x, double lipschitz, int max_iter = 100000) {
  for (int it = 0; it < max_iter; ++it) {
    Vector next = p.g().prox(x - p.f().gradient(x) / lipschitz, lipschitz);
    const double moved = (next - x).norm();
    x = std::move(next);
    if (moved <= 1e-16 * (1.0 + x.norm())) break;
  }
  return x;
}

}  // namespace detail

inline ProblemInstance make_problem(const std::string& id, const nlohmann::json& params = nlohmann::json::object()) {
  const detail::Params p(params, id);
  std::optional<ProblemInstance> out;
  if (id == "lasso" || id == "l0-ls" || id == "l1-l2-dc") {
    const bool dc = id == "l1-l2-dc";
    auto d = detail::regression_data(p, dc ? 20 : 50, dc ? 40 : 100, dc ? 5 : 10);
    const Eigen::Index n = d.A.cols();
    const double corr = (d.A.transpose() * d.b).lpNorm<Eigen::Infinity>();
    const double lambda = p.number("lambda", id == "l0-ls" ? 0.05 : 0.1 * corr);
    Vector x0 = p.start(n, 0.0);
    SmoothOracle f = make_least_squares(std::move(d.A), std::move(d.b));
    if (id == "lasso") {
      out.emplace(ProblemInstance{CompositeProblem(std::move(f), make_l1_prox(lambda), std::nullopt, n, id),
                                  std::move(x0), d.seed});
    } else if (id == "l0-ls") {
      out.emplace(ProblemInstance{CompositeProblem(std::move(f), make_l0_prox(lambda), std::nullopt, n, id),
                                  std::move(x0), d.seed});
    } else {
      out.emplace(ProblemInstance{CompositeProblem(std::move(f), make_l1_prox(lambda), make_l2_norm(lambda), n, id),
                                  std::move(x0), d.seed});
    }
  } else if (id == "power4-1d") {
    Vector x0 = p.start(1, 1.0);
    CompositeProblem prob(make_power4_1d(), make_zero_prox(), std::nullopt, 1, id);
    prob.set_known_minimizer(Vector::Zero(1));
    out.emplace(ProblemInstance{std::move(prob), std::move(x0), std::nullopt});
  } else if (id == "quad-l1") {
    const std::uint64_t seed = p.seed();
    const Eigen::Index n = p.count("n", 50);
    const Eigen::Index rows = p.count("rows", 2 * n);
    const double mu = p.number("mu", 0.1);
    const double lambda = p.number("lambda", 0.1);
    if (!(mu > 0.0)) throw InvalidInput("problem.params.mu (quad-l1) must be > 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix M(rows, n);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < n; ++j) M(i, j) = normal(rng);
    Matrix Q = M.transpose() * M / static_cast<double>(rows);
    Q = 0.5 * (Q + Q.transpose()).eval();
    Q.diagonal().array() += mu;
    Vector q(n);
    for (Eigen::Index j = 0; j < n; ++j) q[j] = normal(rng);
    Vector x0 = p.start(n, 0.0);
    CompositeProblem prob(make_quadratic(std::move(Q), std::move(q)), make_l1_prox(lambda), std::nullopt, n, id);
    prob.set_known_minimizer(detail::fixed_step_minimizer(prob, x0, *prob.f().lipschitz_hint));
    out.emplace(ProblemInstance{std::move(prob), std::move(x0), seed});
  } else {
    throw InvalidInput("unknown problem id '" + id + "'");
  }
  p.reject_unknown();
  return std::move(*out);
}

}  // namespace kldescent
