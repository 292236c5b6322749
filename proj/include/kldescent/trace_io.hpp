#pragma once

// Trace files.
//
//   <stem>.csv       k,F,merit,gamma,beta,j_inner,ell,step_norm,residual[,x_0..x_{n-1}]
//   <stem>.bin       iterates when n > 20: "KLTRACE1", u32 n, u32 rows, then
//                    row-major little-endian float64
//   <stem>.meta.json solver metadata needed to re-audit the trace

#include "kldescent/core.hpp"
#include "kldescent/trace.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace kldescent {

inline constexpr std::size_t kInlineIterateLimit = 20;
inline constexpr std::array<char, 8> kSidecarMagic = {'K', 'L', 'T', 'R', 'A', 'C', 'E', '1'};
inline constexpr const char* kTraceHeader = "k,F,merit,gamma,beta,j_inner,ell,step_norm,residual";

/// Malformed trace file; line() is 1-based, 0 when not line-specific.
class TraceFormatError : public InvalidInput {
 public:
  TraceFormatError(const std::string& what, std::size_t line) : InvalidInput(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  return p.replace_extension(".bin");
}

inline std::filesystem::path meta_path(const std::filesystem::path& csv) {
  auto p = csv;
  return p.replace_extension(".meta.json");
}

inline nlohmann::json meta_to_json(const TraceMeta& meta, std::size_t n, std::size_t rows) {
  nlohmann::json j;
  j["algorithm"] = meta.algorithm;
  j["problem_id"] = meta.problem_id;
  j["seed"] = meta.seed ? nlohmann::json(*meta.seed) : nlohmann::json(nullptr);
  j["m"] = meta.m;
  j["h1_constant"] = meta.h1_constant;
  j["delta"] = meta.delta;
  j["step_block"] = to_string(meta.step_block);
  j["phi_column"] = to_string(meta.phi_column);
  j["lipschitz"] = meta.lipschitz ? nlohmann::json(*meta.lipschitz) : nlohmann::json(nullptr);
  j["lipschitz_source"] = meta.lipschitz_source;
  if (meta.rate_reference) {
    j["rate_reference"] = std::vector<double>(meta.rate_reference->data(),
                                              meta.rate_reference->data() + meta.rate_reference->size());
  } else {
    j["rate_reference"] = nullptr;
  }
  j["terminated_by"] = meta.terminated_by;
  j["warnings"] = meta.warnings;
  j["config"] = nlohmann::json::parse(meta.config_json);
  j["dimension"] = n;
  j["rows"] = rows;
  return j;
}

inline TraceMeta meta_from_json(const nlohmann::json& j) {
  TraceMeta meta;
  try {
    meta.algorithm = j.value("algorithm", std::string("external"));
    meta.problem_id = j.value("problem_id", std::string());
    if (j.contains("seed") && !j["seed"].is_null()) meta.seed = j["seed"].get<std::uint64_t>();
    meta.m = j.at("m").get<int>();
    meta.h1_constant = j.at("h1_constant").get<double>();
    meta.delta = j.value("delta", 0.0);
    const auto block = j.value("step_block", std::string("x"));
    if (block != "x" && block != "z") throw InvalidInput("meta: step_block must be x or z");
    meta.step_block = block == "x" ? StepBlock::x : StepBlock::z;
    const auto phi = j.value("phi_column", std::string("F"));
    if (phi != "F" && phi != "merit") throw InvalidInput("meta: phi_column must be F or merit");
    meta.phi_column = phi == "F" ? PhiColumn::F : PhiColumn::merit;
    if (j.contains("lipschitz") && !j["lipschitz"].is_null()) meta.lipschitz = j["lipschitz"].get<double>();
    meta.lipschitz_source = j.value("lipschitz_source", std::string(meta.lipschitz ? "hint" : "none"));
    if (j.contains("rate_reference") && !j["rate_reference"].is_null()) {
      const auto v = j["rate_reference"].get<std::vector<double>>();
      meta.rate_reference = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    meta.terminated_by = j.value("terminated_by", std::string("max_outer"));
    if (j.contains("warnings")) meta.warnings = j["warnings"].get<std::vector<std::string>>();
    meta.config_json = j.contains("config") ? j["config"].dump() : "{}";
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("meta: ") + e.what());
  }
  return meta;
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, std::size_t line, const char* column) {
  if (s.empty()) throw TraceFormatError(std::string("empty ") + column + " at line " + std::to_string(line), line);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw TraceFormatError("bad number '" + s + "' in column " + column + " at line " + std::to_string(line), line);
  return v;
}

inline std::int64_t parse_int(const std::string& s, std::size_t line, const char* column) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw TraceFormatError("bad integer '" + s + "' in column " + column + " at line " + std::to_string(line), line);
  return v;
}

}  // namespace detail

/// Writes the CSV, the metadata and, for n > 20, the iterate sidecar.
inline void write_trace(const std::filesystem::path& csv, const Trace& trace) {
  const std::size_t n = static_cast<std::size_t>(trace.dimension());
  const bool inline_x = n <= kInlineIterateLimit;
  {
    std::ofstream os(csv, std::ios::binary);
    if (!os) throw InvalidInput("cannot write " + csv.string());
    os << kTraceHeader;
    if (inline_x)
      for (std::size_t i = 0; i < n; ++i) os << ",x_" << i;
    os << '\n';
    for (const auto& r : trace.rows) {
      os << r.k << ',' << format_double(r.F) << ',' << format_double(r.merit) << ',' << format_double(r.gamma) << ','
         << format_double(r.beta) << ',' << r.j_inner << ',' << r.ell << ',' << format_double(r.step_norm) << ','
         << format_double(r.residual);
      if (inline_x)
        for (Eigen::Index i = 0; i < r.x.size(); ++i) os << ',' << format_double(r.x[i]);
      os << '\n';
    }
    if (!os) throw InvalidInput("write failed for " + csv.string());
  }
  const auto bin = sidecar_path(csv);
  if (!inline_x) {
    std::ofstream os(bin, std::ios::binary);
    if (!os) throw InvalidInput("cannot write " + bin.string());
    os.write(kSidecarMagic.data(), kSidecarMagic.size());
    detail::put_u32(os, static_cast<std::uint32_t>(n));
    detail::put_u32(os, static_cast<std::uint32_t>(trace.rows.size()));
    for (const auto& r : trace.rows)
      for (Eigen::Index i = 0; i < r.x.size(); ++i) detail::put_f64(os, r.x[i]);
    if (!os) throw InvalidInput("write failed for " + bin.string());
  } else {
    std::error_code ec;
    std::filesystem::remove(bin, ec);
  }
  std::ofstream ms(meta_path(csv));
  if (!ms) throw InvalidInput("cannot write " + meta_path(csv).string());
  ms << meta_to_json(trace.meta, n, trace.rows.size()).dump(2) << '\n';
}

inline std::vector<Vector> read_sidecar(const std::filesystem::path& bin, std::size_t expected_rows) {
  std::ifstream is(bin, std::ios::binary);
  if (!is) throw TraceFormatError("cannot open sidecar " + bin.string(), 0);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kSidecarMagic.data(), 8) != 0)
    throw TraceFormatError("sidecar " + bin.string() + ": bad header", 0);
  const std::uint32_t n = detail::get_u32(bytes.data() + 8);
  const std::uint32_t rows = detail::get_u32(bytes.data() + 12);
  if (rows != expected_rows)
    throw TraceFormatError("sidecar holds " + std::to_string(rows) + " rows, CSV " + std::to_string(expected_rows), 0);
  if (bytes.size() != 16 + 8ull * n * rows) throw TraceFormatError("sidecar " + bin.string() + ": truncated", 0);
  std::vector<Vector> xs(rows, Vector(n));
  const unsigned char* p = bytes.data() + 16;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t i = 0; i < n; ++i, p += 8) xs[r][i] = detail::get_f64(p);
  return xs;
}

/// Reads a trace written by write_trace or produced externally. Without a
/// metadata file the returned meta has algorithm "external" and the caller
/// must supply m and the H1 constant.
inline Trace read_trace(const std::filesystem::path& csv, bool* has_meta = nullptr) {
  std::ifstream is(csv);
  if (!is) throw TraceFormatError("cannot open " + csv.string(), 0);
  std::string line;
  if (!std::getline(is, line)) throw TraceFormatError("empty trace file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv(line);
  const auto fixed = detail::split_csv(kTraceHeader);
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
    throw TraceFormatError(std::string("header must start with ") + kTraceHeader, 1);
  const std::size_t n_inline = header.size() - fixed.size();
  for (std::size_t i = 0; i < n_inline; ++i)
    if (header[fixed.size() + i] != "x_" + std::to_string(i))
      throw TraceFormatError("unexpected column '" + header[fixed.size() + i] + "'", 1);

  Trace trace;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw TraceFormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(cells.size()),
                             lineno);
    IterateRecord r;
    r.k = detail::parse_int(cells[0], lineno, "k");
    r.F = detail::parse_double(cells[1], lineno, "F");
    r.merit = detail::parse_double(cells[2], lineno, "merit");
    r.gamma = detail::parse_double(cells[3], lineno, "gamma");
    r.beta = detail::parse_double(cells[4], lineno, "beta");
    r.j_inner = static_cast<int>(detail::parse_int(cells[5], lineno, "j_inner"));
    r.ell = detail::parse_int(cells[6], lineno, "ell");
    r.step_norm = detail::parse_double(cells[7], lineno, "step_norm");
    r.residual = detail::parse_double(cells[8], lineno, "residual");
    r.x.resize(static_cast<Eigen::Index>(n_inline));
    for (std::size_t i = 0; i < n_inline; ++i) r.x[i] = detail::parse_double(cells[fixed.size() + i], lineno, "x");
    trace.rows.push_back(std::move(r));
  }
  if (trace.rows.empty()) throw TraceFormatError("trace has no data rows", lineno);

  const auto bin = sidecar_path(csv);
  if (n_inline == 0 && std::filesystem::exists(bin)) {
    auto xs = read_sidecar(bin, trace.rows.size());
    for (std::size_t r = 0; r < xs.size(); ++r) trace.rows[r].x = std::move(xs[r]);
  }

  const auto mp = meta_path(csv);
  const bool found = std::filesystem::exists(mp);
  if (has_meta) *has_meta = found;
  if (found) {
    std::ifstream ms(mp);
    nlohmann::json j;
    try {
      ms >> j;
    } catch (const nlohmann::json::exception& e) {
      throw TraceFormatError(mp.string() + ": " + e.what(), 0);
    }
    trace.meta = meta_from_json(j);
  }
  return trace;
}

}  // namespace kldescent
