#include "kldescent/catalog.hpp"
#include "kldescent/npg_major.hpp"
#include "kldescent/pgenls.hpp"
#include "kldescent/trace_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using kldescent::Trace;

namespace {

class TraceIo : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kldescent_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void expect_same_rows(const Trace& a, const Trace& b) {
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    const auto& r = a.rows[k];
    const auto& s = b.rows[k];
    EXPECT_EQ(r.k, s.k);
    EXPECT_EQ(r.x, s.x);
    EXPECT_EQ(r.F, s.F);
    EXPECT_EQ(r.merit, s.merit);
    EXPECT_EQ(r.gamma, s.gamma);
    EXPECT_EQ(r.beta, s.beta);
    EXPECT_EQ(r.j_inner, s.j_inner);
    EXPECT_EQ(r.ell, s.ell);
    EXPECT_EQ(r.step_norm, s.step_norm);
    if (std::isnan(r.residual))
      EXPECT_TRUE(std::isnan(s.residual));
    else
      EXPECT_EQ(r.residual, s.residual);
  }
}

}  // namespace

TEST_F(TraceIo, InlineRoundTripIsExact) {
  const auto inst = kldescent::make_problem("power4-1d");
  kldescent::PgenlsConfig cfg;
  cfg.max_outer = 200;
  const Trace t = kldescent::pgenls_solve(inst.problem, inst.x0, cfg);
  const auto csv = dir_ / "trace.csv";
  kldescent::write_trace(csv, t);
  EXPECT_FALSE(fs::exists(kldescent::sidecar_path(csv)));
  bool has_meta = false;
  const Trace u = kldescent::read_trace(csv, &has_meta);
  EXPECT_TRUE(has_meta);
  expect_same_rows(t, u);
  EXPECT_EQ(u.meta.algorithm, "pgenls");
  EXPECT_EQ(u.meta.m, t.meta.m);
  EXPECT_EQ(u.meta.h1_constant, t.meta.h1_constant);
  EXPECT_EQ(u.meta.step_block, t.meta.step_block);
  EXPECT_EQ(u.meta.phi_column, t.meta.phi_column);
  EXPECT_EQ(u.meta.terminated_by, t.meta.terminated_by);
  EXPECT_EQ(u.meta.lipschitz, t.meta.lipschitz);
  EXPECT_EQ(u.meta.rate_reference, t.meta.rate_reference);
}

TEST_F(TraceIo, SidecarRoundTripIsExact) {
  const auto inst = kldescent::make_problem("lasso", {{"seed", 2}});
  const Trace t = kldescent::npg_solve(inst.problem, inst.x0, {});
  const auto csv = dir_ / "trace.csv";
  kldescent::write_trace(csv, t);
  ASSERT_TRUE(fs::exists(kldescent::sidecar_path(csv)));
  const Trace u = kldescent::read_trace(csv);
  expect_same_rows(t, u);
  EXPECT_EQ(u.meta.problem_id, "lasso");
}

TEST_F(TraceIo, RewriteIsByteIdentical) {
  const auto inst = kldescent::make_problem("quad-l1", {{"seed", 1}});
  const Trace t = kldescent::npg_solve(inst.problem, inst.x0, {});
  kldescent::write_trace(dir_ / "a.csv", t);
  kldescent::write_trace(dir_ / "b.csv", kldescent::read_trace(dir_ / "a.csv"));
  EXPECT_EQ(slurp(dir_ / "a.csv"), slurp(dir_ / "b.csv"));
  EXPECT_EQ(slurp(dir_ / "a.bin"), slurp(dir_ / "b.bin"));
}

TEST_F(TraceIo, NonFiniteValuesSurvive) {
  EXPECT_EQ(kldescent::format_double(kldescent::kNaN), "nan");
  EXPECT_EQ(kldescent::format_double(kldescent::kInfinity), "inf");
  EXPECT_EQ(kldescent::format_double(-kldescent::kInfinity), "-inf");
  EXPECT_EQ(kldescent::format_double(0.1), "0.10000000000000001");
}

TEST_F(TraceIo, MalformedLineIsReported) {
  const auto csv = dir_ / "bad.csv";
  std::ofstream(csv) << kldescent::kTraceHeader << ",x_0\n"
                     << "0,1,1,0,0,0,0,0,nan,1\n"
                     << "1,0.5,0.5,2,0,0,1,oops,0.1,0.5\n";
  try {
    (void)kldescent::read_trace(csv);
    FAIL() << "expected a format error";
  } catch (const kldescent::TraceFormatError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("step_norm"), std::string::npos);
  }
}

TEST_F(TraceIo, RaggedAndHeaderErrors) {
  std::ofstream(dir_ / "ragged.csv") << kldescent::kTraceHeader << "\n0,1,1,0,0,0,0,0\n";
  EXPECT_THROW(kldescent::read_trace(dir_ / "ragged.csv"), kldescent::TraceFormatError);
  std::ofstream(dir_ / "header.csv") << "k,F\n0,1\n";
  EXPECT_THROW(kldescent::read_trace(dir_ / "header.csv"), kldescent::TraceFormatError);
  std::ofstream(dir_ / "cols.csv") << kldescent::kTraceHeader << ",y_0\n0,1,1,0,0,0,0,0,nan,1\n";
  EXPECT_THROW(kldescent::read_trace(dir_ / "cols.csv"), kldescent::TraceFormatError);
  std::ofstream(dir_ / "empty.csv") << kldescent::kTraceHeader << "\n";
  EXPECT_THROW(kldescent::read_trace(dir_ / "empty.csv"), kldescent::TraceFormatError);
  EXPECT_THROW(kldescent::read_trace(dir_ / "missing.csv"), kldescent::TraceFormatError);
}

TEST_F(TraceIo, ExternalTraceHasDefaultMeta) {
  std::ofstream(dir_ / "ext.csv") << kldescent::kTraceHeader << ",x_0\n"
                                  << "0,1,1,0,0,0,0,0,nan,1\n"
                                  << "1,0.25,0.25,2,0,0,1,0.5,0.1,0.5\n";
  bool has_meta = true;
  const Trace t = kldescent::read_trace(dir_ / "ext.csv", &has_meta);
  EXPECT_FALSE(has_meta);
  EXPECT_EQ(t.meta.algorithm, "external");
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1].x[0], 0.5);
}

TEST_F(TraceIo, TruncatedSidecarIsRejected) {
  const auto inst = kldescent::make_problem("lasso", {{"seed", 0}});
  kldescent::NpgConfig cfg;
  cfg.max_outer = 5;
  kldescent::write_trace(dir_ / "t.csv", kldescent::npg_solve(inst.problem, inst.x0, cfg));
  fs::resize_file(dir_ / "t.bin", fs::file_size(dir_ / "t.bin") - 8);
  EXPECT_THROW(kldescent::read_trace(dir_ / "t.csv"), kldescent::TraceFormatError);
}
