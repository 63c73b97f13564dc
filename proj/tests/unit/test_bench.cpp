#include <sstream>

#include <gtest/gtest.h>

#include "deltavox/bench.hpp"

using namespace deltavox;
using namespace deltavox::bench;

namespace {

std::size_t columns(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

BenchCase small_case() {
  BenchCase c;
  c.dims = {64, 64, 8};
  c.channels = 4;
  c.occupancy = 0.02;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(BenchBytes, Formulas) {
  BenchCase c;
  EXPECT_EQ(dense_bytes(c), 512ull * 512 * 32 * 16 * 4);
  EXPECT_EQ(sparse_bytes(10, 16), 10ull * (12 + 64));
  EXPECT_EQ(dense_footprint(c), 3 * dense_bytes(c));
}

TEST(BenchBytes, ReferenceCaseMemoryRatioBound) {
  // Worst case for the output: every mover lands on a fresh voxel in each past frame.
  const BenchCase c;
  const auto active = std::llround(c.occupancy * 512.0 * 512 * 32);
  const auto worst = active + c.n_frames * std::llround(c.motion_fraction * static_cast<double>(active));
  const double ratio = static_cast<double>(dense_bytes(c)) / static_cast<double>(sparse_bytes(worst, c.channels));
  EXPECT_GE(ratio, 20.0);
}

TEST(BenchInputsTest, ShapesAndDeterminism) {
  const auto c = small_case();
  const auto a = make_inputs(c);
  const auto b = make_inputs(c);
  EXPECT_EQ(a.current.size(), static_cast<std::size_t>(std::llround(0.02 * 64 * 64 * 8)));
  ASSERT_EQ(a.past.size(), 2u);
  EXPECT_EQ(a.current, b.current);
  EXPECT_EQ(a.past[1], b.past[1]);
  for (const auto& p : a.past) EXPECT_NO_THROW(p.validate());
}

TEST(BenchInputsTest, FullOccupancyPath) {
  auto c = small_case();
  c.dims = {8, 8, 4};
  c.occupancy = 1.0;
  c.motion_fraction = 0.0;
  const auto in = make_inputs(c);
  EXPECT_EQ(in.current.size(), 256u);
  EXPECT_EQ(in.past[0].size(), 256u);
}

TEST(RunCase, AgreesWithOracleAndFillsFields) {
  const auto r = run_case(small_case());
  EXPECT_FALSE(r.skipped);
  EXPECT_LE(r.max_abs_error, 1e-9);
  EXPECT_GT(r.sparse.median_ms, 0.0);
  EXPECT_GE(r.sparse.median_ms, r.sparse.min_ms);
  EXPECT_GE(r.active_output, r.active_current);
  EXPECT_EQ(r.bytes_sparse, sparse_bytes(r.active_output, 4));
  EXPECT_DOUBLE_EQ(r.storage_ratio_pct, 100.0 * static_cast<double>(r.active_output) / (64.0 * 64 * 8));
}

TEST(RunCase, DenseOccupancyMemoryRatioBelowOne) {
  auto c = small_case();
  c.dims = {16, 16, 8};
  c.occupancy = 1.0;
  const auto r = run_case(c);
  EXPECT_LT(r.mem_ratio, 1.0);
}

TEST(RunCase, StorageAnchor) {
  BenchCase c;
  c.channels = 1;
  c.occupancy = 29475.0 / 8388608.0;
  c.motion_fraction = 0.0;
  const auto r = run_case(c);
  EXPECT_EQ(r.active_output, 29475);
  const auto row = csv_row(r);
  EXPECT_EQ(row.substr(row.rfind(',') + 1), "0.35");
}

TEST(RunCase, BudgetSkip) {
  const auto r = run_case(BenchCase{}, 1024);
  EXPECT_TRUE(r.skipped);
  EXPECT_NE(r.skip_reason.find("budget"), std::string::npos);
  EXPECT_EQ(to_csv({r}), std::string(kCsvHeader) + "\n");
}

TEST(Csv, TwelveColumns) {
  EXPECT_EQ(columns(kCsvHeader), 12u);
  const auto csv = to_csv({run_case(small_case())});
  std::istringstream in(csv);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(columns(line), 12u);
    ++lines;
  }
  EXPECT_EQ(lines, 2);
  EXPECT_NE(csv.find("\n64x64x8,4,0.02,2,0.5,"), std::string::npos);
}

TEST(Sweep, NormalizationAndWidth) {
  const auto rows = scaling_sweep(small_case(), {1, 2, 5});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[1].rel_time, 1.0);
  EXPECT_DOUBLE_EQ(rows[1].rel_memory, 1.0);
  for (const auto& r : rows) EXPECT_EQ(r.feature_width, 4);
  // More history widens the union only through movers.
  EXPECT_LE(rows[0].active_union, rows[2].active_union);

  const auto single = scaling_sweep(small_case(), {5});
  EXPECT_DOUBLE_EQ(single[0].rel_time, 1.0);
  EXPECT_EQ(single[0].active_union, rows[2].active_union);
}

TEST(Sweep, StaticSceneHasConstantUnion) {
  auto c = small_case();
  c.motion_fraction = 0.0;
  const auto rows = scaling_sweep(c, {1, 2, 10, 15});
  for (const auto& r : rows) {
    EXPECT_EQ(r.active_union, rows[0].active_union);
    EXPECT_DOUBLE_EQ(r.rel_memory, 1.0);
  }
}

TEST(BenchCaseTest, Validation) {
  auto c = small_case();
  c.occupancy = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_case();
  c.repetitions = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_case();
  c.n_frames = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(small_case().dims_text(), "64x64x8");
}
