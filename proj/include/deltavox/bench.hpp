// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Sparse-vs-dense benchmark of the temporal delta scheme.
//
// Memory is counted analytically:
//   dense  = X·Y·Z·C·sizeof(float)
//   sparse = V·(3·sizeof(int32) + C·sizeof(float)),  V = active voxels of the output

#ifndef DELTAVOX_BENCH_HPP
#define DELTAVOX_BENCH_HPP

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "deltavox/delta.hpp"
#include "deltavox/errors.hpp"
#include "deltavox/synth.hpp"
#include "deltavox/voxel.hpp"

namespace deltavox::bench {

using BenchScalar = float;

struct BenchCase {
  std::array<std::int32_t, 3> dims = {512, 512, 32};
  std::int32_t channels = 16;
  /// Active fraction of the current frame, in (0, 1].
  double occupancy = 0.005;
  /// Past frames N.
  int n_frames = 2;
  double decay = 0.5;
  int repetitions = 3;
  std::uint64_t seed = 0;
  /// Fraction of voxels belonging to movers; past frame n shifts them n cells along x.
  double motion_fraction = 0.1;

  void validate() const {
    VoxelGridSpec{Vec3::Zero(), Vec3::Ones(), dims, channels}.validate();
    if (!(occupancy > 0.0 && occupancy <= 1.0)) throw ConfigError("occupancy must lie in (0, 1]");
    if (repetitions < 3) throw ConfigError("repetitions must be >= 3");
    if (!(motion_fraction >= 0.0 && motion_fraction <= 1.0)) throw ConfigError("motion_fraction must lie in [0, 1]");
    DeltaConfig{n_frames, decay}.validate();
  }

  VoxelGridSpec grid() const { return VoxelGridSpec{Vec3::Zero(), Vec3::Ones(), dims, channels}; }

  std::string dims_text() const {
    return std::to_string(dims[0]) + "x" + std::to_string(dims[1]) + "x" + std::to_string(dims[2]);
  }
};

struct Timing {
  double median_ms = 0.0;
  double min_ms = 0.0;
};

struct BenchResult {
  BenchCase config;
  bool skipped = false;
  std::string skip_reason;
  Timing sparse;
  Timing dense;
  double speedup = 0.0;
  std::int64_t active_current = 0;
  std::int64_t active_output = 0;
  std::uint64_t bytes_sparse = 0;
  std::uint64_t bytes_dense = 0;
  double mem_ratio = 0.0;
  double storage_ratio_pct = 0.0;
  double max_abs_error = 0.0;
};

inline std::uint64_t dense_bytes(const BenchCase& c) {
  return static_cast<std::uint64_t>(c.grid().dense_cells()) * sizeof(BenchScalar);
}

inline std::uint64_t sparse_bytes(std::int64_t active, std::int32_t channels) {
  return static_cast<std::uint64_t>(active) * (3 * sizeof(std::int32_t) + static_cast<std::uint64_t>(channels) * sizeof(BenchScalar));
}

/// Peak memory of the dense reference: current, one past frame, accumulator.
inline std::uint64_t dense_footprint(const BenchCase& c) { return 3 * dense_bytes(c); }

inline constexpr std::uint64_t kDefaultBudget = 2ull << 30;

struct BenchInputs {
  SparseVoxelTensor<BenchScalar> current;
  std::vector<SparseVoxelTensor<BenchScalar>> past;
};

/// Synthetic current frame plus N past frames. A fixed subset of voxels
/// (the movers) sits n cells further along -x in past frame n; the rest is
/// static. Features are fresh uniform draws in [-1, 1) per frame.
inline BenchInputs make_inputs(const BenchCase& c) {
  c.validate();
  const VoxelGridSpec spec = c.grid();
  const std::int64_t total = spec.dense_voxels();
  const auto active = std::max<std::int64_t>(1, std::llround(c.occupancy * static_cast<double>(total)));
  std::mt19937_64 rng(c.seed);

  std::vector<std::int64_t> keys;
  keys.reserve(static_cast<std::size_t>(active));
  if (c.occupancy <= 0.5) {
    std::unordered_set<std::int64_t> seen;
    seen.reserve(static_cast<std::size_t>(active) * 2);
    while (static_cast<std::int64_t>(keys.size()) < active) {
      const auto k = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(total));
      if (seen.insert(k).second) keys.push_back(k);
    }
  } else {
    std::vector<std::int64_t> all(static_cast<std::size_t>(total));
    for (std::int64_t k = 0; k < total; ++k) all[static_cast<std::size_t>(k)] = k;
    for (std::int64_t i = 0; i < active; ++i) {
      const auto j = i + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(total - i));
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
    }
    keys.assign(all.begin(), all.begin() + active);
  }
  const auto movers = static_cast<std::size_t>(std::llround(c.motion_fraction * static_cast<double>(active)));

  const std::size_t ch = static_cast<std::size_t>(c.channels);
  auto features = [&](std::size_t rows) {
    std::vector<BenchScalar> f(rows * ch);
    for (auto& v : f) v = static_cast<BenchScalar>(detail::uniform(rng, -1.0, 1.0));
    return f;
  };
  auto build = [&](int shift) {
    std::vector<VoxelCoord> coords;
    coords.reserve(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      VoxelCoord co = spec.coord_of_key(keys[i]);
      if (i < movers) {
        co[0] -= shift;
        if (co[0] < 0) continue;
      }
      coords.push_back(co);
    }
    // Shifted movers may land on a static voxel; keep the first occurrence.
    std::vector<std::int64_t> k(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) k[i] = spec.key(coords[i]);
    const auto perm = stable_sort_permutation(k);
    std::vector<VoxelCoord> sorted;
    sorted.reserve(coords.size());
    std::int64_t prev = -1;
    for (auto p : perm) {
      if (k[p] == prev) continue;
      prev = k[p];
      sorted.push_back(coords[p]);
    }
    auto f = features(sorted.size());
    return SparseVoxelTensor<BenchScalar>::adopt(spec, std::move(sorted), std::move(f));
  };

  BenchInputs in;
  in.current = build(0);
  for (int n = 1; n <= c.n_frames; ++n) in.past.push_back(build(n));
  return in;
}

namespace detail {

template <class Fn>
double time_ms(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

inline Timing summarize(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  Timing t;
  t.min_ms = samples.front();
  const std::size_t m = samples.size() / 2;
  t.median_ms = samples.size() % 2 ? samples[m] : 0.5 * (samples[m - 1] + samples[m]);
  return t;
}

}  // namespace detail

/// Runs one case: one untimed warm-up of each path, then `repetitions` timed
/// runs. The sparse output is compared against the dense oracle cell by cell.
inline BenchResult run_case(const BenchCase& c, std::uint64_t budget = kDefaultBudget) {
  c.validate();
  BenchResult r;
  r.config = c;
  r.bytes_dense = dense_bytes(c);
  if (dense_footprint(c) > budget) {
    r.skipped = true;
    r.skip_reason = "dense footprint " + std::to_string(dense_footprint(c)) + " B exceeds budget " +
                    std::to_string(budget) + " B";
    return r;
  }
  const auto in = make_inputs(c);
  const DeltaConfig cfg{c.n_frames, c.decay};

  auto sparse = delta_scheme(in.current, in.past, cfg);
  {
    auto dense = dense_delta_oracle(in.current, in.past, cfg);
    r.max_abs_error = max_abs_difference(sparse, dense);
  }
  if (r.max_abs_error > 1e-9) {
    throw CorruptionError("sparse delta disagrees with dense oracle by " + std::to_string(r.max_abs_error));
  }

  std::vector<double> ts;
  std::vector<double> td;
  for (int rep = 0; rep < c.repetitions; ++rep) {
    ts.push_back(detail::time_ms([&] { sparse = delta_scheme(in.current, in.past, cfg); }));
    td.push_back(detail::time_ms([&] {
      auto dense = dense_delta_oracle(in.current, in.past, cfg);
      (void)dense;
    }));
  }
  r.sparse = detail::summarize(ts);
  r.dense = detail::summarize(td);
  r.speedup = r.sparse.median_ms > 0.0 ? r.dense.median_ms / r.sparse.median_ms : 0.0;
  r.active_current = static_cast<std::int64_t>(in.current.size());
  r.active_output = static_cast<std::int64_t>(sparse.size());
  r.bytes_sparse = sparse_bytes(r.active_output, c.channels);
  r.mem_ratio = r.bytes_sparse > 0 ? static_cast<double>(r.bytes_dense) / static_cast<double>(r.bytes_sparse) : 0.0;
  r.storage_ratio_pct = storage_report(c.grid(), r.active_output).ratio_pct;
  return r;
}

/// Cases run one after another.
inline std::vector<BenchResult> run_bench(const std::vector<BenchCase>& cases, std::uint64_t budget = kDefaultBudget) {
  std::vector<BenchResult> out;
  out.reserve(cases.size());
  for (const auto& c : cases) out.push_back(run_case(c, budget));
  return out;
}

inline const char* kCsvHeader =
    "dims,C,occupancy,N,lambda,t_sparse_ms,t_dense_ms,speedup,bytes_sparse,bytes_dense,mem_ratio,storage_ratio_pct";

inline std::string csv_row(const BenchResult& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%d,%.6g,%d,%.6g,%.3f,%.3f,%.2f,%llu,%llu,%.2f,%.2f",
                r.config.dims_text().c_str(), r.config.channels, r.config.occupancy, r.config.n_frames,
                r.config.decay, r.sparse.median_ms, r.dense.median_ms, r.speedup,
                static_cast<unsigned long long>(r.bytes_sparse), static_cast<unsigned long long>(r.bytes_dense),
                r.mem_ratio, r.storage_ratio_pct);
  return buf;
}

/// Header plus one row per executed case; skipped cases are left out.
inline std::string to_csv(const std::vector<BenchResult>& results) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : results) {
    if (!r.skipped) out += csv_row(r) + "\n";
  }
  return out;
}

struct SweepRow {
  int n_frames = 0;
  std::int64_t active_union = 0;
  std::uint64_t delta_feature_bytes = 0;
  std::int32_t feature_width = 0;
  double t_sparse_ms = 0.0;
  double rel_time = 0.0;
  double rel_memory = 0.0;
};

/// Sparse delta cost against N. Rows are normalized to the N = 2 row when
/// the list contains one, otherwise to the first row.
inline std::vector<SweepRow> scaling_sweep(const BenchCase& base, const std::vector<int>& n_frames_list) {
  std::vector<SweepRow> rows;
  for (int n : n_frames_list) {
    BenchCase c = base;
    c.n_frames = n;
    c.validate();
    const auto in = make_inputs(c);
    const DeltaConfig cfg{n, c.decay};
    SparseVoxelTensor<BenchScalar> out = delta_scheme(in.current, in.past, cfg);
    std::vector<double> ts;
    for (int rep = 0; rep < c.repetitions; ++rep) {
      ts.push_back(detail::time_ms([&] { out = delta_scheme(in.current, in.past, cfg); }));
    }
    SweepRow row;
    row.n_frames = n;
    row.active_union = static_cast<std::int64_t>(out.size());
    row.feature_width = static_cast<std::int32_t>(out.width());
    row.delta_feature_bytes = static_cast<std::uint64_t>(out.size()) * out.width() * sizeof(BenchScalar);
    row.t_sparse_ms = detail::summarize(ts).median_ms;
    rows.push_back(row);
  }
  if (rows.empty()) return rows;
  auto ref = std::find_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.n_frames == 2; });
  if (ref == rows.end()) ref = rows.begin();
  const SweepRow reference = *ref;
  for (auto& r : rows) {
    r.rel_time = reference.t_sparse_ms > 0.0 ? r.t_sparse_ms / reference.t_sparse_ms : 1.0;
    r.rel_memory = reference.delta_feature_bytes > 0
                       ? static_cast<double>(r.delta_feature_bytes) / static_cast<double>(reference.delta_feature_bytes)
                       : 1.0;
  }
  return rows;
}

}  // namespace deltavox::bench

#endif  // DELTAVOX_BENCH_HPP
