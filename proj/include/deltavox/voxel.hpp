// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Voxel grid, point-to-voxel mean aggregation, COO sparse voxel tensors and
// the voxel-to-point gather.

#ifndef DELTAVOX_VOXEL_HPP
#define DELTAVOX_VOXEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "deltavox/errors.hpp"
#include "deltavox/geometry.hpp"
#include "deltavox/parallel.hpp"

namespace deltavox {

using VoxelCoord = std::array<std::int32_t, 3>;

/// Per-point feature rows, one row per point.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct VoxelGridSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 resolution = Vec3::Ones();
  std::array<std::int32_t, 3> dims = {1, 1, 1};
  std::int32_t feature_width = 1;

  bool operator==(const VoxelGridSpec& o) const {
    return origin == o.origin && resolution == o.resolution && dims == o.dims &&
           feature_width == o.feature_width;
  }

  /// X·Y·Z.
  std::int64_t dense_voxels() const {
    return std::int64_t{dims[0]} * std::int64_t{dims[1]} * std::int64_t{dims[2]};
  }

  /// X·Y·Z·C.
  std::int64_t dense_cells() const { return dense_voxels() * std::int64_t{feature_width}; }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (dims[static_cast<std::size_t>(a)] < 1) throw ConfigError("grid dims must be >= 1");
      if (!(resolution[a] > 0.0) || !std::isfinite(resolution[a])) {
        throw ConfigError("grid resolution must be finite and > 0");
      }
      if (!std::isfinite(origin[a])) throw ConfigError("grid origin must be finite");
    }
    if (feature_width < 1) throw ConfigError("feature_width must be >= 1");
    // int32 extents keep X·Y·Z below 2^93 in the worst case; check the
    // product with the channel count against int64 explicitly.
    constexpr auto kMax = static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max());
    const auto cells = static_cast<unsigned __int128>(dims[0]) * static_cast<unsigned __int128>(dims[1]) *
                       static_cast<unsigned __int128>(dims[2]) * static_cast<unsigned __int128>(feature_width);
    if (cells > kMax) throw ConfigError("dense cell count overflows a 64-bit count");
  }

  /// Linearization key (x·Y + y)·Z + z; z varies fastest.
  std::int64_t key(const VoxelCoord& c) const {
    return (std::int64_t{c[0]} * dims[1] + c[1]) * dims[2] + c[2];
  }

  VoxelCoord coord_of_key(std::int64_t k) const {
    const std::int64_t z = k % dims[2];
    const std::int64_t xy = k / dims[2];
    return {static_cast<std::int32_t>(xy / dims[1]), static_cast<std::int32_t>(xy % dims[1]),
            static_cast<std::int32_t>(z)};
  }

  bool contains(const VoxelCoord& c) const {
    for (std::size_t a = 0; a < 3; ++a) {
      if (c[a] < 0 || c[a] >= dims[a]) return false;
    }
    return true;
  }

  /// Voxel holding `p` under half-open cells; nullopt outside the grid.
  std::optional<VoxelCoord> locate(const Vec3& p) const {
    VoxelCoord c{};
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((p[a] - origin[a]) / resolution[a]);
      if (!(f >= 0.0) || f >= static_cast<double>(dims[static_cast<std::size_t>(a)])) {
        return std::nullopt;
      }
      c[static_cast<std::size_t>(a)] = static_cast<std::int32_t>(f);
    }
    return c;
  }

  Vec3 center(const VoxelCoord& c) const {
    return {origin.x() + (c[0] + 0.5) * resolution.x(), origin.y() + (c[1] + 0.5) * resolution.y(),
            origin.z() + (c[2] + 0.5) * resolution.z()};
  }
};

/// Dense X×Y×Z×C array, channel fastest, then z, y, x.
template <class T = double>
struct DenseGrid {
  std::array<std::int32_t, 3> dims = {0, 0, 0};
  std::int32_t channels = 0;
  std::vector<T> data;

  DenseGrid() = default;
  DenseGrid(std::array<std::int32_t, 3> d, std::int32_t c)
      : dims(d), channels(c),
        data(static_cast<std::size_t>(std::int64_t{d[0]} * d[1] * d[2] * c), T{0}) {}

  std::size_t offset(std::int64_t linear_voxel, std::int32_t ch) const {
    return static_cast<std::size_t>(linear_voxel * channels + ch);
  }
  T& at(std::int32_t x, std::int32_t y, std::int32_t z, std::int32_t ch) {
    return data[offset((std::int64_t{x} * dims[1] + y) * dims[2] + z, ch)];
  }
  const T& at(std::int32_t x, std::int32_t y, std::int32_t z, std::int32_t ch) const {
    return data[offset((std::int64_t{x} * dims[1] + y) * dims[2] + z, ch)];
  }
};

/// COO tensor: strictly key-sorted coordinates with one feature row each.
template <class T = double>
class SparseVoxelTensor {
 public:
  using value_type = T;

  SparseVoxelTensor() = default;

  explicit SparseVoxelTensor(VoxelGridSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  /// Takes ownership of already sorted data and validates every invariant.
  SparseVoxelTensor(VoxelGridSpec spec, std::vector<VoxelCoord> coords, std::vector<T> features)
      : spec_(std::move(spec)), coords_(std::move(coords)), features_(std::move(features)) {
    validate();
  }

  /// Builds from arbitrary-order (coord, row) pairs; fails on duplicates.
  static SparseVoxelTensor from_unsorted(VoxelGridSpec spec, std::vector<VoxelCoord> coords,
                                         std::vector<T> features) {
    spec.validate();
    const std::size_t c = static_cast<std::size_t>(spec.feature_width);
    if (features.size() != coords.size() * c) throw InvalidInput("feature row count mismatch");
    std::vector<std::int64_t> keys(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (!spec.contains(coords[i])) throw InvalidInput("voxel coordinate outside grid");
      keys[i] = spec.key(coords[i]);
    }
    const auto perm = stable_sort_permutation(keys);
    std::vector<VoxelCoord> sc(coords.size());
    std::vector<T> sf(features.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      sc[i] = coords[perm[i]];
      std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(perm[i] * c), c,
                  sf.begin() + static_cast<std::ptrdiff_t>(i * c));
    }
    return SparseVoxelTensor(std::move(spec), std::move(sc), std::move(sf));
  }

  /// Trusted constructor for kernels that produce sorted output by construction.
  static SparseVoxelTensor adopt(const VoxelGridSpec& spec, std::vector<VoxelCoord> coords,
                                 std::vector<T> features) {
    SparseVoxelTensor t;
    t.spec_ = spec;
    t.coords_ = std::move(coords);
    t.features_ = std::move(features);
    return t;
  }

  const VoxelGridSpec& spec() const { return spec_; }
  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  std::size_t width() const { return static_cast<std::size_t>(spec_.feature_width); }
  const std::vector<VoxelCoord>& coords() const { return coords_; }
  const std::vector<T>& features() const { return features_; }

  std::span<const T> row(std::size_t i) const {
    return {features_.data() + i * width(), width()};
  }

  /// Row index of `c`, or nullopt when inactive.
  std::optional<std::size_t> find(const VoxelCoord& c) const {
    const std::int64_t k = spec_.key(c);
    auto it = std::lower_bound(coords_.begin(), coords_.end(), k,
                               [this](const VoxelCoord& a, std::int64_t key) { return spec_.key(a) < key; });
    if (it == coords_.end() || *it != c) return std::nullopt;
    return static_cast<std::size_t>(it - coords_.begin());
  }

  /// Throws CorruptionError unless coords are in range, strictly sorted and
  /// the feature buffer holds exactly one row per coordinate.
  void validate() const {
    spec_.validate();
    if (features_.size() != coords_.size() * width()) {
      throw CorruptionError("feature row count does not match coordinate count");
    }
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      if (!spec_.contains(coords_[i])) throw CorruptionError("voxel coordinate outside grid");
      if (i > 0 && spec_.key(coords_[i - 1]) >= spec_.key(coords_[i])) {
        throw CorruptionError("coordinates not strictly increasing at row " + std::to_string(i));
      }
    }
  }

  /// Bytes needed for coordinates (3×i32) plus feature rows.
  std::uint64_t byte_size() const {
    return static_cast<std::uint64_t>(coords_.size()) * (3 * sizeof(std::int32_t) + width() * sizeof(T));
  }

  bool operator==(const SparseVoxelTensor& o) const {
    return spec_ == o.spec_ && coords_ == o.coords_ && features_ == o.features_;
  }

 private:
  VoxelGridSpec spec_;
  std::vector<VoxelCoord> coords_;
  std::vector<T> features_;
};

/// For every input point, the row of its voxel in the tensor, or kDropped.
struct VoxelPointIndex {
  static constexpr std::int64_t kDropped = -1;
  std::vector<std::int64_t> voxel_of_point;

  std::size_t size() const { return voxel_of_point.size(); }
  bool retained(std::size_t i) const { return voxel_of_point[i] != kDropped; }
  std::size_t retained_count() const {
    return static_cast<std::size_t>(
        std::count_if(voxel_of_point.begin(), voxel_of_point.end(), [](auto v) { return v != kDropped; }));
  }
};

enum class FeatureMode {
  Occupancy,    ///< C = 1, value 1.0
  Offset,       ///< C = 4: 1.0 then offset from the voxel center in units of resolution
  Passthrough,  ///< caller-supplied columns
};

inline std::int32_t feature_mode_width(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::Occupancy: return 1;
    case FeatureMode::Offset: return 4;
    case FeatureMode::Passthrough: return -1;
  }
  return -1;
}

/// Hand-crafted per-point features that stand in for a learned point encoder.
inline FeatureMatrix point_features(const PointCloudFrame& frame, const VoxelGridSpec& spec,
                                    FeatureMode mode, const FeatureMatrix* passthrough = nullptr) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(frame.size());
  switch (mode) {
    case FeatureMode::Occupancy: {
      if (spec.feature_width != 1) throw ConfigError("OCCUPANCY features require feature_width 1");
      return FeatureMatrix::Ones(n, 1);
    }
    case FeatureMode::Offset: {
      if (spec.feature_width != 4) throw ConfigError("OFFSET features require feature_width 4");
      FeatureMatrix out(n, 4);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3& p = frame.points[static_cast<std::size_t>(i)];
        out(i, 0) = 1.0;
        for (int a = 0; a < 3; ++a) {
          const double cell = std::floor((p[a] - spec.origin[a]) / spec.resolution[a]);
          const double centre = spec.origin[a] + (cell + 0.5) * spec.resolution[a];
          out(i, a + 1) = (p[a] - centre) / spec.resolution[a];
        }
      }
      return out;
    }
    case FeatureMode::Passthrough: {
      if (passthrough == nullptr) throw ConfigError("PASSTHROUGH features need a column matrix");
      if (passthrough->cols() != spec.feature_width) {
        throw ConfigError("PASSTHROUGH column count does not match feature_width");
      }
      if (passthrough->rows() != n) throw InvalidInput("PASSTHROUGH row count does not match point count");
      return *passthrough;
    }
  }
  throw ConfigError("unknown feature mode");
}

template <class T = double>
struct VoxelizeResult {
  SparseVoxelTensor<T> tensor;
  VoxelPointIndex index;
};

/// Mean-aggregates per-point features into active voxels. Member rows are
/// summed in ascending point index, points outside the grid are dropped.
template <class T = double>
VoxelizeResult<T> voxelize(const PointCloudFrame& frame, const FeatureMatrix& feats,
                           const VoxelGridSpec& spec) {
  spec.validate();
  const std::size_t n = frame.size();
  if (static_cast<std::size_t>(feats.rows()) != n) {
    throw InvalidInput("feature row count does not match point count");
  }
  if (feats.cols() != spec.feature_width) throw ConfigError("feature width does not match grid spec");

  std::vector<std::int64_t> keys(n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Vec3& p = frame.points[i];
      if (!all_finite(p)) {
        keys[i] = std::numeric_limits<std::int64_t>::max();
        continue;
      }
      const auto c = spec.locate(p);
      keys[i] = c ? spec.key(*c) : std::numeric_limits<std::int64_t>::max();
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (!all_finite(frame.points[i])) throw InvalidInput("non-finite coordinate at point " + std::to_string(i));
  }

  const auto perm = stable_sort_permutation(keys);
  const std::size_t c = static_cast<std::size_t>(spec.feature_width);

  VoxelizeResult<T> out;
  out.index.voxel_of_point.assign(n, VoxelPointIndex::kDropped);
  std::vector<VoxelCoord> coords;
  std::vector<T> features;
  std::vector<double> acc(c);

  // Segmented reduction over runs of equal keys.
  std::size_t i = 0;
  while (i < n && keys[perm[i]] != std::numeric_limits<std::int64_t>::max()) {
    const std::int64_t k = keys[perm[i]];
    std::fill(acc.begin(), acc.end(), 0.0);
    std::size_t j = i;
    const auto row = static_cast<std::int64_t>(coords.size());
    for (; j < n && keys[perm[j]] == k; ++j) {
      const auto p = static_cast<Eigen::Index>(perm[j]);
      for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += feats(p, static_cast<Eigen::Index>(ch));
      out.index.voxel_of_point[perm[j]] = row;
    }
    const double count = static_cast<double>(j - i);
    coords.push_back(spec.coord_of_key(k));
    for (std::size_t ch = 0; ch < c; ++ch) features.push_back(static_cast<T>(acc[ch] / count));
    i = j;
  }
  out.tensor = SparseVoxelTensor<T>::adopt(spec, std::move(coords), std::move(features));
  return out;
}

/// Per-point rows taken from each point's voxel; dropped points get zeros.
template <class T>
FeatureMatrix v2p_gather(const SparseVoxelTensor<T>& tensor, const VoxelPointIndex& index) {
  const auto c = static_cast<Eigen::Index>(tensor.width());
  FeatureMatrix out = FeatureMatrix::Zero(static_cast<Eigen::Index>(index.size()), c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::int64_t v = index.voxel_of_point[i];
    if (v == VoxelPointIndex::kDropped) continue;
    if (v < 0 || static_cast<std::size_t>(v) >= tensor.size()) {
      throw CorruptionError("voxel ordinal " + std::to_string(v) + " out of range for point " +
                            std::to_string(i));
    }
    const auto r = tensor.row(static_cast<std::size_t>(v));
    for (Eigen::Index ch = 0; ch < c; ++ch) {
      out(static_cast<Eigen::Index>(i), ch) = static_cast<double>(r[static_cast<std::size_t>(ch)]);
    }
  }
  return out;
}

template <class T>
DenseGrid<T> to_dense(const SparseVoxelTensor<T>& tensor) {
  const auto& spec = tensor.spec();
  DenseGrid<T> grid(spec.dims, spec.feature_width);
  const std::size_t c = tensor.width();
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const std::size_t base = grid.offset(spec.key(tensor.coords()[i]), 0);
    std::copy_n(tensor.features().begin() + static_cast<std::ptrdiff_t>(i * c), c,
                grid.data.begin() + static_cast<std::ptrdiff_t>(base));
  }
  return grid;
}

/// Sparse view of a dense grid; rows that are entirely exact zeros are dropped.
template <class T>
SparseVoxelTensor<T> from_dense(const DenseGrid<T>& grid, const VoxelGridSpec& spec) {
  if (grid.dims != spec.dims || grid.channels != spec.feature_width) {
    throw ConfigError("dense grid shape does not match grid spec");
  }
  const std::size_t c = static_cast<std::size_t>(grid.channels);
  std::vector<VoxelCoord> coords;
  std::vector<T> feats;
  const std::int64_t voxels = spec.dense_voxels();
  for (std::int64_t k = 0; k < voxels; ++k) {
    const auto first = grid.data.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::int64_t>(c));
    if (std::all_of(first, first + static_cast<std::ptrdiff_t>(c), [](T v) { return v == T{0}; })) continue;
    coords.push_back(spec.coord_of_key(k));
    feats.insert(feats.end(), first, first + static_cast<std::ptrdiff_t>(c));
  }
  return SparseVoxelTensor<T>::adopt(spec, std::move(coords), std::move(feats));
}

struct StorageReport {
  std::int64_t active = 0;
  std::int64_t dense = 0;
  /// active / dense.
  double fraction = 0.0;
  /// active / dense × 100.
  double ratio_pct = 0.0;

  /// Percentage rounded to two decimals, as tabulated ("0.35").
  std::string ratio_pct_text() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", ratio_pct);
    return buf;
  }
};

inline StorageReport storage_report(const VoxelGridSpec& spec, std::int64_t active) {
  StorageReport r;
  r.dense = spec.dense_voxels();
  if (active < 0 || active > r.dense) throw InvalidInput("active voxel count outside [0, dense]");
  r.active = active;
  r.fraction = static_cast<double>(active) / static_cast<double>(r.dense);
  r.ratio_pct = r.fraction * 100.0;
  return r;
}

}  // namespace deltavox

#endif  // DELTAVOX_VOXEL_HPP
