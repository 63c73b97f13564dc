// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Temporal delta features over sparse voxel tensors.
//
// The multi-frame feature is
//
//   D_delta = sum_{n=1..N} lambda^(n-1) (D_t - D_{t-n}) / N
//
// evaluated with two sparse primitives: a key-ordered merge of two COO
// streams followed by a reduction over runs of equal keys. Differencing uses
// the subtracting variant, fusion of the weighted differences the adding one.

#ifndef DELTAVOX_DELTA_HPP
#define DELTAVOX_DELTA_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "deltavox/errors.hpp"
#include "deltavox/parallel.hpp"
#include "deltavox/voxel.hpp"

namespace deltavox {

struct DeltaConfig {
  int n_past = 1;
  double decay = 1.0;

  void validate() const {
    if (n_past < 1) throw ConfigError("n_past must be >= 1");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  }
};

/// Weights lambda^(n-1) for n = 1..N.
inline std::vector<double> decay_weights(const DeltaConfig& cfg) {
  cfg.validate();
  std::vector<double> w(static_cast<std::size_t>(cfg.n_past));
  for (std::size_t n = 0; n < w.size(); ++n) w[n] = std::pow(cfg.decay, static_cast<double>(n));
  return w;
}

enum class DeltaOp { Add, Sub };

namespace detail {

/// One element of the merged stream: a row from A or B, tagged by source.
struct StreamEntry {
  std::int64_t key;
  std::uint32_t row;
  bool from_b;
};

/// Key-ordered merge of two already sorted coordinate streams. Equal keys keep
/// A before B, which is what a stable sort of the concatenation [A, B] yields.
template <class T>
std::vector<StreamEntry> merge_by_key(const SparseVoxelTensor<T>& a, const SparseVoxelTensor<T>& b) {
  const auto& spec = a.spec();
  std::vector<StreamEntry> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    const bool take_a =
        j >= b.size() || (i < a.size() && spec.key(a.coords()[i]) <= spec.key(b.coords()[j]));
    if (take_a) {
      out.push_back({spec.key(a.coords()[i]), static_cast<std::uint32_t>(i), false});
      ++i;
    } else {
      out.push_back({spec.key(b.coords()[j]), static_cast<std::uint32_t>(j), true});
      ++j;
    }
  }
  return out;
}

inline void check_same_spec(const VoxelGridSpec& a, const VoxelGridSpec& b) {
  if (!(a == b)) throw ConfigError("voxel grid specs differ");
}

}  // namespace detail

/// Union-merge of two tensors: a ± b, a missing row acting as zeros.
/// Explicit zero rows stay in the output.
template <class T>
SparseVoxelTensor<T> sparse_delta(const SparseVoxelTensor<T>& a, const SparseVoxelTensor<T>& b,
                                  DeltaOp op) {
  detail::check_same_spec(a.spec(), b.spec());
  const std::size_t c = a.width();
  const T sign = op == DeltaOp::Sub ? T{-1} : T{1};

  const auto stream = detail::merge_by_key(a, b);

  std::vector<VoxelCoord> coords;
  std::vector<T> feats;
  coords.reserve(stream.size());
  feats.reserve(stream.size() * c);

  // Reduce runs of equal keys left to right.
  std::size_t s = 0;
  while (s < stream.size()) {
    const auto& head = stream[s];
    const auto& src = head.from_b ? b : a;
    coords.push_back(src.coords()[head.row]);
    const auto first = src.row(head.row);
    const std::size_t base = feats.size();
    if (head.from_b) {
      for (std::size_t ch = 0; ch < c; ++ch) feats.push_back(sign * first[ch]);
    } else {
      feats.insert(feats.end(), first.begin(), first.end());
    }
    std::size_t e = s + 1;
    for (; e < stream.size() && stream[e].key == head.key; ++e) {
      const auto& next = stream[e];
      const auto r = (next.from_b ? b : a).row(next.row);
      const T f = next.from_b ? sign : T{1};
      for (std::size_t ch = 0; ch < c; ++ch) feats[base + ch] += f * r[ch];
    }
    s = e;
  }
  return SparseVoxelTensor<T>::adopt(a.spec(), std::move(coords), std::move(feats));
}

/// Same coordinates, every feature multiplied by `factor`.
template <class T>
SparseVoxelTensor<T> scale(const SparseVoxelTensor<T>& a, double factor) {
  if (!std::isfinite(factor)) throw InvalidInput("scale factor must be finite");
  std::vector<T> feats(a.features());
  const T f = static_cast<T>(factor);
  for (auto& v : feats) v *= f;
  return SparseVoxelTensor<T>::adopt(a.spec(), a.coords(), std::move(feats));
}

/// Decay-weighted multi-frame delta of `current` against `past`, ordered
/// newest (t-1) first. Output width equals the input width for any N.
template <class T>
SparseVoxelTensor<T> delta_scheme(const SparseVoxelTensor<T>& current,
                                  const std::vector<SparseVoxelTensor<T>>& past,
                                  const DeltaConfig& cfg) {
  cfg.validate();
  if (past.size() != static_cast<std::size_t>(cfg.n_past)) {
    throw ConfigError("expected " + std::to_string(cfg.n_past) + " past frames, got " +
                      std::to_string(past.size()));
  }
  for (const auto& p : past) detail::check_same_spec(current.spec(), p.spec());

  const auto weights = decay_weights(cfg);
  SparseVoxelTensor<T> acc = SparseVoxelTensor<T>::adopt(current.spec(), {}, {});
  for (std::size_t n = 0; n < past.size(); ++n) {
    const auto diff = sparse_delta(current, past[n], DeltaOp::Sub);
    acc = sparse_delta(acc, scale(diff, weights[n]), DeltaOp::Add);
  }
  return scale(acc, 1.0 / static_cast<double>(cfg.n_past));
}

/// Reference evaluation of the delta formula on full dense grids.
template <class T>
DenseGrid<T> dense_delta_oracle(const SparseVoxelTensor<T>& current,
                                const std::vector<SparseVoxelTensor<T>>& past,
                                const DeltaConfig& cfg) {
  cfg.validate();
  if (past.size() != static_cast<std::size_t>(cfg.n_past)) {
    throw ConfigError("expected " + std::to_string(cfg.n_past) + " past frames");
  }
  for (const auto& p : past) detail::check_same_spec(current.spec(), p.spec());

  const DenseGrid<T> cur = to_dense(current);
  DenseGrid<T> acc(current.spec().dims, current.spec().feature_width);
  const std::size_t cells = acc.data.size();
  for (std::size_t n = 1; n <= past.size(); ++n) {
    const T w = static_cast<T>(std::pow(cfg.decay, static_cast<double>(n - 1)));
    const DenseGrid<T> prev = to_dense(past[n - 1]);
    parallel_for(cells, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) acc.data[i] += w * (cur.data[i] - prev.data[i]);
    }, 1 << 16);
  }
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(cfg.n_past));
  parallel_for(cells, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) acc.data[i] *= inv_n;
  }, 1 << 16);
  return acc;
}

/// Drops rows whose largest absolute feature is <= epsilon. Order is kept.
template <class T>
SparseVoxelTensor<T> prune_zeros(const SparseVoxelTensor<T>& a, double epsilon) {
  if (!(epsilon >= 0.0)) throw InvalidInput("epsilon must be >= 0");
  std::vector<VoxelCoord> coords;
  std::vector<T> feats;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto r = a.row(i);
    double m = 0.0;
    for (const T v : r) m = std::max(m, static_cast<double>(std::abs(v)));
    if (m <= epsilon) continue;
    coords.push_back(a.coords()[i]);
    feats.insert(feats.end(), r.begin(), r.end());
  }
  return SparseVoxelTensor<T>::adopt(a.spec(), std::move(coords), std::move(feats));
}

/// Largest |sparse - dense| over every cell, treating inactive sparse cells
/// as zero. Avoids materializing a second dense grid.
template <class T>
double max_abs_difference(const SparseVoxelTensor<T>& sparse, const DenseGrid<T>& dense) {
  const auto& spec = sparse.spec();
  if (dense.dims != spec.dims || dense.channels != spec.feature_width) {
    throw ConfigError("dense grid shape does not match grid spec");
  }
  const std::size_t c = sparse.width();
  double worst = 0.0;
  std::size_t next = 0;
  const std::int64_t voxels = spec.dense_voxels();
  std::int64_t next_key = sparse.empty() ? voxels : spec.key(sparse.coords()[0]);
  for (std::int64_t k = 0; k < voxels; ++k) {
    const std::size_t base = static_cast<std::size_t>(k) * c;
    if (k == next_key) {
      const auto r = sparse.row(next);
      for (std::size_t ch = 0; ch < c; ++ch) {
        worst = std::max(worst, std::abs(static_cast<double>(r[ch]) - static_cast<double>(dense.data[base + ch])));
      }
      ++next;
      next_key = next < sparse.size() ? spec.key(sparse.coords()[next]) : voxels;
    } else {
      for (std::size_t ch = 0; ch < c; ++ch) {
        worst = std::max(worst, std::abs(static_cast<double>(dense.data[base + ch])));
      }
    }
  }
  return worst;
}

}  // namespace deltavox

#endif  // DELTAVOX_DELTA_HPP
