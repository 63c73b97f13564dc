// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Seeded random case generators and brute-force reference computations used
// by the property suite, the unit tests and the acceptance runner. Nothing in
// here is used by the library's production paths.

#ifndef DELTAVOX_TESTING_HPP
#define DELTAVOX_TESTING_HPP

#include <algorithm>
#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

#include "deltavox/delta.hpp"
#include "deltavox/geometry.hpp"
#include "deltavox/losses.hpp"
#include "deltavox/synth.hpp"
#include "deltavox/voxel.hpp"

namespace deltavox::testing {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; derives independent case seeds from (base, a, b).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (a + 1) + 0xBF58476D1CE4E5B9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) { return deltavox::detail::uniform(rng, lo, hi); }

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline VoxelGridSpec random_spec(Rng& rng, int max_dim = 32, int max_channels = 8) {
  VoxelGridSpec s;
  s.dims = {uniform_int(rng, 1, max_dim), uniform_int(rng, 1, max_dim), uniform_int(rng, 1, max_dim)};
  s.feature_width = uniform_int(rng, 1, max_channels);
  s.resolution = Vec3(uniform(rng, 0.1, 1.0), uniform(rng, 0.1, 1.0), uniform(rng, 0.1, 1.0));
  s.origin = Vec3(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -2, 2));
  return s;
}

/// Random tensor with roughly `occupancy` of the voxels active. Features are
/// uniform in [-2, 2); a few rows are exact zeros.
inline SparseVoxelTensor<double> random_tensor(Rng& rng, const VoxelGridSpec& spec, double occupancy) {
  const std::int64_t total = spec.dense_voxels();
  const auto target = static_cast<std::int64_t>(occupancy * static_cast<double>(total));
  std::unordered_set<std::int64_t> keys;
  while (static_cast<std::int64_t>(keys.size()) < target) {
    keys.insert(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(total)));
  }
  std::vector<std::int64_t> sorted(keys.begin(), keys.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<VoxelCoord> coords;
  std::vector<double> feats;
  for (auto k : sorted) {
    coords.push_back(spec.coord_of_key(k));
    const bool zero_row = rng() % 16 == 0;
    for (int c = 0; c < spec.feature_width; ++c) feats.push_back(zero_row ? 0.0 : uniform(rng, -2.0, 2.0));
  }
  return SparseVoxelTensor<double>(spec, std::move(coords), std::move(feats));
}

/// Frame with points scattered over (and slightly beyond) the grid volume.
inline PointCloudFrame random_frame(Rng& rng, const VoxelGridSpec& spec, std::size_t n) {
  PointCloudFrame f;
  const Vec3 lo = spec.origin;
  const Vec3 hi = spec.origin + Vec3(spec.dims[0] * spec.resolution.x(), spec.dims[1] * spec.resolution.y(),
                                     spec.dims[2] * spec.resolution.z());
  const Vec3 pad = 0.1 * (hi - lo);
  // Concentrate points in a few cells so voxels hold several members.
  std::vector<Vec3> seeds;
  for (int i = 0; i < 8; ++i) {
    seeds.emplace_back(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()), uniform(rng, lo.z(), hi.z()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() % 2 == 0) {
      const Vec3& s = seeds[rng() % seeds.size()];
      f.points.push_back(s + Vec3(uniform(rng, -1, 1) * spec.resolution.x(), uniform(rng, -1, 1) * spec.resolution.y(),
                                  uniform(rng, -1, 1) * spec.resolution.z()));
    } else {
      f.points.emplace_back(uniform(rng, lo.x() - pad.x(), hi.x() + pad.x()),
                            uniform(rng, lo.y() - pad.y(), hi.y() + pad.y()),
                            uniform(rng, lo.z() - pad.z(), hi.z() + pad.z()));
    }
  }
  return f;
}

inline FeatureMatrix random_features(Rng& rng, std::size_t n, int width) {
  FeatureMatrix m(static_cast<Eigen::Index>(n), width);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = uniform(rng, -3.0, 3.0);
  }
  return m;
}

/// Dense-accumulation oracle for point-to-voxel means: bins into a full
/// X×Y×Z×C array, divides by per-voxel counts. Returns the dense means and
/// per-voxel counts.
struct DenseMeans {
  DenseGrid<double> means;
  std::vector<std::int64_t> counts;
};

inline DenseMeans dense_accumulate(const PointCloudFrame& frame, const FeatureMatrix& feats, const VoxelGridSpec& spec) {
  DenseMeans out{DenseGrid<double>(spec.dims, spec.feature_width),
                 std::vector<std::int64_t>(static_cast<std::size_t>(spec.dense_voxels()), 0)};
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const Vec3& p = frame.points[i];
    std::int32_t idx[3];
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((p[a] - spec.origin[a]) / spec.resolution[a]);
      inside = inside && f >= 0 && f < spec.dims[static_cast<std::size_t>(a)];
      idx[a] = inside ? static_cast<std::int32_t>(f) : 0;
    }
    if (!inside) continue;
    ++out.counts[static_cast<std::size_t>((std::int64_t{idx[0]} * spec.dims[1] + idx[1]) * spec.dims[2] + idx[2])];
    for (int c = 0; c < spec.feature_width; ++c) {
      out.means.at(idx[0], idx[1], idx[2], c) += feats(static_cast<Eigen::Index>(i), c);
    }
  }
  const std::size_t ch = static_cast<std::size_t>(spec.feature_width);
  for (std::size_t v = 0; v < out.counts.size(); ++v) {
    if (out.counts[v] == 0) continue;
    for (std::size_t c = 0; c < ch; ++c) out.means.data[v * ch + c] /= static_cast<double>(out.counts[v]);
  }
  return out;
}

/// A labeled frame with gt and predicted residual flows for loss checks.
struct LossCase {
  PointCloudFrame frame;
  FlowField gt;
  FlowField pred;
  LossWeights weights;
};

/// 20–200 points, every category present, several moving instances plus
/// slow ones below the gate, background points. Residual norms lie in
/// [0.05, 0.6], far from the kink of |r|.
inline LossCase random_loss_case(Rng& rng, std::size_t min_points = 20, std::size_t max_points = 200) {
  LossCase lc;
  const double dt = lc.weights.frame_dt;
  const std::size_t n = static_cast<std::size_t>(uniform_int(rng, static_cast<int>(min_points), static_cast<int>(max_points)));
  std::vector<std::optional<InstanceLabel>> labels(n);
  std::vector<Vec3> gt(n, Vec3::Zero());

  const int instances = uniform_int(rng, 4, 8);
  std::vector<Vec3> inst_flow(static_cast<std::size_t>(instances));
  for (int i = 0; i < instances; ++i) {
    // Speeds from 0 to 3 m/s so instances land on both sides of the gate and in every bin.
    const double speed = uniform(rng, 0.0, 3.0);
    const double heading = uniform(rng, 0.0, 6.283185307179586);
    inst_flow[static_cast<std::size_t>(i)] = Vec3(std::cos(heading), std::sin(heading), uniform(rng, -0.1, 0.1)) * speed * dt;
  }
  for (std::size_t p = 0; p < n; ++p) {
    // The first points guarantee every category occurs; instance id fixes the category.
    std::optional<std::uint32_t> id;
    if (p < kNumCategories) {
      id = static_cast<std::uint32_t>(p);
    } else if (rng() % 3 != 0) {
      id = static_cast<std::uint32_t>(rng() % static_cast<std::uint64_t>(instances));
    }
    if (id) {
      labels[p] = InstanceLabel{*id, kAllCategories[*id % kNumCategories]};
      gt[p] = inst_flow[*id];
    } else if (rng() % 4 == 0) {
      gt[p] = Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), 0.0);
    }
  }
  lc.frame.points.resize(n);
  for (auto& p : lc.frame.points) p = Vec3(uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, 0, 3));
  lc.frame.labels = labels;
  lc.frame.gt_residual_flow = gt;
  lc.gt = FlowField(gt);
  lc.pred = lc.gt;
  for (auto& v : lc.pred.vectors) {
    Vec3 dir(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    while (dir.norm() < 0.1) dir = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    v += dir.normalized() * uniform(rng, 0.05, 0.6);
  }
  return lc;
}

/// A scene with static background and at least one dynamic mover per category.
inline SceneSpec all_category_scene(std::uint64_t seed, int n_frames = 3, bool ego_motion = true) {
  SceneSpec s;
  s.seed = seed;
  s.n_frames = n_frames;
  s.dt = 0.1;
  s.extent = Vec3(40, 40, 6);
  s.ground_points = 600;
  s.random_buildings = 3;
  s.points_per_random_building = 80;
  const std::array<Vec3, kNumCategories> velocity = {Vec3(8, 0, 0), Vec3(0, 6, 0), Vec3(1.3, 0.4, 0), Vec3(-3, 2, 0)};
  const std::array<Vec3, kNumCategories> size = {Vec3(4.5, 2, 1.6), Vec3(8, 2.5, 3), Vec3(0.6, 0.6, 1.8),
                                                 Vec3(1.8, 0.6, 1.5)};
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    MoverSpec m;
    m.category = kAllCategories[c];
    m.size = size[c];
    m.points = 60 + 20 * c;
    m.velocity = velocity[c];
    m.initial_pose = RigidTransform::from_yaw(0.3 * static_cast<double>(c),
                                              Vec3(-10.0 + 6.0 * static_cast<double>(c), 4.0, size[c].z() / 2));
    s.movers.push_back(m);
  }
  // A parked car: foreground static.
  MoverSpec parked;
  parked.category = Category::Car;
  parked.points = 50;
  parked.initial_pose = RigidTransform::from_translation(Vec3(5, -8, 0.75));
  s.movers.push_back(parked);
  if (ego_motion) {
    for (int k = 0; k < n_frames; ++k) {
      const double t = s.dt * k;
      s.ego_trajectory.push_back(RigidTransform::from_yaw(0.05 * t, Vec3(5.0 * t, 0.2 * t, 0.0)));
    }
  }
  return s;
}

}  // namespace deltavox::testing

#endif  // DELTAVOX_TESTING_HPP
