// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic LiDAR sequences with exact ground-truth residual flow.
//
// World content is a ground plane, static box "buildings" and rigid movers
// translating at constant velocity. Every frame is expressed in its own sensor
// coordinates. The residual flow stored with frame k is the mover velocity
// times dt, expressed in the axes of sensor frame k+1 (the last frame reuses
// its own axes), so that
//
//   T^{k->k+1} p + residual(p) = position of p at k+1 in sensor frame k+1.

#ifndef DELTAVOX_SYNTH_HPP
#define DELTAVOX_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "deltavox/errors.hpp"
#include "deltavox/geometry.hpp"

namespace deltavox {

/// Axis-aligned static box, sampled on its surface.
struct BoxSpec {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  std::size_t points = 0;
};

struct MoverSpec {
  Category category = Category::Car;
  /// Box extents (m).
  Vec3 size = Vec3(4.0, 2.0, 1.5);
  std::size_t points = 100;
  /// World velocity (m/s).
  Vec3 velocity = Vec3::Zero();
  /// World pose of the box center at frame 0.
  RigidTransform initial_pose;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int n_frames = 2;
  double dt = 0.1;
  /// Ground plane covers [-x/2, x/2] × [-y/2, y/2]; buildings are placed
  /// within the same footprint and up to z in height.
  Vec3 extent = Vec3(40.0, 40.0, 6.0);
  std::size_t ground_points = 0;
  std::vector<BoxSpec> buildings;
  /// Extra buildings placed at seeded random positions.
  std::size_t random_buildings = 0;
  std::size_t points_per_random_building = 0;
  std::vector<MoverSpec> movers;
  /// Sensor-to-world pose per frame; empty means identity throughout.
  std::vector<RigidTransform> ego_trajectory;

  void validate() const {
    if (n_frames < 2) throw ConfigError("n_frames must be >= 2");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
    if (!extent.allFinite() || (extent.array() <= 0.0).any()) throw ConfigError("extent must be positive");
    std::size_t background = ground_points + random_buildings * points_per_random_building;
    for (const auto& b : buildings) background += b.points;
    std::size_t moving = 0;
    for (const auto& m : movers) {
      moving += m.points;
      if (!m.velocity.allFinite() || !m.size.allFinite() || (m.size.array() <= 0.0).any()) {
        throw ConfigError("mover size must be positive and velocity finite");
      }
      m.initial_pose.validate(1e-6);
      category_index(m.category);
    }
    if (background == 0 && moving == 0) throw ConfigError("scene has neither background nor mover points");
    if (!ego_trajectory.empty()) {
      if (ego_trajectory.size() != static_cast<std::size_t>(n_frames)) {
        throw ConfigError("ego trajectory needs one pose per frame");
      }
      for (const auto& p : ego_trajectory) p.validate(1e-6);
    }
  }
};

struct SceneSequence {
  double dt = 0.1;
  std::vector<PointCloudFrame> frames;
  /// Sensor-to-world pose of each frame.
  std::vector<RigidTransform> poses;
  std::vector<MoverSpec> movers;

  std::size_t pair_count() const { return frames.empty() ? 0 : frames.size() - 1; }

  /// Ego motion from frame k to frame k+1: pose_{k+1}⁻¹ · pose_k.
  RigidTransform relative(std::size_t k) const { return relative_pose(poses[k], poses[k + 1]); }

  /// World pose of mover j's box center at frame k.
  RigidTransform mover_pose(std::size_t j, std::size_t k) const {
    RigidTransform p = movers[j].initial_pose;
    p.translation += movers[j].velocity * (dt * static_cast<double>(k));
    return p;
  }
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform sample on the surface of an origin-centered box with extents `size`.
inline Vec3 sample_box_surface(std::mt19937_64& rng, const Vec3& size) {
  const double ax = size.y() * size.z();
  const double ay = size.x() * size.z();
  const double az = size.x() * size.y();
  const double pick = uniform01(rng) * (ax + ay + az);
  const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
  Vec3 h = size / 2.0;
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = uniform(rng, -h[a], h[a]);
  p[axis] = uniform01(rng) < 0.5 ? -h[axis] : h[axis];
  return p;
}

}  // namespace detail

/// Distance of `p` (in box-local coordinates) from the surface of a box.
inline double box_surface_distance(const Vec3& local, const Vec3& size) {
  const Vec3 h = size / 2.0;
  const Vec3 q = local.cwiseAbs() - h;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return std::abs(outside + inside);
}

inline SceneSequence generate(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  SceneSequence seq;
  seq.dt = spec.dt;
  seq.movers = spec.movers;
  seq.poses = spec.ego_trajectory.empty()
                  ? std::vector<RigidTransform>(static_cast<std::size_t>(spec.n_frames))
                  : spec.ego_trajectory;

  std::vector<BoxSpec> buildings = spec.buildings;
  const Vec3 half = spec.extent / 2.0;
  for (std::size_t b = 0; b < spec.random_buildings; ++b) {
    BoxSpec box;
    box.size = Vec3(detail::uniform(rng, 2.0, 8.0), detail::uniform(rng, 2.0, 8.0),
                    detail::uniform(rng, 0.5, 1.0) * spec.extent.z());
    box.center = Vec3(detail::uniform(rng, -half.x(), half.x()), detail::uniform(rng, -half.y(), half.y()),
                      box.size.z() / 2.0);
    box.points = spec.points_per_random_building;
    buildings.push_back(box);
  }

  const auto n_frames = static_cast<std::size_t>(spec.n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    const RigidTransform world_to_sensor = seq.poses[k].inverse();
    const std::size_t next = std::min(k + 1, n_frames - 1);
    const Mat3 next_axes = seq.poses[next].rotation.transpose();

    PointCloudFrame frame;
    frame.frame_time = spec.dt * static_cast<double>(k);
    std::vector<std::optional<InstanceLabel>> labels;
    std::vector<Vec3> gt;

    auto push_background = [&](const Vec3& world) {
      frame.points.push_back(world_to_sensor.apply(world));
      labels.emplace_back(std::nullopt);
      gt.emplace_back(Vec3::Zero());
    };

    for (std::size_t i = 0; i < spec.ground_points; ++i) {
      push_background(Vec3(detail::uniform(rng, -half.x(), half.x()), detail::uniform(rng, -half.y(), half.y()), 0.0));
    }
    for (const auto& box : buildings) {
      for (std::size_t i = 0; i < box.points; ++i) {
        push_background(box.center + detail::sample_box_surface(rng, box.size));
      }
    }
    for (std::size_t j = 0; j < spec.movers.size(); ++j) {
      const auto& m = spec.movers[j];
      const RigidTransform pose = seq.mover_pose(j, k);
      const Vec3 residual = next_axes * (m.velocity * spec.dt);
      for (std::size_t i = 0; i < m.points; ++i) {
        const Vec3 world = pose.apply(detail::sample_box_surface(rng, m.size));
        frame.points.push_back(world_to_sensor.apply(world));
        labels.emplace_back(InstanceLabel{static_cast<std::uint32_t>(j), m.category});
        gt.push_back(residual);
      }
    }
    if (!spec.movers.empty()) frame.labels = std::move(labels);
    frame.gt_residual_flow = std::move(gt);
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

enum class PredictorKind { ZeroResidual, Oracle, NoisyOracle };

/// Residual-flow predictions for frames 0..n-2 (one per frame pair).
inline std::vector<FlowField> reference_predictor(const SceneSequence& seq, PredictorKind kind, double sigma = 0.0,
                                                  std::uint64_t seed = 0) {
  if (kind == PredictorKind::NoisyOracle && !(sigma >= 0.0)) throw InvalidInput("sigma must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  std::vector<FlowField> out;
  for (std::size_t k = 0; k < seq.pair_count(); ++k) {
    const auto& frame = seq.frames[k];
    switch (kind) {
      case PredictorKind::ZeroResidual:
        out.push_back(FlowField::zeros(frame.size()));
        break;
      case PredictorKind::Oracle:
        out.emplace_back(*frame.gt_residual_flow);
        break;
      case PredictorKind::NoisyOracle: {
        FlowField f(*frame.gt_residual_flow);
        if (sigma > 0.0) {
          for (auto& v : f.vectors) {
            for (int a = 0; a < 3; ++a) v[a] += noise(rng);
          }
        }
        out.push_back(std::move(f));
        break;
      }
    }
  }
  return out;
}

}  // namespace deltavox

#endif  // DELTAVOX_SYNTH_HPP
