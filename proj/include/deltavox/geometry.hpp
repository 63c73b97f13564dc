// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Frames, rigid transforms, and the ego/residual decomposition of scene flow.

#ifndef DELTAVOX_GEOMETRY_HPP
#define DELTAVOX_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "deltavox/errors.hpp"

namespace deltavox {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Meta-categories. The numeric values are the on-disk codes.
enum class Category : std::uint8_t { Car = 0, Other = 1, Ped = 2, Vru = 3 };

inline constexpr std::size_t kNumCategories = 4;

inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::Car, Category::Other, Category::Ped, Category::Vru};

inline const char* category_name(Category c) {
  switch (c) {
    case Category::Car: return "CAR";
    case Category::Other: return "OTHER";
    case Category::Ped: return "PED";
    case Category::Vru: return "VRU";
  }
  return "?";
}

inline Category category_from_code(std::uint8_t code) {
  if (code >= kNumCategories) {
    throw InvalidInput("unknown category code " + std::to_string(code));
  }
  return static_cast<Category>(code);
}

inline std::size_t category_index(Category c) {
  const auto idx = static_cast<std::size_t>(c);
  if (idx >= kNumCategories) {
    throw InvalidInput("unknown category code " + std::to_string(idx));
  }
  return idx;
}

inline bool all_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Proper rigid motion x -> R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  /// Rotation about +z by `yaw` radians, then translation.
  static RigidTransform from_yaw(double yaw, const Vec3& t = Vec3::Zero()) {
    return {Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), t};
  }

  /// Reads a 4x4 row-major homogeneous matrix. The bottom row is ignored.
  static RigidTransform from_row_major(const std::array<double, 16>& m) {
    RigidTransform out;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out.rotation(r, c) = m[static_cast<std::size_t>(r * 4 + c)];
      out.translation(r) = m[static_cast<std::size_t>(r * 4 + 3)];
    }
    return out;
  }

  std::array<double, 16> to_row_major() const {
    std::array<double, 16> m{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[static_cast<std::size_t>(r * 4 + c)] = rotation(r, c);
      m[static_cast<std::size_t>(r * 4 + 3)] = translation(r);
    }
    m[15] = 1.0;
    return m;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }

  RigidTransform inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  /// RᵀR = I and det R = +1 within `tol`, all entries finite.
  bool is_valid(double tol = 1e-9) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
  }

  void validate(double tol = 1e-9) const {
    if (!is_valid(tol)) throw InvalidInput("rotation is not a proper orthonormal matrix");
  }
};

/// Instance membership of a foreground point.
struct InstanceLabel {
  std::uint32_t instance_id = 0;
  Category category = Category::Car;

  bool operator==(const InstanceLabel&) const = default;
};

/// One LiDAR sweep. Optional columns hold exactly one entry per point when present.
struct PointCloudFrame {
  std::vector<Vec3> points;
  double frame_time = 0.0;
  /// std::nullopt entries are background points.
  std::optional<std::vector<std::optional<InstanceLabel>>> labels;
  /// Residual (non-ego) flow toward the next frame, meters per frame interval.
  std::optional<std::vector<Vec3>> gt_residual_flow;

  std::size_t size() const { return points.size(); }
  bool has_labels() const { return labels.has_value(); }
  bool has_gt() const { return gt_residual_flow.has_value(); }

  const std::optional<InstanceLabel>& label(std::size_t i) const {
    static const std::optional<InstanceLabel> none;
    return labels ? (*labels)[i] : none;
  }

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!all_finite(points[i])) {
        throw InvalidInput("non-finite coordinate at point " + std::to_string(i));
      }
    }
    if (!std::isfinite(frame_time)) throw InvalidInput("non-finite frame_time");
    if (labels && labels->size() != points.size()) {
      throw InvalidInput("label column length does not match point count");
    }
    if (labels) {
      for (const auto& l : *labels) {
        if (l) category_index(l->category);
      }
    }
    if (gt_residual_flow) {
      if (gt_residual_flow->size() != points.size()) {
        throw InvalidInput("gt flow column length does not match point count");
      }
      for (const auto& v : *gt_residual_flow) {
        if (!all_finite(v)) throw InvalidInput("non-finite gt flow vector");
      }
    }
  }
};

/// Per-point 3-vectors attached to the points of one frame.
struct FlowField {
  std::vector<Vec3> vectors;

  FlowField() = default;
  explicit FlowField(std::vector<Vec3> v) : vectors(std::move(v)) {}
  static FlowField zeros(std::size_t n) { return FlowField(std::vector<Vec3>(n, Vec3::Zero())); }

  std::size_t size() const { return vectors.size(); }
  const Vec3& operator[](std::size_t i) const { return vectors[i]; }
  Vec3& operator[](std::size_t i) { return vectors[i]; }

  void validate() const {
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (!all_finite(vectors[i])) {
        throw InvalidInput("non-finite flow vector at index " + std::to_string(i));
      }
    }
  }

  void validate_against(const PointCloudFrame& frame) const {
    if (vectors.size() != frame.size()) {
      throw InvalidInput("flow length " + std::to_string(vectors.size()) +
                         " does not match frame point count " + std::to_string(frame.size()));
    }
    validate();
  }
};

/// Apparent motion of every point caused purely by the sensor: (R p + t) - p.
inline FlowField ego_flow(const PointCloudFrame& frame, const RigidTransform& pose) {
  pose.validate();
  FlowField out;
  out.vectors.reserve(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const Vec3& p = frame.points[i];
    if (!all_finite(p)) throw InvalidInput("non-finite coordinate at point " + std::to_string(i));
    out.vectors.push_back(pose.apply(p) - p);
  }
  return out;
}

/// Full flow = ego flow + residual flow.
inline FlowField compose_flow(const FlowField& ego, const FlowField& residual) {
  if (ego.size() != residual.size()) {
    throw InvalidInput("compose_flow: length mismatch (" + std::to_string(ego.size()) + " vs " +
                       std::to_string(residual.size()) + ")");
  }
  FlowField out;
  out.vectors.resize(ego.size());
  for (std::size_t i = 0; i < ego.size(); ++i) out.vectors[i] = ego[i] + residual[i];
  return out;
}

/// Moves a frame into another sensor frame. Points get R p + t; gt residual
/// vectors are rotated only; labels and timestamp are carried through.
inline PointCloudFrame apply_ego_compensation(const PointCloudFrame& frame,
                                              const RigidTransform& pose) {
  pose.validate();
  PointCloudFrame out = frame;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (!all_finite(out.points[i])) {
      throw InvalidInput("non-finite coordinate at point " + std::to_string(i));
    }
    out.points[i] = pose.apply(out.points[i]);
  }
  if (out.gt_residual_flow) {
    for (auto& v : *out.gt_residual_flow) v = pose.rotate(v);
  }
  return out;
}

/// Relative motion T^{a->b} between two sensor-to-world poses: pose_b⁻¹ · pose_a.
inline RigidTransform relative_pose(const RigidTransform& sensor_to_world_a,
                                    const RigidTransform& sensor_to_world_b) {
  return sensor_to_world_b.inverse() * sensor_to_world_a;
}

}  // namespace deltavox

#endif  // DELTAVOX_GEOMETRY_HPP
