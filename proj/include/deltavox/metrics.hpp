// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Leaderboard-style evaluation: three-way end-point error and the per-category
// dynamic bucket-normalized EPE.

#ifndef DELTAVOX_METRICS_HPP
#define DELTAVOX_METRICS_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deltavox/errors.hpp"
#include "deltavox/geometry.hpp"

namespace deltavox {

enum class Region : std::uint8_t { ForegroundDynamic = 0, ForegroundStatic = 1, BackgroundStatic = 2 };

/// Points moving strictly faster than this (m/s) are dynamic.
inline constexpr double kDynamicSpeed = 0.5;
inline constexpr double kMetersToCm = 100.0;

inline bool is_dynamic(const Vec3& gt_flow, double dt) { return gt_flow.norm() / dt > kDynamicSpeed; }

/// FD / FS / BS per point. Foreground means "carries an instance label".
/// Moving unlabeled points are reported as FD.
inline std::vector<Region> classify_points(const PointCloudFrame& frame, double dt) {
  if (!frame.gt_residual_flow) throw InvalidInput("classify_points needs ground-truth flow");
  if (!(dt > 0.0)) throw InvalidInput("dt must be > 0");
  const auto& gt = *frame.gt_residual_flow;
  if (gt.size() != frame.size()) throw InvalidInput("gt flow column length does not match point count");
  std::vector<Region> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const bool dynamic = is_dynamic(gt[i], dt);
    if (dynamic) {
      out[i] = Region::ForegroundDynamic;
    } else {
      out[i] = frame.label(i) ? Region::ForegroundStatic : Region::BackgroundStatic;
    }
  }
  return out;
}

struct ThreewayEpe {
  /// Centimeters.
  double mean = 0.0;
  double fd = 0.0;
  double fs = 0.0;
  double bs = 0.0;
  std::array<std::size_t, 3> counts{};
};

struct BucketScores {
  /// Ratio per category; nullopt when the category has no dynamic points.
  std::array<std::optional<double>, kNumCategories> ratio{};
  std::array<std::size_t, kNumCategories> counts{};
  /// Mean over the categories that are present; 0 when none are.
  double mean = 0.0;
};

/// Running sums for pooling several frame pairs into one report. Points are
/// accumulated in the order they are added, which fixes the reduction order.
class EvalAccumulator {
 public:
  explicit EvalAccumulator(double dt) : dt_(dt) {
    if (!(dt > 0.0)) throw InvalidInput("dt must be > 0");
  }

  /// Adds the points of one frame. `frame` must carry gt flow.
  void add(const FlowField& pred, const PointCloudFrame& frame) {
    if (!frame.gt_residual_flow) throw InvalidInput("frame has no ground-truth flow");
    const FlowField gt(*frame.gt_residual_flow);
    if (pred.size() != gt.size()) {
      throw InvalidInput("prediction has " + std::to_string(pred.size()) + " vectors, frame has " +
                         std::to_string(gt.size()) + " points");
    }
    const auto labels = classify_points(frame, dt_);
    add_regions(pred, gt, labels);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const auto& l = frame.label(i);
      if (!l || !is_dynamic(gt[i], dt_)) continue;
      const std::size_t c = category_index(l->category);
      bucket_err_[c] += (pred[i] - gt[i]).norm();
      bucket_speed_[c] += gt[i].norm();
      ++bucket_count_[c];
    }
  }

  void add_regions(const FlowField& pred, const FlowField& gt, const std::vector<Region>& labels) {
    if (pred.size() != gt.size() || labels.size() != gt.size()) {
      throw InvalidInput("prediction, ground truth and labels differ in length");
    }
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const auto r = static_cast<std::size_t>(labels[i]);
      region_sum_[r] += (pred[i] - gt[i]).norm() * kMetersToCm;
      ++region_count_[r];
    }
  }

  ThreewayEpe threeway() const {
    ThreewayEpe out;
    std::array<double, 3> v{};
    for (std::size_t r = 0; r < 3; ++r) {
      out.counts[r] = region_count_[r];
      v[r] = region_count_[r] > 0 ? region_sum_[r] / static_cast<double>(region_count_[r]) : 0.0;
    }
    out.fd = v[0];
    out.fs = v[1];
    out.bs = v[2];
    out.mean = (out.fd + out.fs + out.bs) / 3.0;
    return out;
  }

  /// Ratio of means: mean EPE over mean gt displacement, per category.
  BucketScores buckets() const {
    BucketScores out;
    double total = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      out.counts[c] = bucket_count_[c];
      if (bucket_count_[c] == 0) continue;
      const double n = static_cast<double>(bucket_count_[c]);
      const double ratio = (bucket_err_[c] / n) / (bucket_speed_[c] / n);
      out.ratio[c] = ratio;
      total += ratio;
      ++present;
    }
    out.mean = present > 0 ? total / static_cast<double>(present) : 0.0;
    return out;
  }

 private:
  double dt_;
  std::array<double, 3> region_sum_{};
  std::array<std::size_t, 3> region_count_{};
  std::array<double, kNumCategories> bucket_err_{};
  std::array<double, kNumCategories> bucket_speed_{};
  std::array<std::size_t, kNumCategories> bucket_count_{};
};

/// Per-region mean EPE in centimeters; empty regions score 0 with count 0.
inline ThreewayEpe threeway_epe(const FlowField& pred, const FlowField& gt, const std::vector<Region>& labels) {
  EvalAccumulator acc(1.0);
  acc.add_regions(pred, gt, labels);
  return acc.threeway();
}

inline BucketScores bucket_normalized(const FlowField& pred, const FlowField& gt, const PointCloudFrame& frame,
                                      double dt) {
  if (pred.size() != gt.size() || gt.size() != frame.size()) {
    throw InvalidInput("prediction, ground truth and frame differ in length");
  }
  PointCloudFrame with_gt = frame;
  with_gt.gt_residual_flow = gt.vectors;
  EvalAccumulator acc(dt);
  acc.add(pred, with_gt);
  return acc.buckets();
}

struct EvalReport {
  ThreewayEpe threeway;
  BucketScores buckets;
};

}  // namespace deltavox

#endif  // DELTAVOX_METRICS_HPP
