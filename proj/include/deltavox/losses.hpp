// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Scene-flow supervision losses and their analytic gradients with respect to
// the predicted residual flow.
//
//   deflow:    sum_i 1/|P_i| sum_{p in P_i} |r_p|              (speed bins i)
//   category:  sum_c w_c sum_b g_b 1/|P_cb| sum_{p in P_cb} |r_p|
//   instance:  1/|I'| sum_{I in I'} w_cI e_I exp(e_I),  e_I = mean_{p in I} |r_p|
//
// with r_p = pred(p) - gt(p). The gradient of |r| at r = 0 is taken as zero.

#ifndef DELTAVOX_LOSSES_HPP
#define DELTAVOX_LOSSES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deltavox/errors.hpp"
#include "deltavox/geometry.hpp"

namespace deltavox {

inline constexpr std::size_t kNumSpeedBins = 3;

struct LossWeights {
  /// w_c for CAR, OTHER, PED, VRU.
  std::array<double, kNumCategories> category = {1.0, 1.5, 2.0, 2.5};
  /// gamma_b for static, slow, dynamic.
  std::array<double, kNumSpeedBins> speed = {0.1, 0.4, 0.5};
  /// omega_c of the instance term; defaults to the category table.
  std::array<double, kNumCategories> instance = {1.0, 1.5, 2.0, 2.5};
  /// Bin edges in m/s: [0, e0), [e0, e1), [e1, inf).
  std::array<double, 2> speed_bin_edges = {0.4, 1.0};
  /// Instances faster than this (m/s) enter the instance term.
  double instance_gate = 0.4;
  /// Seconds per frame interval.
  double frame_dt = 0.1;

  void validate() const {
    auto nonneg = [](const auto& arr, const char* what) {
      for (double v : arr) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite and >= 0");
      }
    };
    nonneg(category, "category weights");
    nonneg(speed, "speed weights");
    nonneg(instance, "instance weights");
    if (!(speed_bin_edges[0] < speed_bin_edges[1]) || !(speed_bin_edges[0] >= 0.0)) {
      throw ConfigError("speed bin edges must be >= 0 and strictly increasing");
    }
    if (!(instance_gate >= 0.0)) throw ConfigError("instance gate must be >= 0");
    if (!(frame_dt > 0.0) || !std::isfinite(frame_dt)) throw ConfigError("frame_dt must be > 0");
  }

  /// Lower-inclusive bin of a speed in m/s.
  std::size_t speed_bin(double speed_mps) const {
    if (speed_mps < speed_bin_edges[0]) return 0;
    if (speed_mps < speed_bin_edges[1]) return 1;
    return 2;
  }
};

/// A loss scalar together with its per-point gradient.
struct LossTerm {
  double value = 0.0;
  std::vector<Vec3> gradient;
};

struct LossReport {
  double l_deflow = 0.0;
  double l_category = 0.0;
  double l_instance = 0.0;
  double l_total = 0.0;
  std::vector<Vec3> gradient;
};

namespace detail {

inline void check_lengths(const FlowField& pred, const FlowField& gt) {
  if (pred.size() != gt.size()) {
    throw InvalidInput("prediction has " + std::to_string(pred.size()) + " vectors, ground truth " +
                       std::to_string(gt.size()));
  }
}

inline void check_frame(const FlowField& pred, const PointCloudFrame& frame) {
  if (pred.size() != frame.size()) {
    throw InvalidInput("flow length does not match frame point count");
  }
  if (frame.labels && frame.labels->size() != frame.size()) {
    throw InvalidInput("label column length does not match point count");
  }
}

/// r / |r|, or zero at r = 0.
inline Vec3 unit_or_zero(const Vec3& r, double norm) {
  return norm > 0.0 ? Vec3(r / norm) : Vec3::Zero();
}

struct Residuals {
  std::vector<Vec3> r;
  std::vector<double> norm;
};

inline Residuals residuals(const FlowField& pred, const FlowField& gt) {
  Residuals out;
  out.r.resize(pred.size());
  out.norm.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.r[i] = pred[i] - gt[i];
    out.norm[i] = out.r[i].norm();
  }
  return out;
}

}  // namespace detail

/// Motion-aware loss: mean residual norm within each speed bin, summed over
/// bins. Empty bins contribute nothing.
inline LossTerm deflow_loss(const FlowField& pred, const FlowField& gt, const LossWeights& weights) {
  detail::check_lengths(pred, gt);
  weights.validate();
  const std::size_t n = pred.size();
  const auto res = detail::residuals(pred, gt);

  std::vector<std::size_t> bin(n);
  std::array<std::size_t, kNumSpeedBins> count{};
  std::array<double, kNumSpeedBins> sum{};
  for (std::size_t i = 0; i < n; ++i) {
    bin[i] = weights.speed_bin(gt[i].norm() / weights.frame_dt);
    ++count[bin[i]];
    sum[bin[i]] += res.norm[i];
  }

  LossTerm out;
  for (std::size_t b = 0; b < kNumSpeedBins; ++b) {
    if (count[b] > 0) out.value += sum[b] / static_cast<double>(count[b]);
  }
  out.gradient.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.gradient[i] = detail::unit_or_zero(res.r[i], res.norm[i]) / static_cast<double>(count[bin[i]]);
  }
  return out;
}

/// Category-balanced loss over labeled points, cells indexed by
/// (category, speed bin).
inline LossTerm category_loss(const FlowField& pred, const FlowField& gt, const PointCloudFrame& frame,
                              const LossWeights& weights) {
  detail::check_lengths(pred, gt);
  detail::check_frame(pred, frame);
  weights.validate();
  const std::size_t n = pred.size();
  const auto res = detail::residuals(pred, gt);

  constexpr std::size_t kCells = kNumCategories * kNumSpeedBins;
  std::array<std::size_t, kCells> count{};
  std::array<double, kCells> sum{};
  std::vector<std::size_t> cell(n, kCells);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = frame.label(i);
    if (!l) continue;
    const std::size_t c = category_index(l->category);
    const std::size_t b = weights.speed_bin(gt[i].norm() / weights.frame_dt);
    cell[i] = c * kNumSpeedBins + b;
    ++count[cell[i]];
    sum[cell[i]] += res.norm[i];
  }

  LossTerm out;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    double inner = 0.0;
    for (std::size_t b = 0; b < kNumSpeedBins; ++b) {
      const std::size_t k = c * kNumSpeedBins + b;
      if (count[k] > 0) inner += weights.speed[b] * (sum[k] / static_cast<double>(count[k]));
    }
    out.value += weights.category[c] * inner;
  }
  out.gradient.assign(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    if (cell[i] == kCells) continue;
    const std::size_t c = cell[i] / kNumSpeedBins;
    const std::size_t b = cell[i] % kNumSpeedBins;
    const double coeff = weights.category[c] * weights.speed[b] / static_cast<double>(count[cell[i]]);
    out.gradient[i] = coeff * detail::unit_or_zero(res.r[i], res.norm[i]);
  }
  return out;
}

/// Largest per-instance mean error accepted before exp() is refused.
inline constexpr double kInstanceErrorLimit = 50.0;

/// Instance-consistency loss over instances whose mean gt flow exceeds the
/// speed gate. Each instance takes the category of its first point.
inline LossTerm instance_loss(const FlowField& pred, const FlowField& gt, const PointCloudFrame& frame,
                              const LossWeights& weights) {
  detail::check_lengths(pred, gt);
  detail::check_frame(pred, frame);
  weights.validate();
  const std::size_t n = pred.size();
  const auto res = detail::residuals(pred, gt);

  struct Group {
    Category category;
    std::vector<std::size_t> members;
  };
  std::map<std::uint32_t, Group> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = frame.label(i);
    if (!l) continue;
    auto [it, inserted] = groups.try_emplace(l->instance_id, Group{l->category, {}});
    it->second.members.push_back(i);
  }

  struct Moving {
    const Group* group;
    double error;
  };
  std::vector<Moving> moving;
  for (const auto& [id, g] : groups) {
    Vec3 mean_gt = Vec3::Zero();
    double err = 0.0;
    for (std::size_t i : g.members) {
      mean_gt += gt[i];
      err += res.norm[i];
    }
    const double count = static_cast<double>(g.members.size());
    mean_gt /= count;
    if (!(mean_gt.norm() / weights.frame_dt > weights.instance_gate)) continue;
    err /= count;
    if (err > kInstanceErrorLimit) {
      throw OverflowError("instance " + std::to_string(id) + " mean error " + std::to_string(err) +
                          " exceeds the exp() guard");
    }
    moving.push_back({&g, err});
  }

  LossTerm out;
  out.gradient.assign(n, Vec3::Zero());
  if (moving.empty()) return out;
  const double inv_instances = 1.0 / static_cast<double>(moving.size());
  for (const auto& m : moving) {
    const double w = weights.instance[category_index(m.group->category)];
    const double e = m.error;
    out.value += w * e * std::exp(e);
    const double coeff = w * inv_instances * (1.0 + e) * std::exp(e) /
                         static_cast<double>(m.group->members.size());
    for (std::size_t i : m.group->members) {
      out.gradient[i] = coeff * detail::unit_or_zero(res.r[i], res.norm[i]);
    }
  }
  out.value *= inv_instances;
  return out;
}

/// Sum of the three terms and of their gradients.
inline LossReport total_loss(const FlowField& pred, const FlowField& gt, const PointCloudFrame& frame,
                             const LossWeights& weights) {
  const auto d = deflow_loss(pred, gt, weights);
  const auto c = category_loss(pred, gt, frame, weights);
  const auto i = instance_loss(pred, gt, frame, weights);
  LossReport r;
  r.l_deflow = d.value;
  r.l_category = c.value;
  r.l_instance = i.value;
  r.l_total = d.value + c.value + i.value;
  r.gradient.resize(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) r.gradient[k] = d.gradient[k] + c.gradient[k] + i.gradient[k];
  return r;
}

/// Central finite differences of the total loss scalar, one coordinate at a
/// time. Residual norms must be exactly zero or at least 10·step so that no
/// perturbation crosses the kink of |r|.
inline std::vector<Vec3> finite_diff_gradient(const FlowField& pred, const FlowField& gt,
                                              const PointCloudFrame& frame, const LossWeights& weights,
                                              double step) {
  if (!(step > 0.0)) throw TestSetupError("finite-difference step must be > 0");
  detail::check_lengths(pred, gt);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double norm = (pred[i] - gt[i]).norm();
    if (norm != 0.0 && norm < 10.0 * step) {
      throw TestSetupError("residual of point " + std::to_string(i) + " lies within 10*step of the norm kink");
    }
  }
  std::vector<Vec3> out(pred.size(), Vec3::Zero());
  FlowField probe = pred;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double x = pred[i][a];
      const double hi = x + step;
      const double lo = x - step;
      probe[i][a] = hi;
      const double f_hi = total_loss(probe, gt, frame, weights).l_total;
      probe[i][a] = lo;
      const double f_lo = total_loss(probe, gt, frame, weights).l_total;
      probe[i][a] = x;
      out[i][a] = (f_hi - f_lo) / (hi - lo);
    }
  }
  return out;
}

/// max |a - b| / max(max|a|, max|b|) over all components; 0 when both are zero.
inline double gradient_relative_error(const std::vector<Vec3>& analytic, const std::vector<Vec3>& numeric) {
  if (analytic.size() != numeric.size()) throw InvalidInput("gradient length mismatch");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, (analytic[i] - numeric[i]).cwiseAbs().maxCoeff());
    scale = std::max({scale, analytic[i].cwiseAbs().maxCoeff(), numeric[i].cwiseAbs().maxCoeff()});
  }
  return scale > 0.0 ? diff / scale : 0.0;
}

}  // namespace deltavox

#endif  // DELTAVOX_LOSSES_HPP
