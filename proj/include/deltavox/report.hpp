// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Flat key-value JSON documents for evaluation and loss reports.

#ifndef DELTAVOX_REPORT_HPP
#define DELTAVOX_REPORT_HPP

#include <cctype>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "deltavox/losses.hpp"
#include "deltavox/metrics.hpp"

namespace deltavox::report {

using ordered_json = nlohmann::ordered_json;

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

inline ordered_json eval_json(const EvalReport& r, std::size_t frame_pairs) {
  ordered_json j;
  j["frame_pairs"] = frame_pairs;
  j["threeway_mean_cm"] = r.threeway.mean;
  j["epe_fd_cm"] = r.threeway.fd;
  j["epe_fs_cm"] = r.threeway.fs;
  j["epe_bs_cm"] = r.threeway.bs;
  j["count_fd"] = r.threeway.counts[0];
  j["count_fs"] = r.threeway.counts[1];
  j["count_bs"] = r.threeway.counts[2];
  j["bucket_mean"] = r.buckets.mean;
  for (auto c : kAllCategories) {
    const auto i = category_index(c);
    const std::string key = "bucket_" + lower(category_name(c));
    if (r.buckets.ratio[i]) {
      j[key] = *r.buckets.ratio[i];
    } else {
      j[key] = nullptr;
    }
  }
  for (auto c : kAllCategories) {
    j["dynamic_count_" + lower(category_name(c))] = r.buckets.counts[category_index(c)];
  }
  return j;
}

struct LossSummary {
  /// Means over frame pairs.
  double l_deflow = 0.0;
  double l_category = 0.0;
  double l_instance = 0.0;
  double l_total = 0.0;
  std::size_t frame_pairs = 0;
  std::optional<double> grad_check_max_rel_error;
};

inline ordered_json loss_json(const LossSummary& s, const LossWeights& w) {
  ordered_json j;
  j["frame_pairs"] = s.frame_pairs;
  j["l_deflow"] = s.l_deflow;
  j["l_category"] = s.l_category;
  j["l_instance"] = s.l_instance;
  j["l_total"] = s.l_total;
  j["weights_category"] = w.category;
  j["weights_speed"] = w.speed;
  j["weights_instance"] = w.instance;
  j["speed_bin_edges"] = w.speed_bin_edges;
  j["instance_gate"] = w.instance_gate;
  j["frame_dt"] = w.frame_dt;
  if (s.grad_check_max_rel_error) j["grad_check_max_rel_error"] = *s.grad_check_max_rel_error;
  return j;
}

inline std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace deltavox::report

#endif  // DELTAVOX_REPORT_HPP
