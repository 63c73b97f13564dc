// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// JSON configuration documents: scene specs, loss weight tables and
// benchmark case lists. Unknown keys are rejected so typos surface early.

#ifndef DELTAVOX_CONFIG_HPP
#define DELTAVOX_CONFIG_HPP

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltavox/bench.hpp"
#include "deltavox/errors.hpp"
#include "deltavox/geometry.hpp"
#include "deltavox/losses.hpp"
#include "deltavox/synth.hpp"

namespace deltavox::config {

using json = nlohmann::json;

namespace detail {

inline void allow_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto allowed : keys) ok = ok || k == allowed;
    if (!ok) throw ConfigError("unknown key \"" + k + "\" in " + std::string(where));
  }
}

inline Vec3 vec3(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <std::size_t N>
std::array<double, N> fixed(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != N) {
    throw ConfigError(std::string(what) + " must have " + std::to_string(N) + " entries");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<double>();
  return out;
}

inline Category category(const std::string& name) {
  for (auto c : kAllCategories) {
    if (name == category_name(c)) return c;
  }
  throw ConfigError("unknown category \"" + name + "\" (expected CAR, OTHER, PED or VRU)");
}

template <class Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
}

}  // namespace detail

/// Scene document:
///
///   { "seed": 7, "n_frames": 5, "dt": 0.1, "extent": [40, 40, 6],
///     "background": { "ground_points": 2000, "random_buildings": 3,
///                     "points_per_building": 150,
///                     "buildings": [ { "center": [...], "size": [...], "points": 100 } ] },
///     "movers": [ { "category": "CAR", "size": [4, 2, 1.5], "points": 200,
///                   "velocity": [5, 0, 0], "position": [0, 5, 0.75], "yaw": 0 } ],
///     "ego": { "velocity": [3, 0, 0], "yaw_rate": 0.05 }   // or { "poses": [[16 doubles], ...] }
///   }
inline SceneSpec parse_scene(std::string_view text) {
  return detail::guarded([&] {
    const json j = json::parse(text);
    detail::allow_keys(j, "scene", {"seed", "n_frames", "dt", "extent", "background", "movers", "ego"});
    SceneSpec s;
    s.seed = j.value("seed", std::uint64_t{0});
    s.n_frames = j.value("n_frames", 2);
    s.dt = j.value("dt", 0.1);
    if (j.contains("extent")) s.extent = detail::vec3(j["extent"], "extent");
    if (j.contains("background")) {
      const auto& b = j["background"];
      detail::allow_keys(b, "background", {"ground_points", "random_buildings", "points_per_building", "buildings"});
      s.ground_points = b.value("ground_points", std::size_t{0});
      s.random_buildings = b.value("random_buildings", std::size_t{0});
      s.points_per_random_building = b.value("points_per_building", std::size_t{0});
      for (const auto& e : b.value("buildings", json::array())) {
        detail::allow_keys(e, "building", {"center", "size", "points"});
        s.buildings.push_back({detail::vec3(e.at("center"), "center"), detail::vec3(e.at("size"), "size"),
                               e.at("points").get<std::size_t>()});
      }
    }
    for (const auto& m : j.value("movers", json::array())) {
      detail::allow_keys(m, "mover", {"category", "size", "points", "velocity", "position", "yaw"});
      MoverSpec mv;
      mv.category = detail::category(m.at("category").get<std::string>());
      if (m.contains("size")) mv.size = detail::vec3(m["size"], "size");
      mv.points = m.value("points", std::size_t{100});
      if (m.contains("velocity")) mv.velocity = detail::vec3(m["velocity"], "velocity");
      const Vec3 pos = m.contains("position") ? detail::vec3(m["position"], "position") : Vec3::Zero();
      mv.initial_pose = RigidTransform::from_yaw(m.value("yaw", 0.0), pos);
      s.movers.push_back(mv);
    }
    if (j.contains("ego")) {
      const auto& e = j["ego"];
      detail::allow_keys(e, "ego", {"poses", "velocity", "yaw_rate"});
      if (e.contains("poses")) {
        for (const auto& p : e["poses"]) {
          const auto v = p.get<std::vector<double>>();
          if (v.size() != 16) throw ConfigError("ego pose must have 16 entries");
          std::array<double, 16> arr{};
          std::copy(v.begin(), v.end(), arr.begin());
          s.ego_trajectory.push_back(RigidTransform::from_row_major(arr));
        }
      } else {
        const Vec3 vel = e.contains("velocity") ? detail::vec3(e["velocity"], "velocity") : Vec3::Zero();
        const double yaw_rate = e.value("yaw_rate", 0.0);
        for (int k = 0; k < s.n_frames; ++k) {
          const double t = s.dt * k;
          s.ego_trajectory.push_back(RigidTransform::from_yaw(yaw_rate * t, vel * t));
        }
      }
    }
    s.validate();
    return s;
  });
}

/// Weight document; every key is optional and falls back to the defaults.
///
///   { "category": [1.0, 1.5, 2.0, 2.5], "speed": [0.1, 0.4, 0.5],
///     "instance": [...], "speed_bin_edges": [0.4, 1.0],
///     "instance_gate": 0.4, "frame_dt": 0.1 }
///
/// `has_frame_dt` reports whether the document pinned frame_dt.
inline LossWeights parse_weights(std::string_view text, bool* has_frame_dt = nullptr) {
  return detail::guarded([&] {
    const json j = json::parse(text);
    detail::allow_keys(j, "weights",
                       {"category", "speed", "instance", "speed_bin_edges", "instance_gate", "frame_dt"});
    LossWeights w;
    if (j.contains("category")) {
      w.category = detail::fixed<kNumCategories>(j["category"], "category");
      // The instance table follows the category table unless given.
      w.instance = w.category;
    }
    if (j.contains("speed")) w.speed = detail::fixed<kNumSpeedBins>(j["speed"], "speed");
    if (j.contains("instance")) w.instance = detail::fixed<kNumCategories>(j["instance"], "instance");
    if (j.contains("speed_bin_edges")) w.speed_bin_edges = detail::fixed<2>(j["speed_bin_edges"], "speed_bin_edges");
    w.instance_gate = j.value("instance_gate", w.instance_gate);
    w.frame_dt = j.value("frame_dt", w.frame_dt);
    if (has_frame_dt) *has_frame_dt = j.contains("frame_dt");
    w.validate();
    return w;
  });
}

struct BenchPlan {
  std::vector<bench::BenchCase> cases;
  std::uint64_t budget_bytes = bench::kDefaultBudget;
  /// Past-frame counts for the scaling sweep; empty disables it.
  std::vector<int> sweep_n_frames;
  /// Index into `cases` of the sweep base case.
  std::size_t sweep_base = 0;
};

/// Bench document:
///
///   { "budget_bytes": 2147483648,
///     "cases": [ { "dims": [512, 512, 32], "channels": 16, "occupancy": 0.005,
///                  "n_frames": 2, "lambda": 0.5, "repetitions": 3, "seed": 0,
///                  "motion_fraction": 0.1 } ],
///     "sweep": { "base": 0, "n_frames": [1, 2, 5, 10, 15] } }
inline BenchPlan parse_bench(std::string_view text) {
  return detail::guarded([&] {
    const json j = json::parse(text);
    detail::allow_keys(j, "bench", {"budget_bytes", "cases", "sweep"});
    BenchPlan plan;
    plan.budget_bytes = j.value("budget_bytes", bench::kDefaultBudget);
    for (const auto& e : j.at("cases")) {
      detail::allow_keys(e, "case",
                         {"dims", "channels", "occupancy", "n_frames", "lambda", "repetitions", "seed", "motion_fraction"});
      bench::BenchCase c;
      if (e.contains("dims")) {
        const auto d = e["dims"].get<std::vector<std::int32_t>>();
        if (d.size() != 3) throw ConfigError("dims must have 3 entries");
        c.dims = {d[0], d[1], d[2]};
      }
      c.channels = e.value("channels", c.channels);
      c.occupancy = e.value("occupancy", c.occupancy);
      c.n_frames = e.value("n_frames", c.n_frames);
      c.decay = e.value("lambda", c.decay);
      c.repetitions = e.value("repetitions", c.repetitions);
      c.seed = e.value("seed", c.seed);
      c.motion_fraction = e.value("motion_fraction", c.motion_fraction);
      c.validate();
      plan.cases.push_back(c);
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      detail::allow_keys(s, "sweep", {"base", "n_frames"});
      plan.sweep_base = s.value("base", std::size_t{0});
      plan.sweep_n_frames = s.at("n_frames").get<std::vector<int>>();
      if (plan.sweep_base >= plan.cases.size()) throw ConfigError("sweep base index out of range");
    }
    return plan;
  });
}

}  // namespace deltavox::config

#endif  // DELTAVOX_CONFIG_HPP
