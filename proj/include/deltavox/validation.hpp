// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Seeded cross-module property suite. Every case derives its own seed from
// the run seed, so a reported failure can be replayed in isolation with
// replay(property, case_seed).

#ifndef DELTAVOX_VALIDATION_HPP
#define DELTAVOX_VALIDATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "deltavox/delta.hpp"
#include "deltavox/geometry.hpp"
#include "deltavox/io.hpp"
#include "deltavox/losses.hpp"
#include "deltavox/metrics.hpp"
#include "deltavox/parallel.hpp"
#include "deltavox/synth.hpp"
#include "deltavox/testing.hpp"
#include "deltavox/voxel.hpp"

namespace deltavox::validation {

using SparseDeltaFn = std::function<SparseVoxelTensor<double>(const SparseVoxelTensor<double>&,
                                                              const SparseVoxelTensor<double>&, DeltaOp)>;

/// Implementations under test. Swapping one in lets the suite be pointed at
/// a deliberately broken kernel.
struct Hooks {
  SparseDeltaFn sparse_delta = [](const auto& a, const auto& b, DeltaOp op) { return deltavox::sparse_delta(a, b, op); };
};

struct Failure {
  std::string property;
  std::uint64_t case_seed = 0;
  std::string detail;
};

struct Summary {
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::vector<Failure> failures;

  bool ok() const { return failed == 0; }
};

/// A property returns an empty string on success, otherwise a description
/// of the counterexample.
using PropertyFn = std::function<std::string(std::uint64_t case_seed, const Hooks&)>;

struct Property {
  std::string name;
  int cases;
  PropertyFn check;
};

namespace detail {

using testing::Rng;

inline std::string describe_coords(const std::vector<VoxelCoord>& c, std::size_t limit = 4) {
  std::ostringstream ss;
  ss << c.size() << " coords [";
  for (std::size_t i = 0; i < std::min(limit, c.size()); ++i) {
    ss << (i ? " " : "") << "(" << c[i][0] << "," << c[i][1] << "," << c[i][2] << ")";
  }
  if (c.size() > limit) ss << " ...";
  ss << "]";
  return ss.str();
}

inline std::string union_law(std::uint64_t seed, const Hooks& hooks) {
  Rng rng(seed);
  const auto spec = testing::random_spec(rng, 16, 4);
  const auto a = testing::random_tensor(rng, spec, testing::uniform(rng, 0.0, 0.2));
  const auto b = testing::random_tensor(rng, spec, testing::uniform(rng, 0.0, 0.2));
  const auto op = rng() % 2 ? DeltaOp::Add : DeltaOp::Sub;
  const auto out = hooks.sparse_delta(a, b, op);
  std::vector<VoxelCoord> expect;
  auto less = [&](const VoxelCoord& x, const VoxelCoord& y) { return spec.key(x) < spec.key(y); };
  std::set_union(a.coords().begin(), a.coords().end(), b.coords().begin(), b.coords().end(),
                 std::back_inserter(expect), less);
  if (out.coords() != expect) {
    return "coords(a op b) = " + describe_coords(out.coords()) + ", expected union " + describe_coords(expect);
  }
  try {
    out.validate();
  } catch (const Error& e) {
    return std::string("output invariant broken: ") + e.what();
  }
  return {};
}

inline std::string dense_equivalence(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  const auto spec = testing::random_spec(rng, 32, 8);
  static constexpr double kDecays[] = {0.2, 0.5, 1.0};
  const DeltaConfig cfg{testing::uniform_int(rng, 1, 5), kDecays[rng() % 3]};
  const double occ = testing::uniform(rng, 0.0, 0.2);
  const auto current = testing::random_tensor(rng, spec, occ);
  std::vector<SparseVoxelTensor<double>> past;
  for (int n = 0; n < cfg.n_past; ++n) past.push_back(testing::random_tensor(rng, spec, occ));
  const auto sparse = delta_scheme(current, past, cfg);
  const auto dense = dense_delta_oracle(current, past, cfg);
  const double err = max_abs_difference(sparse, dense);
  if (err > 1e-9) return "max |sparse - dense| = " + std::to_string(err);
  return {};
}

inline std::string constant_width(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  const auto spec = testing::random_spec(rng, 12, 8);
  const int n = testing::uniform_int(rng, 1, 15);
  const auto current = testing::random_tensor(rng, spec, 0.1);
  std::vector<SparseVoxelTensor<double>> past;
  for (int i = 0; i < n; ++i) past.push_back(testing::random_tensor(rng, spec, 0.1));
  const auto out = delta_scheme(current, past, DeltaConfig{n, 0.5});
  if (out.width() != static_cast<std::size_t>(spec.feature_width)) {
    return "width " + std::to_string(out.width()) + " for N=" + std::to_string(n);
  }
  if (out.features().size() != out.size() * out.width()) return "feature buffer size mismatch";
  return {};
}

inline std::string decay_monotone(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  const DeltaConfig cfg{testing::uniform_int(rng, 1, 15), testing::uniform(rng, 1e-3, 1.0)};
  const auto w = decay_weights(cfg);
  if (w.front() != 1.0) return "first weight is not 1";
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i] > w[i - 1]) return "weights increase at n=" + std::to_string(i + 1);
  }
  return {};
}

inline std::string voxelize_dense(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  auto spec = testing::random_spec(rng, 32, 4);
  const auto frame = testing::random_frame(rng, spec, static_cast<std::size_t>(testing::uniform_int(rng, 0, 2000)));
  const auto feats = testing::random_features(rng, frame.size(), spec.feature_width);
  const auto vox = voxelize<double>(frame, feats, spec);
  const auto oracle = testing::dense_accumulate(frame, feats, spec);
  const auto dense = to_dense(vox.tensor);
  for (std::size_t i = 0; i < dense.data.size(); ++i) {
    if (std::abs(dense.data[i] - oracle.means.data[i]) > 1e-9) return "cell " + std::to_string(i) + " differs";
  }
  std::int64_t active = 0;
  for (auto c : oracle.counts) active += c > 0;
  if (active != static_cast<std::int64_t>(vox.tensor.size())) return "active voxel count differs from oracle";
  try {
    vox.tensor.validate();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

inline std::string v2p_brute(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  auto spec = testing::random_spec(rng, 16, 3);
  const auto frame = testing::random_frame(rng, spec, static_cast<std::size_t>(testing::uniform_int(rng, 1, 600)));
  const auto feats = testing::random_features(rng, frame.size(), spec.feature_width);
  const auto vox = voxelize<double>(frame, feats, spec);
  const auto gathered = v2p_gather(vox.tensor, vox.index);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const auto cell = spec.locate(frame.points[i]);
    Eigen::RowVectorXd expect = Eigen::RowVectorXd::Zero(spec.feature_width);
    if (cell) {
      std::size_t members = 0;
      for (std::size_t j = 0; j < frame.size(); ++j) {
        if (spec.locate(frame.points[j]) == cell) {
          expect += feats.row(static_cast<Eigen::Index>(j));
          ++members;
        }
      }
      expect /= static_cast<double>(members);
      if (!vox.index.retained(i)) return "in-grid point " + std::to_string(i) + " dropped";
      if (vox.tensor.coords()[static_cast<std::size_t>(vox.index.voxel_of_point[i])] != *cell) {
        return "point " + std::to_string(i) + " mapped to the wrong voxel";
      }
    } else if (vox.index.retained(i)) {
      return "out-of-grid point " + std::to_string(i) + " retained";
    }
    if ((gathered.row(static_cast<Eigen::Index>(i)) - expect).cwiseAbs().maxCoeff() > 1e-9) {
      return "gathered row of point " + std::to_string(i) + " differs from brute-force mean";
    }
  }
  return {};
}

inline std::string ego_round_trip(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  const auto pose = RigidTransform::from_yaw(testing::uniform(rng, -3.14, 3.14),
                                             Vec3(testing::uniform(rng, -20, 20), testing::uniform(rng, -20, 20),
                                                  testing::uniform(rng, -2, 2)));
  PointCloudFrame f;
  for (int i = 0; i < 50; ++i) {
    f.points.emplace_back(testing::uniform(rng, -50, 50), testing::uniform(rng, -50, 50), testing::uniform(rng, -3, 3));
  }
  const auto zero = ego_flow(f, RigidTransform::identity());
  for (const auto& v : zero.vectors) {
    if (!v.isZero(0.0)) return "identity ego flow is not zero";
  }
  const auto back = apply_ego_compensation(apply_ego_compensation(f, pose), pose.inverse());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if ((back.points[i] - f.points[i]).cwiseAbs().maxCoeff() > 1e-9) return "T then T^-1 moved a point";
  }
  return {};
}

inline std::string gradient_check(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  const auto lc = testing::random_loss_case(rng);
  const auto report = total_loss(lc.pred, lc.gt, lc.frame, lc.weights);
  const auto fd = finite_diff_gradient(lc.pred, lc.gt, lc.frame, lc.weights, 1e-6);
  const double err = gradient_relative_error(report.gradient, fd);
  if (err > 1e-6) return "relative gradient error " + std::to_string(err);
  if (std::abs(report.l_total - (report.l_deflow + report.l_category + report.l_instance)) > 1e-12) {
    return "l_total is not the sum of its terms";
  }
  return {};
}

inline std::string loss_identities(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  const auto lc = testing::random_loss_case(rng);
  const auto r = total_loss(lc.pred, lc.gt, lc.frame, lc.weights);
  if (r.l_deflow < 0 || r.l_category < 0 || r.l_instance < 0) return "negative loss";
  const auto z = total_loss(lc.gt, lc.gt, lc.frame, lc.weights);
  if (z.l_total != 0.0) return "loss at truth is " + std::to_string(z.l_total);
  for (const auto& g : z.gradient) {
    if (!g.isZero(0.0)) return "gradient at truth is not zero";
  }
  return {};
}

inline std::string metric_identities(std::uint64_t seed, const Hooks&) {
  const auto spec = testing::all_category_scene(seed, 3, seed % 2 == 0);
  const auto seq = generate(spec);
  const auto zero = reference_predictor(seq, PredictorKind::ZeroResidual);
  const auto oracle = reference_predictor(seq, PredictorKind::Oracle);
  EvalAccumulator z(seq.dt);
  EvalAccumulator o(seq.dt);
  for (std::size_t k = 0; k < seq.pair_count(); ++k) {
    z.add(zero[k], seq.frames[k]);
    o.add(oracle[k], seq.frames[k]);
  }
  const auto zb = z.buckets();
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (!zb.ratio[c]) return std::string("category ") + category_name(kAllCategories[c]) + " has no dynamic points";
    if (std::abs(*zb.ratio[c] - 1.0) > 1e-9) return "zero-residual bucket ratio " + std::to_string(*zb.ratio[c]);
  }
  if (std::abs(z.threeway().bs) > 1e-9) return "zero-residual BS EPE is not zero";
  const auto ot = o.threeway();
  const auto ob = o.buckets();
  if (ot.mean != 0.0 || ot.fd != 0.0 || ot.fs != 0.0 || ot.bs != 0.0 || ob.mean != 0.0) {
    return "oracle predictor scores nonzero";
  }
  const auto& counts = z.threeway().counts;
  std::size_t total = 0;
  for (std::size_t k = 0; k < seq.pair_count(); ++k) total += seq.frames[k].size();
  if (counts[0] + counts[1] + counts[2] != total) return "regions do not partition the points";
  return {};
}

inline std::string synth_ground_truth(std::uint64_t seed, const Hooks&) {
  const auto spec = testing::all_category_scene(seed, 3, true);
  const auto seq = generate(spec);
  std::size_t expect = spec.ground_points + spec.random_buildings * spec.points_per_random_building;
  for (const auto& m : spec.movers) expect += m.points;
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    const auto& f = seq.frames[k];
    if (f.size() != expect) return "frame " + std::to_string(k) + " has " + std::to_string(f.size()) + " points";
    if (k + 1 == seq.frames.size()) break;
    const auto rel = seq.relative(k);
    std::vector<std::optional<Vec3>> shared(spec.movers.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto& l = f.label(i);
      if (!l) continue;
      const Vec3& r = (*f.gt_residual_flow)[i];
      auto& s = shared[l->instance_id];
      if (!s) s = r;
      if (*s != r) return "mover " + std::to_string(l->instance_id) + " has non-identical residual flow";
      const Vec3 world = seq.poses[k + 1].apply(rel.apply(f.points[i]) + r);
      const Vec3 local = seq.mover_pose(l->instance_id, k + 1).inverse().apply(world);
      const double d = box_surface_distance(local, spec.movers[l->instance_id].size);
      if (d > 1e-9) return "transported point " + std::to_string(i) + " is " + std::to_string(d) + " m off the surface";
    }
  }
  return {};
}

inline std::string format_round_trip(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  const auto spec = testing::all_category_scene(seed, 2, true);
  const auto seq = generate(spec);
  for (const auto& f : seq.frames) {
    const auto once = io::encode_frame(f);
    if (io::encode_frame(io::decode_frame(once)) != once) return "frame file not stable under write-read-write";
  }
  const auto flow = io::encode_flow(FlowField(*seq.frames[0].gt_residual_flow));
  if (io::encode_flow(io::decode_flow(flow)) != flow) return "flow file not stable";
  const auto vspec = testing::random_spec(rng, 16, 4);
  const auto t = testing::random_tensor(rng, vspec, 0.1);
  const auto tb = io::encode_tensor(t);
  if (io::encode_tensor(io::decode_tensor(tb)) != tb) return "tensor file not stable";
  return {};
}

inline std::string thread_determinism(std::uint64_t seed, const Hooks&) {
  Rng rng(seed);
  VoxelGridSpec spec;
  spec.dims = {24, 24, 8};
  spec.feature_width = 4;
  spec.resolution = Vec3(0.5, 0.5, 0.5);
  spec.origin = Vec3(-6, -6, -2);
  const auto frame = testing::random_frame(rng, spec, 20000);
  const auto feats = point_features(frame, spec, FeatureMode::Offset);
  std::string reference;
  for (int threads : {1, 2, 8}) {
    set_thread_count(threads);
    const auto vox = voxelize<double>(frame, feats, spec);
    const auto bytes = io::encode_tensor(vox.tensor) +
                       std::string(reinterpret_cast<const char*>(vox.index.voxel_of_point.data()),
                                   vox.index.voxel_of_point.size() * sizeof(std::int64_t));
    if (threads == 1) {
      reference = bytes;
    } else if (bytes != reference) {
      set_thread_count(-1);
      return "voxelize output differs with " + std::to_string(threads) + " threads";
    }
  }
  set_thread_count(-1);
  return {};
}

}  // namespace detail

inline std::vector<Property> properties() {
  return {
      {"delta.union_law", 60, detail::union_law},
      {"delta.dense_equivalence", 200, detail::dense_equivalence},
      {"delta.constant_width", 15, detail::constant_width},
      {"delta.decay_monotone", 20, detail::decay_monotone},
      {"voxel.dense_accumulation", 15, detail::voxelize_dense},
      {"voxel.v2p_brute_force", 10, detail::v2p_brute},
      {"geometry.ego_round_trip", 20, detail::ego_round_trip},
      {"losses.gradient_check", 15, detail::gradient_check},
      {"losses.identities", 20, detail::loss_identities},
      {"synth.ground_truth", 4, detail::synth_ground_truth},
      {"metrics.identities", 4, detail::metric_identities},
      {"io.round_trip", 4, detail::format_round_trip},
      {"parallel.thread_determinism", 2, detail::thread_determinism},
  };
}

/// Known-bad kernels for checking that the suite catches them.
/// "drop-coordinate" loses the last voxel of every sparse_delta result.
inline Hooks mutant_hooks(const std::string& name) {
  if (name != "drop-coordinate") throw ConfigError("unknown mutant \"" + name + "\"");
  Hooks h;
  h.sparse_delta = [](const SparseVoxelTensor<double>& a, const SparseVoxelTensor<double>& b, DeltaOp op) {
    const auto good = deltavox::sparse_delta(a, b, op);
    if (good.size() == 0) return good;
    std::vector<VoxelCoord> coords(good.coords().begin(), good.coords().end() - 1);
    std::vector<double> feats(good.features().begin(),
                              good.features().end() - static_cast<std::ptrdiff_t>(good.width()));
    return SparseVoxelTensor<double>(good.spec(), std::move(coords), std::move(feats));
  };
  return h;
}

inline std::uint64_t case_seed(std::uint64_t run_seed, std::size_t property_index, int case_index) {
  return testing::mix_seed(run_seed, property_index, static_cast<std::uint64_t>(case_index));
}

/// Runs one case by property name; empty string on success.
inline std::string replay(const std::string& property, std::uint64_t seed, const Hooks& hooks = {}) {
  for (const auto& p : properties()) {
    if (p.name == property) {
      try {
        return p.check(seed, hooks);
      } catch (const std::exception& e) {
        return std::string("exception: ") + e.what();
      }
    }
  }
  throw ConfigError("unknown property \"" + property + "\"");
}

/// Runs every property. A property stops at its first failing case.
inline Summary run_all(std::uint64_t seed, const Hooks& hooks = {}) {
  Summary s;
  const auto props = properties();
  for (std::size_t p = 0; p < props.size(); ++p) {
    bool failed = false;
    for (int c = 0; c < props[p].cases && !failed; ++c) {
      const auto cs = case_seed(seed, p, c);
      std::string detail;
      try {
        detail = props[p].check(cs, hooks);
      } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
      }
      if (!detail.empty()) {
        failed = true;
        s.failures.push_back({props[p].name, cs, detail});
      }
    }
    if (failed) {
      ++s.failed;
    } else {
      ++s.passed;
    }
  }
  return s;
}

}  // namespace deltavox::validation

#endif  // DELTAVOX_VALIDATION_HPP
