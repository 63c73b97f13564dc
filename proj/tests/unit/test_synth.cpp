#include <gtest/gtest.h>

#include "deltavox/io.hpp"
#include "deltavox/synth.hpp"
#include "deltavox/testing.hpp"

using namespace deltavox;

TEST(Generate, SingleMoverResidual) {
  SceneSpec s;
  s.seed = 4;
  s.n_frames = 3;
  s.dt = 0.1;
  s.ground_points = 100;
  MoverSpec m;
  m.points = 50;
  m.velocity = Vec3(1, 0, 0);
  s.movers.push_back(m);
  const auto seq = generate(s);
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    const auto& f = seq.frames[k];
    ASSERT_EQ(f.size(), 150u);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Vec3& r = (*f.gt_residual_flow)[i];
      if (f.label(i)) {
        EXPECT_NEAR((r - Vec3(0.1, 0, 0)).norm(), 0.0, 1e-15);
        EXPECT_EQ(f.label(i)->category, Category::Car);
      } else {
        EXPECT_EQ(r, Vec3::Zero());
      }
    }
  }
}

TEST(Generate, StaticSceneHasZeroFlowAndNoLabels) {
  SceneSpec s;
  s.ground_points = 300;
  s.random_buildings = 2;
  s.points_per_random_building = 40;
  const auto seq = generate(s);
  for (const auto& f : seq.frames) {
    EXPECT_FALSE(f.labels);
    for (const auto& v : *f.gt_residual_flow) EXPECT_EQ(v, Vec3::Zero());
  }
}

TEST(Generate, Deterministic) {
  const auto spec = deltavox::testing::all_category_scene(21);
  const auto a = generate(spec);
  const auto b = generate(spec);
  for (std::size_t k = 0; k < a.frames.size(); ++k) EXPECT_EQ(io::encode_frame(a.frames[k]), io::encode_frame(b.frames[k]));
  auto other = spec;
  other.seed = 22;
  EXPECT_NE(io::encode_frame(generate(other).frames[0]), io::encode_frame(a.frames[0]));
}

TEST(Generate, GroundTruthTransportsOntoSurface) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto spec = deltavox::testing::all_category_scene(seed, 4, true);
    const auto seq = generate(spec);
    for (std::size_t k = 0; k + 1 < seq.frames.size(); ++k) {
      const auto& f = seq.frames[k];
      const auto rel = seq.relative(k);
      for (std::size_t i = 0; i < f.size(); ++i) {
        const auto& l = f.label(i);
        if (!l) continue;
        const Vec3 moved = rel.apply(f.points[i]) + (*f.gt_residual_flow)[i];
        const Vec3 local = seq.mover_pose(l->instance_id, k + 1).inverse().apply(seq.poses[k + 1].apply(moved));
        ASSERT_LT(box_surface_distance(local, spec.movers[l->instance_id].size), 1e-9);
      }
    }
  }
}

TEST(Generate, InstanceRigidity) {
  const auto seq = generate(deltavox::testing::all_category_scene(5));
  const auto& f = seq.frames[0];
  std::map<std::uint32_t, Vec3> seen;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f.label(i)) continue;
    auto [it, inserted] = seen.try_emplace(f.label(i)->instance_id, (*f.gt_residual_flow)[i]);
    EXPECT_EQ(it->second, (*f.gt_residual_flow)[i]);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Generate, CategoryCoverageAndCounts) {
  const auto spec = deltavox::testing::all_category_scene(8);
  const auto seq = generate(spec);
  std::array<std::size_t, kNumCategories> per{};
  for (std::size_t i = 0; i < seq.frames[1].size(); ++i) {
    if (const auto& l = seq.frames[1].label(i)) ++per[category_index(l->category)];
  }
  std::array<std::size_t, kNumCategories> expect{};
  for (const auto& m : spec.movers) expect[category_index(m.category)] += m.points;
  EXPECT_EQ(per, expect);
  for (auto n : per) EXPECT_GT(n, 0u);
}

TEST(Generate, StaticMoverPointsAreForegroundStatic) {
  SceneSpec s;
  MoverSpec parked;
  parked.points = 20;
  s.movers.push_back(parked);
  const auto seq = generate(s);
  for (const auto& v : *seq.frames[0].gt_residual_flow) EXPECT_EQ(v, Vec3::Zero());
  EXPECT_TRUE(seq.frames[0].labels);
}

TEST(SceneSpec, Validation) {
  SceneSpec s;
  s.ground_points = 10;
  s.n_frames = 1;
  EXPECT_THROW(s.validate(), ConfigError);
  s.n_frames = 3;
  s.ego_trajectory.resize(2);
  EXPECT_THROW(s.validate(), ConfigError);
  s.ego_trajectory.clear();
  s.ground_points = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(ReferencePredictor, Kinds) {
  const auto seq = generate(deltavox::testing::all_category_scene(2));
  const auto zero = reference_predictor(seq, PredictorKind::ZeroResidual);
  const auto oracle = reference_predictor(seq, PredictorKind::Oracle);
  const auto noisy0 = reference_predictor(seq, PredictorKind::NoisyOracle, 0.0, 7);
  ASSERT_EQ(zero.size(), seq.pair_count());
  for (std::size_t k = 0; k < zero.size(); ++k) {
    EXPECT_EQ(oracle[k].vectors, *seq.frames[k].gt_residual_flow);
    EXPECT_EQ(noisy0[k].vectors, oracle[k].vectors);
    for (const auto& v : zero[k].vectors) EXPECT_EQ(v, Vec3::Zero());
  }
  const auto a = reference_predictor(seq, PredictorKind::NoisyOracle, 0.05, 7);
  const auto b = reference_predictor(seq, PredictorKind::NoisyOracle, 0.05, 7);
  EXPECT_EQ(a[0].vectors, b[0].vectors);
  EXPECT_NE(a[0].vectors, oracle[0].vectors);
  EXPECT_THROW(reference_predictor(seq, PredictorKind::NoisyOracle, -1.0), InvalidInput);
}

TEST(BoxSurfaceDistance, Basics) {
  const Vec3 size(2, 2, 2);
  EXPECT_EQ(box_surface_distance(Vec3(1, 0, 0), size), 0.0);
  EXPECT_EQ(box_surface_distance(Vec3(0, 0, 0), size), 1.0);
  EXPECT_EQ(box_surface_distance(Vec3(3, 0, 0), size), 2.0);
}
