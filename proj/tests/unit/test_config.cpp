#include <gtest/gtest.h>

#include "deltavox/config.hpp"
#include "deltavox/io.hpp"

using namespace deltavox;

TEST(SceneConfig, ParsesFullDocument) {
  const auto s = config::parse_scene(R"({
    "seed": 11, "n_frames": 3, "dt": 0.05, "extent": [30, 20, 5],
    "background": {"ground_points": 100, "random_buildings": 2, "points_per_building": 10,
                   "buildings": [{"center": [1, 2, 3], "size": [4, 5, 6], "points": 7}]},
    "movers": [{"category": "PED", "size": [0.5, 0.5, 1.8], "points": 20,
                "velocity": [1, 0, 0], "position": [2, 3, 0.9], "yaw": 0.5}],
    "ego": {"velocity": [4, 0, 0], "yaw_rate": 0.1}
  })");
  EXPECT_EQ(s.seed, 11u);
  EXPECT_EQ(s.n_frames, 3);
  EXPECT_DOUBLE_EQ(s.dt, 0.05);
  EXPECT_EQ(s.extent, Vec3(30, 20, 5));
  EXPECT_EQ(s.ground_points, 100u);
  ASSERT_EQ(s.buildings.size(), 1u);
  EXPECT_EQ(s.buildings[0].points, 7u);
  ASSERT_EQ(s.movers.size(), 1u);
  EXPECT_EQ(s.movers[0].category, Category::Ped);
  EXPECT_EQ(s.movers[0].initial_pose.translation, Vec3(2, 3, 0.9));
  ASSERT_EQ(s.ego_trajectory.size(), 3u);
  EXPECT_NEAR(s.ego_trajectory[2].translation.x(), 0.4, 1e-15);
}

TEST(SceneConfig, ExplicitPoses) {
  const auto s = config::parse_scene(R"({"n_frames": 2, "background": {"ground_points": 10}, "ego": {"poses": [
    [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1], [1,0,0,1, 0,1,0,0, 0,0,1,0, 0,0,0,1]]}})");
  EXPECT_EQ(s.ego_trajectory[1].translation, Vec3(1, 0, 0));
}

TEST(SceneConfig, Rejections) {
  EXPECT_THROW(config::parse_scene(R"({"sede": 1})"), ConfigError);
  EXPECT_THROW(config::parse_scene(R"({"movers": [{"category": "BUS"}]})"), ConfigError);
  EXPECT_THROW(config::parse_scene(R"({"extent": [1, 2]})"), ConfigError);
  EXPECT_THROW(config::parse_scene("{"), ConfigError);
  EXPECT_THROW(config::parse_scene(R"({"n_frames": 0})"), ConfigError);
  EXPECT_THROW(config::parse_scene(R"({"ego": {"poses": [[1, 2]]}})"), ConfigError);
}

TEST(WeightsConfig, DefaultsAndOverrides) {
  bool pinned = true;
  const auto d = config::parse_weights("{}", &pinned);
  EXPECT_FALSE(pinned);
  EXPECT_EQ(d.category, LossWeights{}.category);
  const auto w = config::parse_weights(R"({"category": [2, 2, 2, 2], "frame_dt": 0.05})", &pinned);
  EXPECT_TRUE(pinned);
  EXPECT_EQ(w.instance, w.category);
  EXPECT_DOUBLE_EQ(w.frame_dt, 0.05);
  const auto i = config::parse_weights(R"({"category": [2, 2, 2, 2], "instance": [1, 1, 1, 1]})");
  EXPECT_EQ(i.instance[0], 1.0);
  EXPECT_THROW(config::parse_weights(R"({"speed": [1, 2]})"), ConfigError);
  EXPECT_THROW(config::parse_weights(R"({"gamma": [1, 2, 3]})"), ConfigError);
  EXPECT_THROW(config::parse_weights(R"({"category": [-1, 1, 1, 1]})"), ConfigError);
}

TEST(BenchConfig, ParsesCasesAndSweep) {
  const auto p = config::parse_bench(R"({"budget_bytes": 1000,
    "cases": [{"dims": [8, 8, 4], "channels": 2, "occupancy": 0.5, "n_frames": 3, "lambda": 0.25,
               "repetitions": 5, "seed": 9, "motion_fraction": 0}],
    "sweep": {"base": 0, "n_frames": [1, 2]}})");
  EXPECT_EQ(p.budget_bytes, 1000u);
  ASSERT_EQ(p.cases.size(), 1u);
  EXPECT_EQ(p.cases[0].dims, (std::array<std::int32_t, 3>{8, 8, 4}));
  EXPECT_DOUBLE_EQ(p.cases[0].decay, 0.25);
  EXPECT_EQ(p.cases[0].repetitions, 5);
  EXPECT_EQ(p.sweep_n_frames, (std::vector<int>{1, 2}));
  EXPECT_THROW(config::parse_bench(R"({"cases": [{"dim": [8, 8, 4]}]})"), ConfigError);
  EXPECT_THROW(config::parse_bench(R"({"cases": [], "sweep": {"base": 0, "n_frames": [1]}})"), ConfigError);
  EXPECT_THROW(config::parse_bench(R"({"cases": [{"lambda": 0}]})"), ConfigError);
}

TEST(SampleConfigs, Parse) {
  const std::filesystem::path dir = DELTAVOX_SAMPLES;
  EXPECT_NO_THROW(config::parse_scene(io::read_file(dir / "scene.json")));
  EXPECT_NO_THROW(config::parse_weights(io::read_file(dir / "weights.json")));
  EXPECT_NO_THROW(config::parse_bench(io::read_file(dir / "bench_cases.json")));
}
