#include <gtest/gtest.h>

#include "deltavox/metrics.hpp"
#include "deltavox/synth.hpp"
#include "deltavox/testing.hpp"

using namespace deltavox;

namespace {

PointCloudFrame labeled(const std::vector<Vec3>& gt, const std::vector<std::optional<InstanceLabel>>& labels) {
  PointCloudFrame f;
  f.points.assign(gt.size(), Vec3::Zero());
  f.gt_residual_flow = gt;
  f.labels = labels;
  return f;
}

}  // namespace

TEST(ClassifyPoints, TruthTable) {
  const double dt = 0.1;
  const auto f = labeled({Vec3::Zero(), Vec3(0.02, 0, 0), Vec3(0.03, 0.04, 0), Vec3(0.2, 0, 0), Vec3(0.1, 0, 0)},
                         {std::nullopt, InstanceLabel{1, Category::Ped}, InstanceLabel{2, Category::Car},
                          InstanceLabel{3, Category::Vru}, std::nullopt});
  const auto r = classify_points(f, dt);
  EXPECT_EQ(r[0], Region::BackgroundStatic);
  EXPECT_EQ(r[1], Region::ForegroundStatic);   // 0.2 m/s
  EXPECT_EQ(r[2], Region::ForegroundStatic);   // 0.5 m/s: not strictly above
  EXPECT_EQ(r[3], Region::ForegroundDynamic);  // 2 m/s
  EXPECT_EQ(r[4], Region::ForegroundDynamic);  // unlabeled but moving
}

TEST(ClassifyPoints, BoundaryIsStrict) {
  EXPECT_FALSE(is_dynamic(Vec3(0.5, 0, 0), 1.0));
  EXPECT_TRUE(is_dynamic(Vec3(std::nextafter(0.5, 1.0), 0, 0), 1.0));
}

TEST(ClassifyPoints, NeedsGroundTruth) {
  PointCloudFrame f;
  f.points = {Vec3::Zero()};
  EXPECT_THROW(classify_points(f, 0.1), InvalidInput);
}

TEST(ThreewayEpe, PerfectPrediction) {
  const FlowField gt({Vec3(1, 0, 0), Vec3(0, 0, 0), Vec3(0.01, 0, 0)});
  const auto e = threeway_epe(gt, gt, {Region::ForegroundDynamic, Region::BackgroundStatic, Region::ForegroundStatic});
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.fd, 0.0);
  EXPECT_EQ(e.fs, 0.0);
  EXPECT_EQ(e.bs, 0.0);
}

TEST(ThreewayEpe, CentimetreConversion) {
  const FlowField gt({Vec3(1, 0, 0)});
  const FlowField pred({Vec3(1.03, 0.04, 0)});
  const auto e = threeway_epe(pred, gt, {Region::ForegroundDynamic});
  EXPECT_NEAR(e.fd, 5.0, 1e-12);
  EXPECT_EQ(e.counts[0], 1u);
  EXPECT_EQ(e.counts[1], 0u);
  EXPECT_NEAR(e.mean, 5.0 / 3.0, 1e-12);
}

TEST(ThreewayEpe, MeanOfRegions) {
  deltavox::testing::Rng rng(1);
  std::vector<Vec3> g;
  std::vector<Vec3> p;
  std::vector<Region> l;
  for (int i = 0; i < 60; ++i) {
    g.emplace_back(deltavox::testing::uniform(rng, -1, 1), deltavox::testing::uniform(rng, -1, 1), 0);
    p.push_back(g.back() + Vec3(deltavox::testing::uniform(rng, -0.1, 0.1), 0, 0));
    l.push_back(static_cast<Region>(i % 3));
  }
  const auto e = threeway_epe(FlowField(p), FlowField(g), l);
  EXPECT_NEAR(e.mean, (e.fd + e.fs + e.bs) / 3.0, 1e-12);
}

TEST(ThreewayEpe, ScaleEquivariance) {
  deltavox::testing::Rng rng(2);
  std::vector<Vec3> g;
  std::vector<Vec3> p;
  std::vector<Region> l;
  for (int i = 0; i < 30; ++i) {
    g.emplace_back(deltavox::testing::uniform(rng, -1, 1), deltavox::testing::uniform(rng, -1, 1), 0);
    p.emplace_back(deltavox::testing::uniform(rng, -1, 1), deltavox::testing::uniform(rng, -1, 1), 0);
    l.push_back(static_cast<Region>(i % 3));
  }
  const auto e = threeway_epe(FlowField(p), FlowField(g), l);
  for (auto& v : g) v *= 4.0;
  for (auto& v : p) v *= 4.0;
  const auto e4 = threeway_epe(FlowField(p), FlowField(g), l);
  EXPECT_NEAR(e4.fd, 4.0 * e.fd, 1e-12);
  EXPECT_NEAR(e4.fs, 4.0 * e.fs, 1e-12);
  EXPECT_NEAR(e4.bs, 4.0 * e.bs, 1e-12);
}

TEST(ThreewayEpe, LengthMismatch) {
  EXPECT_THROW(threeway_epe(FlowField::zeros(2), FlowField::zeros(2), {Region::BackgroundStatic}), InvalidInput);
}

TEST(BucketNormalized, HandRatio) {
  const auto f = labeled({Vec3(0.1, 0, 0)}, {InstanceLabel{1, Category::Car}});
  const FlowField pred({Vec3(0.1, 0.02, 0)});
  const auto b = bucket_normalized(pred, FlowField(*f.gt_residual_flow), f, 0.1);
  ASSERT_TRUE(b.ratio[0]);
  EXPECT_NEAR(*b.ratio[0], 0.2, 1e-12);
  EXPECT_FALSE(b.ratio[1]);
  EXPECT_FALSE(b.ratio[2]);
  EXPECT_FALSE(b.ratio[3]);
  EXPECT_NEAR(b.mean, 0.2, 1e-12);
}

TEST(BucketNormalized, ZeroResidualIsOne) {
  const auto f = labeled({Vec3(0.1, 0, 0), Vec3(0, 0.3, 0), Vec3(0.07, 0, 0.01), Vec3(0.2, 0.2, 0), Vec3(0.01, 0, 0)},
                         {InstanceLabel{1, Category::Car}, InstanceLabel{2, Category::Other},
                          InstanceLabel{3, Category::Ped}, InstanceLabel{4, Category::Vru},
                          InstanceLabel{5, Category::Vru}});
  const auto b = bucket_normalized(FlowField::zeros(5), FlowField(*f.gt_residual_flow), f, 0.1);
  for (const auto& r : b.ratio) {
    ASSERT_TRUE(r);
    EXPECT_EQ(*r, 1.0);
  }
  EXPECT_EQ(b.mean, 1.0);
  EXPECT_EQ(b.counts[3], 1u);
}

TEST(BucketNormalized, PerfectIsZero) {
  const auto f = labeled({Vec3(0.1, 0, 0), Vec3(0, 0.3, 0)}, {InstanceLabel{1, Category::Car}, InstanceLabel{2, Category::Ped}});
  const FlowField gt(*f.gt_residual_flow);
  const auto b = bucket_normalized(gt, gt, f, 0.1);
  EXPECT_EQ(*b.ratio[0], 0.0);
  EXPECT_EQ(*b.ratio[2], 0.0);
  EXPECT_EQ(b.mean, 0.0);
}

TEST(BucketNormalized, AbsentCategoriesLeaveTheMean) {
  const auto f = labeled({Vec3(0.1, 0, 0), Vec3(0.1, 0, 0)}, {InstanceLabel{1, Category::Car}, InstanceLabel{2, Category::Vru}});
  const FlowField pred({Vec3(0.1, 0.01, 0), Vec3(0.1, 0.03, 0)});
  const auto b = bucket_normalized(pred, FlowField(*f.gt_residual_flow), f, 0.1);
  EXPECT_NEAR(b.mean, (0.1 + 0.3) / 2.0, 1e-12);
}

TEST(SyntheticScenes, EgoFlowIdentity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto seq = generate(deltavox::testing::all_category_scene(seed, 3, seed % 2 == 0));
    const auto zero = reference_predictor(seq, PredictorKind::ZeroResidual);
    EvalAccumulator acc(seq.dt);
    for (std::size_t k = 0; k < zero.size(); ++k) acc.add(zero[k], seq.frames[k]);
    const auto b = acc.buckets();
    for (const auto& r : b.ratio) {
      ASSERT_TRUE(r);
      EXPECT_NEAR(*r, 1.0, 1e-9);
    }
    EXPECT_NEAR(acc.threeway().bs, 0.0, 1e-9);
    EXPECT_GT(acc.threeway().counts[1], 0u);  // the parked car
  }
}

TEST(SyntheticScenes, OracleScoresZero) {
  const auto seq = generate(deltavox::testing::all_category_scene(3));
  const auto oracle = reference_predictor(seq, PredictorKind::Oracle);
  EvalAccumulator acc(seq.dt);
  for (std::size_t k = 0; k < oracle.size(); ++k) acc.add(oracle[k], seq.frames[k]);
  const auto t = acc.threeway();
  EXPECT_EQ(t.mean, 0.0);
  EXPECT_EQ(t.fd, 0.0);
  EXPECT_EQ(acc.buckets().mean, 0.0);
  std::size_t total = 0;
  for (std::size_t k = 0; k < oracle.size(); ++k) total += seq.frames[k].size();
  EXPECT_EQ(t.counts[0] + t.counts[1] + t.counts[2], total);
}
