#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "deltavox/geometry.hpp"
#include "deltavox/testing.hpp"

using namespace deltavox;

namespace {

PointCloudFrame cloud(std::initializer_list<Vec3> pts) {
  PointCloudFrame f;
  f.points.assign(pts.begin(), pts.end());
  return f;
}

// Brute-force transform with an explicitly written 4×4 homogeneous matrix.
Vec3 homogeneous_apply(const std::array<double, 16>& m, const Vec3& p) {
  Vec3 out;
  for (int r = 0; r < 3; ++r) {
    out[r] = m[r * 4 + 0] * p.x() + m[r * 4 + 1] * p.y() + m[r * 4 + 2] * p.z() + m[r * 4 + 3];
  }
  return out;
}

}  // namespace

TEST(EgoFlow, IdentityIsZero) {
  deltavox::testing::Rng rng(11);
  PointCloudFrame f;
  for (int i = 0; i < 100; ++i) f.points.emplace_back(deltavox::testing::uniform(rng, -50, 50), deltavox::testing::uniform(rng, -50, 50), 1.0);
  for (const auto& v : ego_flow(f, RigidTransform::identity()).vectors) EXPECT_EQ(v, Vec3::Zero());
}

TEST(EgoFlow, PureTranslationIsConstant) {
  const auto f = cloud({Vec3(0, 0, 0), Vec3(-3, 7, 2), Vec3(100, -20, 0.5)});
  for (const auto& v : ego_flow(f, RigidTransform::from_translation(Vec3(1, 0, 0))).vectors) {
    EXPECT_EQ(v, Vec3(1, 0, 0));
  }
}

TEST(EgoFlow, QuarterYaw) {
  const auto f = cloud({Vec3(1, 0, 0)});
  const auto pose = RigidTransform::from_yaw(std::numbers::pi / 2);
  const Vec3 v = ego_flow(f, pose)[0];
  EXPECT_NEAR(v.x(), -1.0, 1e-15);
  EXPECT_NEAR(v.y(), 1.0, 1e-15);
  EXPECT_NEAR(v.z(), 0.0, 1e-15);
  const std::array<double, 16> m = {0, -1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  EXPECT_LT((homogeneous_apply(m, f.points[0]) - f.points[0] - v).norm(), 1e-15);
}

TEST(EgoFlow, MatchesHomogeneousOracle) {
  deltavox::testing::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pose = RigidTransform::from_yaw(deltavox::testing::uniform(rng, -3, 3),
                                               Vec3(deltavox::testing::uniform(rng, -5, 5), deltavox::testing::uniform(rng, -5, 5), 0.3));
    const auto m = pose.to_row_major();
    PointCloudFrame f;
    for (int i = 0; i < 10; ++i) f.points.emplace_back(deltavox::testing::uniform(rng, -9, 9), deltavox::testing::uniform(rng, -9, 9), 2.0);
    const auto flow = ego_flow(f, pose);
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_LT((f.points[i] + flow[i] - homogeneous_apply(m, f.points[i])).norm(), 1e-12);
    }
  }
}

TEST(EgoFlow, RejectsNonRigidPose) {
  RigidTransform bad;
  bad.rotation(0, 0) = 2.0;
  EXPECT_THROW(ego_flow(cloud({Vec3(1, 2, 3)}), bad), InvalidInput);
}

TEST(EgoFlow, RejectsNonFinitePoint) {
  EXPECT_THROW(ego_flow(cloud({Vec3(NAN, 0, 0)}), RigidTransform::identity()), InvalidInput);
}

TEST(ComposeFlow, AdditiveIdentities) {
  const FlowField ego({Vec3(1, 2, 3), Vec3(-1, 0, 4)});
  const FlowField zero = FlowField::zeros(2);
  EXPECT_EQ(compose_flow(ego, zero).vectors, ego.vectors);
  EXPECT_EQ(compose_flow(zero, ego).vectors, ego.vectors);
}

TEST(ComposeFlow, Componentwise) {
  const auto out = compose_flow(FlowField({Vec3(1, 0, 0)}), FlowField({Vec3(0, 2, 0)}));
  EXPECT_EQ(out[0], Vec3(1, 2, 0));
}

TEST(ComposeFlow, LengthMismatch) {
  EXPECT_THROW(compose_flow(FlowField::zeros(2), FlowField::zeros(3)), InvalidInput);
}

TEST(EgoCompensation, IdentityKeepsFrame) {
  auto f = cloud({Vec3(1, 2, 3)});
  f.gt_residual_flow = std::vector<Vec3>{Vec3(0.1, 0, 0)};
  const auto out = apply_ego_compensation(f, RigidTransform::identity());
  EXPECT_EQ(out.points, f.points);
  EXPECT_EQ(*out.gt_residual_flow, *f.gt_residual_flow);
}

TEST(EgoCompensation, TranslationRaisesZ) {
  const auto out = apply_ego_compensation(cloud({Vec3(1, 2, 3), Vec3(0, 0, -1)}),
                                          RigidTransform::from_translation(Vec3(0, 0, 5)));
  EXPECT_EQ(out.points[0], Vec3(1, 2, 8));
  EXPECT_EQ(out.points[1], Vec3(0, 0, 4));
}

TEST(EgoCompensation, HalfTurnRotatesPointAndFlow) {
  auto f = cloud({Vec3(2, 0, 0)});
  f.gt_residual_flow = std::vector<Vec3>{Vec3(1, 0, 0)};
  f.labels = std::vector<std::optional<InstanceLabel>>{InstanceLabel{3, Category::Ped}};
  const auto out = apply_ego_compensation(f, RigidTransform::from_yaw(std::numbers::pi));
  EXPECT_LT((out.points[0] - Vec3(-2, 0, 0)).norm(), 1e-15);
  EXPECT_LT(((*out.gt_residual_flow)[0] - Vec3(-1, 0, 0)).norm(), 1e-15);
  EXPECT_EQ(out.label(0)->instance_id, 3u);
}

TEST(EgoCompensation, InverseRoundTrip) {
  deltavox::testing::Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const auto pose = RigidTransform::from_yaw(deltavox::testing::uniform(rng, -3, 3),
                                               Vec3(deltavox::testing::uniform(rng, -20, 20), deltavox::testing::uniform(rng, -20, 20), 1));
    PointCloudFrame f;
    for (int i = 0; i < 30; ++i) f.points.emplace_back(deltavox::testing::uniform(rng, -40, 40), deltavox::testing::uniform(rng, -40, 40), 0);
    const auto back = apply_ego_compensation(apply_ego_compensation(f, pose), pose.inverse());
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_LT((back.points[i] - f.points[i]).norm(), 1e-9);
  }
}

TEST(RelativePose, MapsEarlierSensorFrameIntoLater) {
  const auto a = RigidTransform::from_yaw(0.3, Vec3(1, 2, 0));
  const auto b = RigidTransform::from_yaw(-0.2, Vec3(4, -1, 0.5));
  const Vec3 p(3, -2, 1);
  // Same world point seen from a, then expressed in b.
  const Vec3 world = a.apply(p);
  EXPECT_LT((relative_pose(a, b).apply(p) - b.inverse().apply(world)).norm(), 1e-12);
}

TEST(RigidTransform, RowMajorRoundTrip) {
  const auto t = RigidTransform::from_yaw(1.1, Vec3(1, 2, 3));
  const auto back = RigidTransform::from_row_major(t.to_row_major());
  EXPECT_EQ(back.rotation, t.rotation);
  EXPECT_EQ(back.translation, t.translation);
  const auto m = t.to_row_major();
  EXPECT_EQ(m[12], 0.0);
  EXPECT_EQ(m[15], 1.0);
}

TEST(Category, Codes) {
  EXPECT_EQ(category_from_code(0), Category::Car);
  EXPECT_EQ(category_from_code(3), Category::Vru);
  EXPECT_THROW(category_from_code(4), InvalidInput);
  EXPECT_STREQ(category_name(Category::Other), "OTHER");
}

TEST(PointCloudFrame, ValidateLabelLengths) {
  auto f = cloud({Vec3(0, 0, 0), Vec3(1, 1, 1)});
  f.labels = std::vector<std::optional<InstanceLabel>>(1);
  EXPECT_THROW(f.validate(), InvalidInput);
}
