// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Generates a small scene, builds two-frame delta features of the last frame
// and scores the zero-residual predictor.

#include <cstdio>

#include "deltavox/deltavox.hpp"

using namespace deltavox;

int main() {
  SceneSpec scene;
  scene.seed = 3;
  scene.n_frames = 3;
  scene.ground_points = 2000;
  MoverSpec car;
  car.points = 400;
  car.velocity = Vec3(10, 0, 0);
  car.initial_pose = RigidTransform::from_translation(Vec3(-5, 3, 0.75));
  scene.movers.push_back(car);
  for (int k = 0; k < scene.n_frames; ++k) {
    scene.ego_trajectory.push_back(RigidTransform::from_translation(Vec3(0.5 * k, 0, 0)));
  }
  const SceneSequence seq = generate(scene);

  VoxelGridSpec grid{Vec3(-25.6, -25.6, -2.0), Vec3(0.2, 0.2, 0.2), {256, 256, 32}, 1};
  const std::size_t t = seq.frames.size() - 1;
  auto voxels = [&](const PointCloudFrame& f) {
    return voxelize<double>(f, point_features(f, grid, FeatureMode::Occupancy), grid).tensor;
  };
  std::vector<SparseVoxelTensor<double>> past;
  for (std::size_t n = 1; n <= 2; ++n) {
    past.push_back(voxels(apply_ego_compensation(seq.frames[t - n], relative_pose(seq.poses[t - n], seq.poses[t]))));
  }
  const auto delta = delta_scheme(voxels(seq.frames[t]), past, DeltaConfig{2, 0.5});
  const auto storage = storage_report(grid, static_cast<std::int64_t>(delta.size()));
  std::printf("delta: %zu voxels x %zu channels (%s%% of the grid)\n", delta.size(), delta.width(),
              storage.ratio_pct_text().c_str());

  EvalAccumulator acc(seq.dt);
  const auto zero = reference_predictor(seq, PredictorKind::ZeroResidual);
  for (std::size_t k = 0; k < zero.size(); ++k) acc.add(zero[k], seq.frames[k]);
  const auto b = acc.buckets();
  const auto e = acc.threeway();
  std::printf("zero residual: CAR bucket %.3f, EPE FD %.2f cm, BS %.2f cm\n", b.ratio[0].value_or(0.0), e.fd, e.bs);
  return 0;
}
