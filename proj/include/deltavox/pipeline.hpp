// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end glue over loaded sequences: delta features of the latest frame,
// predictions, evaluation and losses pooled over frame pairs.

#ifndef DELTAVOX_PIPELINE_HPP
#define DELTAVOX_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "deltavox/delta.hpp"
#include "deltavox/errors.hpp"
#include "deltavox/io.hpp"
#include "deltavox/losses.hpp"
#include "deltavox/metrics.hpp"
#include "deltavox/report.hpp"
#include "deltavox/voxel.hpp"

namespace deltavox::pipeline {

struct DeltaInputs {
  SparseVoxelTensor<double> current;
  /// Newest (t-1) first, already moved into the sensor frame of t.
  std::vector<SparseVoxelTensor<double>> past;
};

/// Voxelizes the latest frame and the N frames before it in the latest
/// frame's sensor coordinates. Features are computed after compensation.
inline DeltaInputs build_delta_inputs(const io::LoadedSequence& seq, const VoxelGridSpec& spec, FeatureMode mode,
                                      int n_past) {
  if (n_past < 1) throw ConfigError("--frames must be >= 1");
  if (seq.frames.size() < static_cast<std::size_t>(n_past) + 1) {
    throw ConfigError("manifest has " + std::to_string(seq.frames.size()) + " frames, need at least " +
                      std::to_string(n_past + 1));
  }
  const std::size_t t = seq.frames.size() - 1;
  auto voxels_of = [&](const PointCloudFrame& f) {
    return voxelize<double>(f, point_features(f, spec, mode), spec).tensor;
  };
  DeltaInputs in;
  in.current = voxels_of(seq.frames[t]);
  for (int n = 1; n <= n_past; ++n) {
    const std::size_t k = t - static_cast<std::size_t>(n);
    in.past.push_back(voxels_of(apply_ego_compensation(seq.frames[k], seq.relative(k, t))));
  }
  return in;
}

enum class PredSource { Directory, Zero, Oracle, Noisy };

struct PredictionSpec {
  PredSource source = PredSource::Zero;
  std::filesystem::path directory;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Parses "builtin:zero", "builtin:oracle", "builtin:noisy:<sigma>" or a directory.
inline PredictionSpec parse_prediction(const std::string& arg, std::uint64_t seed = 0) {
  PredictionSpec p;
  p.seed = seed;
  if (arg == "builtin:zero") {
    p.source = PredSource::Zero;
  } else if (arg == "builtin:oracle") {
    p.source = PredSource::Oracle;
  } else if (arg.rfind("builtin:noisy:", 0) == 0) {
    p.source = PredSource::Noisy;
    try {
      p.sigma = std::stod(arg.substr(14));
    } catch (...) {
      throw ConfigError("cannot parse sigma in \"" + arg + "\"");
    }
    if (!(p.sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  } else if (arg.rfind("builtin:", 0) == 0) {
    throw ConfigError("unknown builtin predictor \"" + arg + "\"");
  } else {
    p.source = PredSource::Directory;
    p.directory = arg;
  }
  return p;
}

/// Residual-flow predictions for every frame pair (frames 0..n-2).
inline std::vector<FlowField> load_predictions(const io::LoadedSequence& seq, const PredictionSpec& spec) {
  std::vector<FlowField> out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.sigma > 0.0 ? spec.sigma : 1.0);
  for (std::size_t k = 0; k < seq.pair_count(); ++k) {
    const auto& frame = seq.frames[k];
    const auto index = seq.manifest.frames[k].index;
    switch (spec.source) {
      case PredSource::Zero:
        out.push_back(FlowField::zeros(frame.size()));
        break;
      case PredSource::Oracle:
      case PredSource::Noisy: {
        if (!frame.gt_residual_flow) {
          throw InvalidInput("frame " + std::to_string(index) + " has no ground-truth flow");
        }
        FlowField f(*frame.gt_residual_flow);
        if (spec.source == PredSource::Noisy && spec.sigma > 0.0) {
          for (auto& v : f.vectors) {
            for (int a = 0; a < 3; ++a) v[a] += noise(rng);
          }
        }
        out.push_back(std::move(f));
        break;
      }
      case PredSource::Directory: {
        const auto path = spec.directory / io::flow_file_name(index);
        FlowField f;
        try {
          f = io::decode_flow(io::read_file(path));
        } catch (const FormatError& e) {
          throw FormatError(path.string() + ": " + e.message(), e.offset());
        }
        if (f.size() != frame.size()) {
          throw InvalidInput("frame " + std::to_string(index) + ": prediction has " + std::to_string(f.size()) +
                             " vectors but the frame has " + std::to_string(frame.size()) + " points");
        }
        out.push_back(std::move(f));
        break;
      }
    }
  }
  return out;
}

inline EvalReport evaluate_sequence(const io::LoadedSequence& seq, const std::vector<FlowField>& preds) {
  if (preds.size() != seq.pair_count()) throw InvalidInput("one prediction per frame pair is required");
  EvalAccumulator acc(seq.manifest.dt);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto& frame = seq.frames[k];
    if (!frame.gt_residual_flow) {
      throw InvalidInput("frame " + std::to_string(seq.manifest.frames[k].index) + " has no ground-truth flow");
    }
    if (preds[k].size() != frame.size()) {
      throw InvalidInput("frame " + std::to_string(seq.manifest.frames[k].index) + ": prediction count mismatch");
    }
    acc.add(preds[k], frame);
  }
  return {acc.threeway(), acc.buckets()};
}

/// Loss scalars averaged over frame pairs. With `grad_check`, also the worst
/// relative disagreement between analytic and finite-difference gradients.
inline report::LossSummary loss_sequence(const io::LoadedSequence& seq, const std::vector<FlowField>& preds,
                                         const LossWeights& weights, bool grad_check, double step = 1e-6) {
  if (preds.size() != seq.pair_count()) throw InvalidInput("one prediction per frame pair is required");
  report::LossSummary s;
  s.frame_pairs = preds.size();
  double worst = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto& frame = seq.frames[k];
    if (!frame.gt_residual_flow) {
      throw InvalidInput("frame " + std::to_string(seq.manifest.frames[k].index) + " has no ground-truth flow");
    }
    const FlowField gt(*frame.gt_residual_flow);
    const auto r = total_loss(preds[k], gt, frame, weights);
    s.l_deflow += r.l_deflow;
    s.l_category += r.l_category;
    s.l_instance += r.l_instance;
    s.l_total += r.l_total;
    if (grad_check) {
      const auto fd = finite_diff_gradient(preds[k], gt, frame, weights, step);
      worst = std::max(worst, gradient_relative_error(r.gradient, fd));
    }
  }
  if (s.frame_pairs > 0) {
    const double n = static_cast<double>(s.frame_pairs);
    s.l_deflow /= n;
    s.l_category /= n;
    s.l_instance /= n;
    s.l_total /= n;
  }
  if (grad_check) s.grad_check_max_rel_error = worst;
  return s;
}

}  // namespace deltavox::pipeline

#endif  // DELTAVOX_PIPELINE_HPP
