// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// deltavox command-line tool.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or format
// error, 3 verification failure (dense oracle, gradient check, property suite).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deltavox/deltavox.hpp"
#include "deltavox/validation.hpp"

namespace fs = std::filesystem;
using namespace deltavox;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerify = 3;

struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T, std::size_t N>
std::array<T, N> parse_list(const std::string& text, const char* what) {
  std::array<T, N> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) throw ConfigError(std::string(what) + " takes " + std::to_string(N) + " comma-separated values");
    try {
      std::size_t used = 0;
      if constexpr (std::is_integral_v<T>) {
        out[i] = static_cast<T>(std::stoll(item, &used));
      } else {
        out[i] = static_cast<T>(std::stod(item, &used));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("cannot parse ") + what + " value \"" + item + "\"");
    }
    ++i;
  }
  if (i != N) throw ConfigError(std::string(what) + " takes " + std::to_string(N) + " comma-separated values");
  return out;
}

FeatureMode parse_mode(const std::string& s) {
  if (s == "occupancy") return FeatureMode::Occupancy;
  if (s == "offset") return FeatureMode::Offset;
  throw ConfigError("unknown feature mode \"" + s + "\" (expected occupancy or offset)");
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec;
  std::string out;
};

void run_synth(const SynthArgs& a) {
  const auto spec = config::parse_scene(io::read_file(a.spec));
  const auto seq = generate(spec);
  io::write_sequence(seq, a.out);
  std::size_t points = 0;
  for (const auto& f : seq.frames) points += f.size();
  std::printf("wrote %zu frames (%zu points) to %s\n", seq.frames.size(), points, a.out.c_str());
}

// ---------------------------------------------------------------- delta

struct DeltaArgs {
  std::string manifest;
  int frames = 1;
  double lambda = 0.5;
  std::string res = "0.2,0.2,0.2";
  std::string dims = "256,256,32";
  std::string origin;
  std::string features = "occupancy";
  std::string out;
  bool check_dense = false;
};

void run_delta(const DeltaArgs& a) {
  const auto seq = io::load_sequence(a.manifest);
  const FeatureMode mode = parse_mode(a.features);
  VoxelGridSpec spec;
  spec.dims = parse_list<std::int32_t, 3>(a.dims, "--dims");
  const auto r = parse_list<double, 3>(a.res, "--res");
  spec.resolution = Vec3(r[0], r[1], r[2]);
  if (a.origin.empty()) {
    // Centred in x and y, starting 2 m below the sensor.
    spec.origin = Vec3(-0.5 * spec.dims[0] * r[0], -0.5 * spec.dims[1] * r[1], -2.0);
  } else {
    const auto o = parse_list<double, 3>(a.origin, "--origin");
    spec.origin = Vec3(o[0], o[1], o[2]);
  }
  spec.feature_width = feature_mode_width(mode);
  spec.validate();
  const DeltaConfig cfg{a.frames, a.lambda};
  cfg.validate();

  const auto in = pipeline::build_delta_inputs(seq, spec, mode, a.frames);
  const auto out = delta_scheme(in.current, in.past, cfg);
  if (a.check_dense) {
    const auto dense = dense_delta_oracle(in.current, in.past, cfg);
    const double err = max_abs_difference(out, dense);
    if (err > 1e-9) {
      throw VerificationFailure("sparse and dense delta disagree: max abs difference " + std::to_string(err));
    }
    std::printf("dense check: max abs difference %.3g\n", err);
  }
  io::write_file(a.out, io::encode_tensor(out));
  const auto rep = storage_report(spec, static_cast<std::int64_t>(out.size()));
  std::printf("V=%lld dense=%lld storage_ratio=%s%%\n", static_cast<long long>(rep.active),
              static_cast<long long>(rep.dense), rep.ratio_pct_text().c_str());
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string manifest;
  std::string pred;
  std::string out;
  std::uint64_t seed = 0;
};

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", *v);
  return buf;
}

void run_eval(const EvalArgs& a) {
  const auto seq = io::load_sequence(a.manifest);
  const auto preds = pipeline::load_predictions(seq, pipeline::parse_prediction(a.pred, a.seed));
  const auto rep = pipeline::evaluate_sequence(seq, preds);
  io::write_file(a.out, report::dump(report::eval_json(rep, preds.size())));

  const auto& b = rep.buckets;
  const auto& t = rep.threeway;
  std::printf("%-41s | %s\n", "Bucket-normalized EPE", "Three-way EPE (cm)");
  std::printf("%7s %7s %7s %7s %7s | %7s %7s %7s %7s\n", "Mean", "CAR", "OTHER", "PED", "VRU", "Mean", "FD", "FS",
              "BS");
  std::printf("%7.3f %7s %7s %7s %7s | %7.2f %7.2f %7.2f %7.2f\n", b.mean, fmt_opt(b.ratio[0]).c_str(),
              fmt_opt(b.ratio[1]).c_str(), fmt_opt(b.ratio[2]).c_str(), fmt_opt(b.ratio[3]).c_str(), t.mean, t.fd, t.fs,
              t.bs);
}

// ---------------------------------------------------------------- loss

struct LossArgs {
  std::string manifest;
  std::string pred;
  std::string weights;
  std::string out;
  bool grad_check = false;
  std::uint64_t seed = 0;
};

constexpr double kGradCheckLimit = 1e-5;

void run_loss(const LossArgs& a) {
  const auto seq = io::load_sequence(a.manifest);
  LossWeights w;
  bool pinned_dt = false;
  if (!a.weights.empty()) w = config::parse_weights(io::read_file(a.weights), &pinned_dt);
  // Speed bins follow the sequence's frame interval unless the weights file pins one.
  if (!pinned_dt) w.frame_dt = seq.manifest.dt;
  const auto preds = pipeline::load_predictions(seq, pipeline::parse_prediction(a.pred, a.seed));
  const auto s = pipeline::loss_sequence(seq, preds, w, a.grad_check);
  io::write_file(a.out, report::dump(report::loss_json(s, w)));
  std::printf("L_deflow=%.6g L_category=%.6g L_instance=%.6g L_total=%.6g (%zu pairs)\n", s.l_deflow, s.l_category,
              s.l_instance, s.l_total, s.frame_pairs);
  if (s.grad_check_max_rel_error) {
    std::printf("grad check: max relative error %.3g\n", *s.grad_check_max_rel_error);
    if (*s.grad_check_max_rel_error > kGradCheckLimit) {
      throw VerificationFailure("gradient check failed: relative error " +
                                std::to_string(*s.grad_check_max_rel_error) + " > 1e-5");
    }
  }
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string cases;
  std::string out;
  std::string sweep_out;
};

void run_bench_cmd(const BenchArgs& a) {
  const auto plan = config::parse_bench(io::read_file(a.cases));
  const auto results = bench::run_bench(plan.cases, plan.budget_bytes);
  for (const auto& r : results) {
    if (r.skipped) {
      std::fprintf(stderr, "skipped %s N=%d: %s\n", r.config.dims_text().c_str(), r.config.n_frames,
                   r.skip_reason.c_str());
      continue;
    }
    std::printf("%s C=%d occ=%.4g N=%d: sparse %.2f ms, dense %.2f ms, speedup %.1fx, memory %.1fx\n",
                r.config.dims_text().c_str(), r.config.channels, r.config.occupancy, r.config.n_frames,
                r.sparse.median_ms, r.dense.median_ms, r.speedup, r.mem_ratio);
  }
  io::write_file(a.out, bench::to_csv(results));
  if (!plan.sweep_n_frames.empty()) {
    const auto rows = bench::scaling_sweep(plan.cases[plan.sweep_base], plan.sweep_n_frames);
    std::string csv = "N,active_union,feature_width,delta_feature_bytes,t_sparse_ms,rel_time,rel_memory\n";
    for (const auto& r : rows) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%d,%lld,%d,%llu,%.3f,%.3f,%.3f\n", r.n_frames,
                    static_cast<long long>(r.active_union), r.feature_width,
                    static_cast<unsigned long long>(r.delta_feature_bytes), r.t_sparse_ms, r.rel_time, r.rel_memory);
      csv += buf;
    }
    if (!a.sweep_out.empty()) {
      io::write_file(a.sweep_out, csv);
    } else {
      std::fputs(csv.c_str(), stdout);
    }
  }
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::uint64_t seed = 0;
  std::string property;
  std::uint64_t case_seed = 0;
  std::string mutant;
};

void run_validate(const ValidateArgs& a) {
  const auto hooks = a.mutant.empty() ? validation::Hooks{} : validation::mutant_hooks(a.mutant);
  if (!a.property.empty()) {
    const auto detail = validation::replay(a.property, a.case_seed, hooks);
    if (!detail.empty()) {
      throw VerificationFailure(a.property + " case_seed=" + std::to_string(a.case_seed) + ": " + detail);
    }
    std::printf("%s case_seed=%llu: pass\n", a.property.c_str(), static_cast<unsigned long long>(a.case_seed));
    return;
  }
  const auto s = validation::run_all(a.seed, hooks);
  for (const auto& f : s.failures) {
    std::printf("FAIL %s case_seed=%llu: %s\n", f.property.c_str(), static_cast<unsigned long long>(f.case_seed),
                f.detail.c_str());
  }
  std::printf("validate seed=%llu: %zu passed, %zu failed\n", static_cast<unsigned long long>(a.seed), s.passed,
              s.failed);
  if (!s.ok()) throw VerificationFailure("property suite failed");
}

// ---------------------------------------------------------------- export-csv

struct ExportArgs {
  std::string frame;
  std::string out;
};

void run_export(const ExportArgs& a) {
  const auto f = io::decode_frame(io::read_file(a.frame));
  std::string csv = "x,y,z";
  if (f.labels) csv += ",instance,category";
  if (f.gt_residual_flow) csv += ",flow_x,flow_y,flow_z";
  csv += "\n";
  char buf[256];
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec3& p = f.points[i];
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g", p.x(), p.y(), p.z());
    csv += buf;
    if (f.labels) {
      const auto& l = f.label(i);
      if (l) {
        std::snprintf(buf, sizeof(buf), ",%u,%s", l->instance_id, category_name(l->category));
        csv += buf;
      } else {
        csv += ",,";
      }
    }
    if (f.gt_residual_flow) {
      const Vec3& v = (*f.gt_residual_flow)[i];
      std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%.9g", v.x(), v.y(), v.z());
      csv += buf;
    }
    csv += "\n";
  }
  if (a.out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    io::write_file(a.out, csv);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deltavox: sparse temporal voxel deltas and scene flow evaluation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic sequence");
  c_synth->add_option("--spec", synth.spec, "scene JSON")->required();
  c_synth->add_option("--out", synth.out, "output directory")->required();

  DeltaArgs delta;
  auto* c_delta = app.add_subcommand("delta", "multi-frame delta features of the latest frame");
  c_delta->add_option("--manifest", delta.manifest)->required();
  c_delta->add_option("--frames", delta.frames, "past frames N")->required();
  c_delta->add_option("--lambda", delta.lambda, "decay in (0, 1]")->required();
  c_delta->add_option("--res", delta.res, "voxel size rx,ry,rz (m)")->required();
  c_delta->add_option("--dims", delta.dims, "grid dims X,Y,Z")->required();
  c_delta->add_option("--origin", delta.origin, "grid origin ox,oy,oz (m)");
  c_delta->add_option("--features", delta.features, "occupancy | offset")->required();
  c_delta->add_option("--out", delta.out, "output tensor file")->required();
  c_delta->add_flag("--check-dense", delta.check_dense, "verify against the dense reference");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "three-way and bucket-normalized EPE");
  c_eval->add_option("--manifest", eval.manifest)->required();
  c_eval->add_option("--pred", eval.pred, "directory | builtin:zero | builtin:oracle | builtin:noisy:<sigma>")
      ->required();
  c_eval->add_option("--out", eval.out, "report JSON")->required();
  c_eval->add_option("--seed", eval.seed, "noise seed for builtin:noisy");

  LossArgs loss;
  auto* c_loss = app.add_subcommand("loss", "training losses of a prediction");
  c_loss->add_option("--manifest", loss.manifest)->required();
  c_loss->add_option("--pred", loss.pred)->required();
  c_loss->add_option("--weights", loss.weights, "weights JSON");
  c_loss->add_option("--out", loss.out, "report JSON")->required();
  c_loss->add_flag("--grad-check", loss.grad_check, "compare analytic and finite-difference gradients");
  c_loss->add_option("--seed", loss.seed, "noise seed for builtin:noisy");

  BenchArgs bench_args;
  auto* c_bench = app.add_subcommand("bench", "sparse vs dense delta benchmark");
  c_bench->add_option("--cases", bench_args.cases, "bench JSON")->required();
  c_bench->add_option("--out", bench_args.out, "results CSV")->required();
  c_bench->add_option("--sweep-out", bench_args.sweep_out, "scaling sweep CSV");

  ValidateArgs val;
  auto* c_val = app.add_subcommand("validate", "run the property suite");
  c_val->add_option("--seed", val.seed);
  auto* o_prop = c_val->add_option("--property", val.property, "replay a single case of this property");
  c_val->add_option("--case-seed", val.case_seed)->needs(o_prop);
  c_val->add_option("--mutant", val.mutant, "run against a known-bad kernel (drop-coordinate)");

  ExportArgs exp;
  auto* c_exp = app.add_subcommand("export-csv", "dump a frame file as CSV");
  c_exp->add_option("--frame", exp.frame)->required();
  c_exp->add_option("--out", exp.out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_synth->parsed()) run_synth(synth);
    if (c_delta->parsed()) run_delta(delta);
    if (c_eval->parsed()) run_eval(eval);
    if (c_loss->parsed()) run_loss(loss);
    if (c_bench->parsed()) run_bench_cmd(bench_args);
    if (c_val->parsed()) run_validate(val);
    if (c_exp->parsed()) run_export(exp);
  } catch (const VerificationFailure& e) {
    std::cerr << "deltavox: verification failed: " << e.what() << "\n";
    return kExitVerify;
  } catch (const ConfigError& e) {
    std::cerr << "deltavox: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "deltavox: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
