// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats. All multi-byte values are little-endian.
//
// Frame file (.dfpc)
//   "DFPC" | u16 version | u16 flags | u64 n
//   xyz        3×f32 per point
//   flags.bit0 instance u32 per point (0xFFFFFFFF = background),
//              category u8 per point (0 CAR, 1 OTHER, 2 PED, 3 VRU, 255 none)
//   flags.bit1 gt residual flow 3×f32 per point
//
// Flow file (.dffl)
//   "DFFL" | u16 version | u64 n | 3×f32 per point
//
// Sparse tensor file (.dfsv)
//   "DFSV" | u16 version | u16 reserved (0) | u64 V | u32 C
//   dims 3×i32 | origin 3×f64 | resolution 3×f64
//   coords 3×i32 per voxel (key-sorted) | features C×f32 per voxel
//
// Sequence manifest (JSON)
//   { "format": "deltavox-sequence", "version": 1, "dt": <s>,
//     "frames": [ { "index": k, "path": "...", "pose": [16 row-major doubles],
//                   "gt_flow": "..." (optional) }, ... ] }
//   Poses are sensor-to-world. The ego motion from frame a to frame b is
//   pose_b⁻¹ · pose_a.

#ifndef DELTAVOX_IO_HPP
#define DELTAVOX_IO_HPP

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltavox/errors.hpp"
#include "deltavox/geometry.hpp"
#include "deltavox/synth.hpp"
#include "deltavox/voxel.hpp"

namespace deltavox::io {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint16_t kFlagLabels = 0x1;
inline constexpr std::uint16_t kFlagGtFlow = 0x2;
inline constexpr std::uint32_t kBackgroundInstance = 0xFFFFFFFFu;
inline constexpr std::uint8_t kNoCategory = 255;

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }

  const std::string& data() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  template <class U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  std::string buf_;
};

/// Bounds-checked little-endian reader; every failure reports its offset.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint64_t offset() const { return pos_; }
  std::uint64_t remaining() const { return data_.size() - pos_; }

  void expect_magic(std::string_view magic) {
    need(magic.size(), "magic");
    if (data_.substr(pos_, magic.size()) != magic) {
      throw FormatError("bad magic, expected \"" + std::string(magic) + "\"", pos_);
    }
    pos_ += magic.size();
  }
  std::uint8_t u8() {
    need(1, "u8");
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get<std::uint32_t>()); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  /// f32 that must be finite.
  double finite_f32() {
    const std::uint64_t at = pos_;
    const float v = f32();
    if (!std::isfinite(v)) throw FormatError("non-finite value", at);
    return static_cast<double>(v);
  }

  void need(std::uint64_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated while reading ") + what, data_.size());
  }

  void expect_end() const {
    if (pos_ != data_.size()) throw FormatError("trailing bytes after declared content", pos_);
  }

 private:
  template <class U>
  U get() {
    need(sizeof(U), "scalar");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }
  std::string_view data_;
  std::uint64_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("write failed for " + path.string());
}

// ---------------------------------------------------------------- frames

inline std::string encode_frame(const PointCloudFrame& frame) {
  frame.validate();
  ByteWriter w;
  w.bytes("DFPC");
  w.u16(kFormatVersion);
  std::uint16_t flags = 0;
  if (frame.labels) flags |= kFlagLabels;
  if (frame.gt_residual_flow) flags |= kFlagGtFlow;
  w.u16(flags);
  w.u64(frame.size());
  for (const auto& p : frame.points) {
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(p[a]));
  }
  if (frame.labels) {
    for (const auto& l : *frame.labels) {
      if (l && l->instance_id == kBackgroundInstance) throw InvalidInput("instance id 0xFFFFFFFF is reserved");
      w.u32(l ? l->instance_id : kBackgroundInstance);
    }
    for (const auto& l : *frame.labels) w.u8(l ? static_cast<std::uint8_t>(l->category) : kNoCategory);
  }
  if (frame.gt_residual_flow) {
    for (const auto& v : *frame.gt_residual_flow) {
      for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(v[a]));
    }
  }
  return w.take();
}

inline PointCloudFrame decode_frame(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("DFPC");
  const std::uint64_t version_at = r.offset();
  if (r.u16() != kFormatVersion) throw FormatError("unsupported frame format version", version_at);
  const std::uint64_t flags_at = r.offset();
  const std::uint16_t flags = r.u16();
  if ((flags & ~(kFlagLabels | kFlagGtFlow)) != 0) throw FormatError("unknown flag bits", flags_at);
  const std::uint64_t count_at = r.offset();
  const std::uint64_t n = r.u64();

  std::uint64_t per_point = 12;
  if (flags & kFlagLabels) per_point += 5;
  if (flags & kFlagGtFlow) per_point += 12;
  if (n > r.remaining() / per_point || r.remaining() != n * per_point) {
    throw FormatError("declared point count " + std::to_string(n) + " does not match file length", count_at);
  }

  PointCloudFrame frame;
  frame.points.resize(n);
  for (auto& p : frame.points) {
    for (int a = 0; a < 3; ++a) p[a] = r.finite_f32();
  }
  if (flags & kFlagLabels) {
    std::vector<std::uint32_t> ids(n);
    for (auto& id : ids) id = r.u32();
    std::vector<std::optional<InstanceLabel>> labels(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint64_t at = r.offset();
      const std::uint8_t code = r.u8();
      const bool background = ids[i] == kBackgroundInstance;
      if (background != (code == kNoCategory)) {
        throw FormatError("category 255 must pair with background instance", at);
      }
      if (!background) {
        if (code >= kNumCategories) throw FormatError("unknown category code " + std::to_string(code), at);
        labels[i] = InstanceLabel{ids[i], static_cast<Category>(code)};
      }
    }
    frame.labels = std::move(labels);
  }
  if (flags & kFlagGtFlow) {
    std::vector<Vec3> gt(n);
    for (auto& v : gt) {
      for (int a = 0; a < 3; ++a) v[a] = r.finite_f32();
    }
    frame.gt_residual_flow = std::move(gt);
  }
  r.expect_end();
  return frame;
}

// ---------------------------------------------------------------- flows

inline std::string encode_flow(const FlowField& flow) {
  flow.validate();
  ByteWriter w;
  w.bytes("DFFL");
  w.u16(kFormatVersion);
  w.u64(flow.size());
  for (const auto& v : flow.vectors) {
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(v[a]));
  }
  return w.take();
}

inline FlowField decode_flow(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("DFFL");
  const std::uint64_t version_at = r.offset();
  if (r.u16() != kFormatVersion) throw FormatError("unsupported flow format version", version_at);
  const std::uint64_t count_at = r.offset();
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 12 || r.remaining() != n * 12) {
    throw FormatError("declared vector count " + std::to_string(n) + " does not match file length", count_at);
  }
  FlowField flow;
  flow.vectors.resize(n);
  for (auto& v : flow.vectors) {
    for (int a = 0; a < 3; ++a) v[a] = r.finite_f32();
  }
  r.expect_end();
  return flow;
}

// ---------------------------------------------------------------- sparse tensors

template <class T>
std::string encode_tensor(const SparseVoxelTensor<T>& t) {
  ByteWriter w;
  w.bytes("DFSV");
  w.u16(kFormatVersion);
  w.u16(0);
  w.u64(t.size());
  const auto& spec = t.spec();
  w.u32(static_cast<std::uint32_t>(spec.feature_width));
  for (auto d : spec.dims) w.i32(d);
  for (int a = 0; a < 3; ++a) w.f64(spec.origin[a]);
  for (int a = 0; a < 3; ++a) w.f64(spec.resolution[a]);
  for (const auto& c : t.coords()) {
    for (auto v : c) w.i32(v);
  }
  for (const T v : t.features()) w.f32(static_cast<float>(v));
  return w.take();
}

inline SparseVoxelTensor<double> decode_tensor(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("DFSV");
  const std::uint64_t version_at = r.offset();
  if (r.u16() != kFormatVersion) throw FormatError("unsupported tensor format version", version_at);
  const std::uint64_t reserved_at = r.offset();
  if (r.u16() != 0) throw FormatError("reserved field must be zero", reserved_at);
  const std::uint64_t count_at = r.offset();
  const std::uint64_t v = r.u64();
  const std::uint64_t width_at = r.offset();
  const std::uint32_t c = r.u32();
  if (c == 0 || c > (1u << 20)) throw FormatError("invalid feature width", width_at);

  VoxelGridSpec spec;
  spec.feature_width = static_cast<std::int32_t>(c);
  const std::uint64_t dims_at = r.offset();
  for (auto& d : spec.dims) d = r.i32();
  for (int a = 0; a < 3; ++a) spec.origin[a] = r.f64();
  for (int a = 0; a < 3; ++a) spec.resolution[a] = r.f64();
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid grid header: ") + e.what(), dims_at);
  }

  const std::uint64_t per_voxel = 12 + 4ull * c;
  if (v > r.remaining() / per_voxel || r.remaining() != v * per_voxel) {
    throw FormatError("declared voxel count " + std::to_string(v) + " does not match file length", count_at);
  }
  std::vector<VoxelCoord> coords(v);
  std::int64_t prev = -1;
  for (auto& co : coords) {
    const std::uint64_t at = r.offset();
    for (auto& x : co) x = r.i32();
    if (!spec.contains(co)) throw FormatError("voxel coordinate outside grid", at);
    const std::int64_t k = spec.key(co);
    if (k <= prev) throw FormatError("voxel coordinates not strictly increasing", at);
    prev = k;
  }
  std::vector<double> feats(v * c);
  for (auto& f : feats) f = r.finite_f32();
  r.expect_end();
  return SparseVoxelTensor<double>::adopt(spec, std::move(coords), std::move(feats));
}

// ---------------------------------------------------------------- manifests

struct ManifestEntry {
  std::int64_t index = 0;
  std::string path;
  RigidTransform pose;
  std::string gt_flow;  ///< empty when absent
};

struct SequenceManifest {
  int version = kFormatVersion;
  double dt = 0.1;
  std::vector<ManifestEntry> frames;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("manifest dt must be > 0");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (i > 0 && frames[i].index <= frames[i - 1].index) {
        throw InvalidInput("manifest frame indices must increase monotonically");
      }
      if (!frames[i].pose.is_valid(1e-6)) {
        throw InvalidInput("manifest pose of frame " + std::to_string(frames[i].index) + " is not a rigid transform");
      }
    }
  }
};

inline std::string encode_manifest(const SequenceManifest& m) {
  m.validate();
  nlohmann::ordered_json j;
  j["format"] = "deltavox-sequence";
  j["version"] = m.version;
  j["dt"] = m.dt;
  j["frames"] = nlohmann::ordered_json::array();
  for (const auto& f : m.frames) {
    nlohmann::ordered_json e;
    e["index"] = f.index;
    e["path"] = f.path;
    e["pose"] = f.pose.to_row_major();
    if (!f.gt_flow.empty()) e["gt_flow"] = f.gt_flow;
    j["frames"].push_back(e);
  }
  return j.dump(2) + "\n";
}

inline SequenceManifest decode_manifest(std::string_view text) {
  SequenceManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "deltavox-sequence") throw InvalidInput("not a deltavox manifest");
    m.version = j.at("version").get<int>();
    if (m.version != kFormatVersion) throw InvalidInput("unsupported manifest version");
    m.dt = j.at("dt").get<double>();
    for (const auto& e : j.at("frames")) {
      ManifestEntry f;
      f.index = e.at("index").get<std::int64_t>();
      f.path = e.at("path").get<std::string>();
      const auto pose = e.at("pose").get<std::vector<double>>();
      if (pose.size() != 16) throw InvalidInput("pose must have 16 entries");
      std::array<double, 16> arr{};
      std::copy(pose.begin(), pose.end(), arr.begin());
      f.pose = RigidTransform::from_row_major(arr);
      if (e.contains("gt_flow")) f.gt_flow = e.at("gt_flow").get<std::string>();
      m.frames.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

inline std::string frame_file_name(std::int64_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%06lld.dfpc", static_cast<long long>(index));
  return buf;
}

inline std::string flow_file_name(std::int64_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "flow_%06lld.dffl", static_cast<long long>(index));
  return buf;
}

inline std::string gt_flow_file_name(std::int64_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "gt_flow_%06lld.dffl", static_cast<long long>(index));
  return buf;
}

/// Writes manifest.json, one frame file per frame and one gt flow file per
/// frame pair into `dir`.
inline void write_sequence(const SceneSequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SequenceManifest m;
  m.dt = seq.dt;
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    ManifestEntry e;
    e.index = static_cast<std::int64_t>(k);
    e.path = frame_file_name(e.index);
    e.pose = seq.poses[k];
    write_file(dir / e.path, encode_frame(seq.frames[k]));
    if (k + 1 < seq.frames.size() && seq.frames[k].gt_residual_flow) {
      e.gt_flow = gt_flow_file_name(e.index);
      write_file(dir / e.gt_flow, encode_flow(FlowField(*seq.frames[k].gt_residual_flow)));
    }
    m.frames.push_back(std::move(e));
  }
  write_file(dir / "manifest.json", encode_manifest(m));
}

struct LoadedSequence {
  SequenceManifest manifest;
  std::vector<PointCloudFrame> frames;

  std::size_t pair_count() const { return frames.empty() ? 0 : frames.size() - 1; }
  RigidTransform relative(std::size_t a, std::size_t b) const {
    return relative_pose(manifest.frames[a].pose, manifest.frames[b].pose);
  }
};

/// Reads a manifest and all frames it lists, resolving paths relative to
/// the manifest's directory.
inline LoadedSequence load_sequence(const std::filesystem::path& manifest_path) {
  LoadedSequence out;
  out.manifest = decode_manifest(read_file(manifest_path));
  const auto base = manifest_path.parent_path();
  for (const auto& e : out.manifest.frames) {
    PointCloudFrame f;
    try {
      f = decode_frame(read_file(base / e.path));
    } catch (const FormatError& err) {
      throw FormatError(e.path + ": " + err.message(), err.offset());
    }
    f.frame_time = out.manifest.dt * static_cast<double>(e.index);
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace deltavox::io

#endif  // DELTAVOX_IO_HPP
