// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#include "vared/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "vared/jsonutil.hpp"

namespace fs = std::filesystem;

namespace vared {

namespace {

// Distinct-ish per-class channel palette in (0.3, 0.95).
double palette(int class_idx, int64_t channel) {
  const double x = 0.6180339887498949 * static_cast<double>(class_idx * 3 + channel + 1);
  return 0.3 + 0.65 * (x - std::floor(x));
}

// Reflects p into [lo, hi] (triangle wave), keeping motion inside the frame.
double reflect(double p, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0) return lo;
  double q = std::fmod(p - lo, 2.0 * span);
  if (q < 0) q += 2.0 * span;
  return q <= span ? lo + q : hi - (q - span);
}

enum class Shape { Rect, Circle, Stripes, Cross };

struct Pattern {
  Shape shape;
  double cx, cy;      // initial center (pixels)
  double vx, vy;      // per-frame displacement
  double size;        // half-extent / radius
  double angle;       // stripe orientation
  double period;      // stripe period
  double color[8];    // per-channel intensity (C <= 8)
};

void render_pattern(const Pattern& p, int64_t t, float* frame, int64_t c_count, int64_t h,
                    int64_t w) {
  const double cx = reflect(p.cx + p.vx * static_cast<double>(t), p.size, w - 1 - p.size);
  const double cy = reflect(p.cy + p.vy * static_cast<double>(t), p.size, h - 1 - p.size);
  const double phase = (p.vx + p.vy) * static_cast<double>(t);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double dx = x - cx, dy = y - cy;
      bool inside = false;
      switch (p.shape) {
        case Shape::Rect:
          inside = std::abs(dx) <= p.size && std::abs(dy) <= p.size;
          break;
        case Shape::Circle:
          inside = dx * dx + dy * dy <= p.size * p.size;
          break;
        case Shape::Stripes: {
          const double u = (x * std::cos(p.angle) + y * std::sin(p.angle) + phase) / p.period;
          inside = u - std::floor(u) < 0.5;
          break;
        }
        case Shape::Cross:
          inside = (std::abs(dx) <= p.size / 3 && std::abs(dy) <= p.size) ||
                   (std::abs(dy) <= p.size / 3 && std::abs(dx) <= p.size);
          break;
      }
      if (!inside) continue;
      for (int64_t c = 0; c < c_count; ++c) {
        float& px = frame[c * h * w + y * w + x];
        px = std::max(px, static_cast<float>(p.color[c]));
      }
    }
}

void write_u32le(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32le(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    fail(ErrorKind::Io, "clip '", path, "': truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

SynthConfig synth_config_from_json(const Json& j) {
  const std::string ctx = "synth config";
  expect_keys(j, ctx,
              {"config_version", "classes", "clips_per_class", "dims", "noise_std", "seed"});
  require_config_version(j, ctx);
  SynthConfig cfg;
  const Json& classes = j.contains("classes") ? j.at("classes") : Json();
  if (!classes.is_array() || classes.empty())
    fail(ErrorKind::Config, ctx, ": 'classes' must be a non-empty array");
  for (const Json& c : classes) {
    expect_keys(c, ctx + ".classes[]", {"name", "motion_level", "texture_complexity"});
    SynthClassSpec s;
    s.name = require<std::string>(c, ctx, "name");
    s.motion_level = require<double>(c, ctx, "motion_level");
    s.texture_complexity = optional<double>(c, ctx, "texture_complexity", 0.5);
    if (s.motion_level < 0 || s.motion_level > 1 || s.texture_complexity < 0 ||
        s.texture_complexity > 1)
      fail(ErrorKind::Config, ctx, ": class '", s.name,
           "': motion_level and texture_complexity must lie in [0,1]");
    cfg.classes.push_back(std::move(s));
  }
  cfg.clips_per_class = require<int>(j, ctx, "clips_per_class");
  if (cfg.clips_per_class < 1) fail(ErrorKind::Config, ctx, ": clips_per_class must be >= 1");
  const auto dims = require<std::vector<int64_t>>(j, ctx, "dims");
  if (dims.size() != 4) fail(ErrorKind::Config, ctx, ": 'dims' must be [C,T,H,W]");
  cfg.c = dims[0];
  cfg.t = dims[1];
  cfg.h = dims[2];
  cfg.w = dims[3];
  if (cfg.c < 1 || cfg.c > 8 || cfg.t < 1 || cfg.h < 4 || cfg.w < 4)
    fail(ErrorKind::Config, ctx, ": dims out of supported range (C in [1,8], H,W >= 4)");
  cfg.noise_std = optional<double>(j, ctx, "noise_std", 0.0);
  if (cfg.noise_std < 0) fail(ErrorKind::Config, ctx, ": noise_std must be >= 0");
  cfg.seed = optional<uint64_t>(j, ctx, "seed", 0);
  return cfg;
}

Dataset synth_generate(const SynthConfig& cfg) {
  if (cfg.classes.empty()) fail(ErrorKind::Config, "synth_generate: no classes");
  Dataset ds;
  ds.dims = {cfg.c, cfg.t, cfg.h, cfg.w};
  for (const auto& cs : cfg.classes) ds.class_names.push_back(cs.name);

  const int64_t frame_sz = cfg.c * cfg.h * cfg.w;
  for (size_t ci = 0; ci < cfg.classes.size(); ++ci) {
    const auto& cs = cfg.classes[ci];
    const Shape shape = static_cast<Shape>(ci % 4);
    for (int k = 0; k < cfg.clips_per_class; ++k) {
      std::seed_seq seq{static_cast<uint32_t>(cfg.seed), static_cast<uint32_t>(cfg.seed >> 32),
                        static_cast<uint32_t>(ci), static_cast<uint32_t>(k)};
      std::mt19937 gen(seq);
      std::uniform_real_distribution<double> uni(0.0, 1.0);

      const int n_patterns = 1 + static_cast<int>(std::lround(cs.texture_complexity * 3.0));
      std::vector<Pattern> patterns;
      for (int pi = 0; pi < n_patterns; ++pi) {
        Pattern p;
        p.shape = shape;
        p.size = (0.12 + 0.13 * uni(gen)) * static_cast<double>(std::min(cfg.h, cfg.w));
        p.cx = p.size + uni(gen) * (cfg.w - 1 - 2 * p.size);
        p.cy = p.size + uni(gen) * (cfg.h - 1 - 2 * p.size);
        const double speed =
            cs.motion_level * 0.10 * static_cast<double>(std::min(cfg.h, cfg.w));
        const double dir = uni(gen) * 2.0 * 3.14159265358979323846;
        p.vx = speed * std::cos(dir);
        p.vy = speed * std::sin(dir);
        p.angle = uni(gen) * 3.14159265358979323846;
        p.period = 4.0 + uni(gen) * 6.0;
        for (int64_t c = 0; c < cfg.c; ++c)
          p.color[c] = std::clamp(palette(static_cast<int>(ci), c) + 0.1 * (uni(gen) - 0.5), 0.05,
                                  1.0);
        patterns.push_back(p);
      }

      VideoClip clip;
      clip.label = static_cast<int>(ci);
      char idbuf[64];
      std::snprintf(idbuf, sizeof idbuf, "%s_%04d", cs.name.c_str(), k);
      clip.clip_id = idbuf;
      clip.data = Tensor({cfg.c, cfg.t, cfg.h, cfg.w});
      std::vector<float> frame(static_cast<size_t>(frame_sz));
      for (int64_t t = 0; t < cfg.t; ++t) {
        std::fill(frame.begin(), frame.end(), 0.0f);
        for (const Pattern& p : patterns) render_pattern(p, t, frame.data(), cfg.c, cfg.h, cfg.w);
        // [C,H,W] frame scatters into the [C,T,H,W] clip.
        for (int64_t c = 0; c < cfg.c; ++c)
          std::copy(frame.data() + c * cfg.h * cfg.w, frame.data() + (c + 1) * cfg.h * cfg.w,
                    clip.data.ptr() + (c * cfg.t + t) * cfg.h * cfg.w);
      }
      if (cfg.noise_std > 0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_std);
        for (int64_t i = 0; i < clip.data.numel(); ++i)
          clip.data[i] = std::clamp(clip.data[i] + static_cast<float>(noise(gen)), 0.0f, 1.0f);
      }
      ds.clips.push_back(std::move(clip));
    }
  }
  return ds;
}

void save_clip(const std::string& path, const Tensor& clip) {
  if (clip.ndim() != 4) fail_shape("save_clip: clip must be [C,T,H,W], got ", clip.shape_str());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open '", path, "' for writing");
  f.write("VRED", 4);
  write_u32le(f, kClipVersion);
  for (size_t i = 0; i < 4; ++i) write_u32le(f, static_cast<uint32_t>(clip.dim(i)));
  static_assert(sizeof(float) == 4);
  f.write(reinterpret_cast<const char*>(clip.ptr()), clip.numel() * 4);
  f.flush();
  if (!f) fail(ErrorKind::Io, "write failed for '", path, "'");
}

Tensor load_clip(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open clip '", path, "'");
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "VRED", 4) != 0)
    fail(ErrorKind::Io, "'", path, "' is not a VRED clip (bad magic)");
  const uint32_t version = read_u32le(f, path);
  if (version != kClipVersion)
    fail(ErrorKind::Io, "clip '", path, "' has unsupported version ", version);
  int64_t dims[4];
  int64_t numel = 1;
  for (auto& d : dims) {
    d = read_u32le(f, path);
    if (d < 1 || d > (int64_t{1} << 16))
      fail(ErrorKind::Io, "clip '", path, "': dimension overflow (dim = ", d, ")");
    numel *= d;
    if (numel > (int64_t{1} << 31))
      fail(ErrorKind::Io, "clip '", path, "': dimension overflow (element count too large)");
  }
  Tensor t({dims[0], dims[1], dims[2], dims[3]});
  f.read(reinterpret_cast<char*>(t.ptr()), t.numel() * 4);
  if (f.gcount() != t.numel() * 4)
    fail(ErrorKind::Io, "clip '", path, "': truncated payload (expected ", t.numel() * 4,
         " bytes, got ", f.gcount(), ")");
  return t;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory '", dir, "': ", ec.message());
  Json manifest;
  manifest["classes"] = ds.class_names;
  manifest["dims"] = ds.dims;
  manifest["items"] = Json::array();
  for (const auto& clip : ds.clips) {
    const std::string fname = clip.clip_id + ".vred";
    save_clip((fs::path(dir) / fname).string(), clip.data);
    Json item;
    item["file"] = fname;
    item["label"] = clip.label;
    item["clip_id"] = clip.clip_id;
    manifest["items"].push_back(std::move(item));
  }
  write_text_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

Dataset load_manifest(const std::string& manifest_path) {
  const Json j = load_json_file(manifest_path);
  const std::string ctx = "manifest '" + manifest_path + "'";
  expect_keys(j, ctx, {"classes", "dims", "items"});
  Dataset ds;
  ds.class_names = require<std::vector<std::string>>(j, ctx, "classes");
  ds.dims = require<std::vector<int64_t>>(j, ctx, "dims");
  if (ds.class_names.empty()) fail(ErrorKind::Config, ctx, ": empty class list");
  if (ds.dims.size() != 4) fail(ErrorKind::Config, ctx, ": 'dims' must be [C,T,H,W]");
  if (!j.contains("items") || !j.at("items").is_array())
    fail(ErrorKind::Config, ctx, ": 'items' must be an array");

  const fs::path base = fs::path(manifest_path).parent_path();
  for (const Json& item : j.at("items")) {
    expect_keys(item, ctx + " item", {"file", "label", "clip_id"});
    VideoClip clip;
    const std::string file = require<std::string>(item, ctx, "file");
    clip.label = require<int>(item, ctx, "label");
    clip.clip_id = require<std::string>(item, ctx, "clip_id");
    if (clip.label < 0 || clip.label >= static_cast<int>(ds.class_names.size()))
      fail(ErrorKind::Io, ctx, ": item '", clip.clip_id, "' has unknown label ", clip.label,
           " (", ds.class_names.size(), " classes)");
    clip.data = load_clip((base / file).string());
    if (clip.data.shape != ds.dims)
      fail(ErrorKind::Io, ctx, ": clip '", file, "' has dims ", clip.data.shape_str(),
           " but the manifest declares [", ds.dims[0], ",", ds.dims[1], ",", ds.dims[2], ",",
           ds.dims[3], "]");
    ds.clips.push_back(std::move(clip));
  }
  if (ds.clips.empty()) fail(ErrorKind::Config, ctx, ": no items");
  return ds;
}

Tensor hflip(const Tensor& clip) {
  if (clip.ndim() != 4) fail_shape("hflip: clip must be [C,T,H,W]");
  Tensor out(clip.shape);
  const int64_t w = clip.dim(3), rows = clip.numel() / w;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t x = 0; x < w; ++x) out[r * w + x] = clip[r * w + (w - 1 - x)];
  return out;
}

Tensor spatial_shift(const Tensor& clip, int64_t dy, int64_t dx) {
  if (clip.ndim() != 4) fail_shape("spatial_shift: clip must be [C,T,H,W]");
  Tensor out(clip.shape);
  const int64_t h = clip.dim(2), w = clip.dim(3), planes = clip.dim(0) * clip.dim(1);
  for (int64_t p = 0; p < planes; ++p)
    for (int64_t y = 0; y < h; ++y) {
      const int64_t sy = y - dy;
      if (sy < 0 || sy >= h) continue;
      for (int64_t x = 0; x < w; ++x) {
        const int64_t sx = x - dx;
        if (sx < 0 || sx >= w) continue;
        out[(p * h + y) * w + x] = clip[(p * h + sy) * w + sx];
      }
    }
  return out;
}

}  // namespace vared
