// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic video generation and the VRED clip container:
//   "VRED" | u32 version | u32 C,T,H,W | C*T*H*W f32 LE
// Labels and ids travel in the JSON manifest, not the clip file.

#ifndef VARED_DATA_HPP_
#define VARED_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vared/tensor.hpp"

namespace vared {

struct VideoClip {
  Tensor data;  // [C,T,H,W], values in [0,1]
  int label = -1;
  std::string clip_id;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<int64_t> dims;  // C,T,H,W
  std::vector<VideoClip> clips;
};

struct SynthClassSpec {
  std::string name;
  double motion_level = 0.0;        // in [0,1]
  double texture_complexity = 0.5;  // in [0,1]
};

struct SynthConfig {
  std::vector<SynthClassSpec> classes;
  int clips_per_class = 100;
  int64_t c = 3, t = 8, h = 32, w = 32;
  double noise_std = 0.0;
  uint64_t seed = 0;
};

SynthConfig synth_config_from_json(const nlohmann::ordered_json& j);
Dataset synth_generate(const SynthConfig& cfg);

inline constexpr uint32_t kClipVersion = 1;

void save_clip(const std::string& path, const Tensor& clip);
Tensor load_clip(const std::string& path);

// Writes every clip plus manifest.json under dir.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_manifest(const std::string& manifest_path);

// Augmentation helpers (pure value transforms on a [C,T,H,W] clip).
Tensor hflip(const Tensor& clip);
Tensor spatial_shift(const Tensor& clip, int64_t dy, int64_t dx);

}  // namespace vared

#endif  // VARED_DATA_HPP_
