// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Declarative model specs (toy3d, r2plus1d_tiny, and a cost-only
// r2plus1d18 listing) plus the builder and the three forward modes.

#ifndef VARED_MODEL_HPP_
#define VARED_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "vared/checkpoint.hpp"
#include "vared/cost_model.hpp"
#include "vared/dynamic_conv.hpp"
#include "vared/gate.hpp"
#include "vared/redundancy.hpp"
#include "vared/tensor.hpp"

namespace vared {

struct LayerSpec {
  DynamicConvConfig conv;
  bool dynamic = false;
  // -1: consume the previous layer's output. A non-negative index means
  // "reads the same input as layer k" and is allowed only in cost-only
  // specs (residual shortcuts contribute cost but are never executed).
  int input_layer = -1;
};

struct ModelSpec {
  std::string arch;
  std::vector<int64_t> input_dims;  // [C,T,H,W]
  int num_classes = 0;
  bool head_fc = true;
  bool cost_only = false;
  int64_t gate_d_h = 16;
  std::vector<LayerSpec> layers;

  Json to_json() const;
  static ModelSpec from_json(const Json& j);
};

struct LayerShape {
  int64_t t_in = 0, h_in = 0, w_in = 0;
  int64_t t_out = 0, h_out = 0, w_out = 0;
};

// Master parameters live in `store`; forward passes bind them to a tape
// (training) or use them tape-free (evaluation). BatchNorm running stats
// are store entries but never tape leaves.
struct Model {
  ModelSpec spec;
  ParamStore store;
  std::vector<LayerShape> shapes;
  std::vector<int> dynamic_layers;  // indices into spec.layers
  int64_t head_in = 0;              // channels feeding the classifier
};

Model build_model(const ModelSpec& spec, uint64_t seed);

// Restores a model from a checkpoint previously produced by save_model.
Model model_from_checkpoint(const Checkpoint& ck);
void save_model(const std::string& path, const Model& m, const Json& extra_meta);

enum class ForwardMode { Base, DynamicTrain, DynamicEval };

struct ForwardOptions {
  ForwardMode mode = ForwardMode::Base;
  bool forced_full = false;  // gates overridden to branch 1 at weight 1
  float eps_active = 0.0f;
};

struct LayerPolicy {
  std::string layer;
  std::vector<float> v_t, v_c;
  int i_s_t = 1, i_s_c = 1;
};

struct PolicyTrace {
  std::string clip_id;
  int prediction = -1;
  double realized_flops = 0.0;  // multiply-adds, gates included in dynamic modes
  std::vector<LayerPolicy> layers;
};

struct ForwardResult {
  Tensor logits;                    // [N, num_classes]
  std::vector<PolicyTrace> traces;  // one per batch item
  // Raw gate outputs per dynamic layer (train mode), for the efficiency loss.
  std::vector<Tensor> policy_t, policy_c;
};

// x is [N,C,T,H,W]; tape may be null for inference.
ForwardResult model_forward(Model& m, Tape* tape, const Tensor& x, const ForwardOptions& opt);

// Cost queries (multiply-adds). Static covers convs plus the head FC; the
// gate term exists only for dynamic layers.
// Validates and prices a spec without allocating parameters (works for
// cost-only specs).
double spec_static_gflops(const ModelSpec& spec);
double model_static_flops(const Model& m);
double model_gate_flops(const Model& m);
// Realized cost for one item given largest-active picks per dynamic layer
// (same order as m.dynamic_layers). include_gates toggles the gate term.
double model_realized_flops(const Model& m, const std::vector<std::pair<int, int>>& i_s_tc,
                            bool include_gates);
// Per-dynamic-layer full conv cost, the C_l weights of the efficiency loss.
std::vector<double> model_dynamic_layer_costs(const Model& m);

// Base-mode per-layer post-activation feature maps, for the redundancy
// analyzer.
FeatureExtractor model_feature_extractor(Model& m);

std::vector<std::string> builtin_arch_names();
// frames/res override the default input length and square resolution.
ModelSpec builtin_spec(const std::string& arch, int64_t frames, int64_t res, int num_classes);

}  // namespace vared

#endif  // VARED_MODEL_HPP_
