// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Two-phase schedule: joint training of weights and gates, then
// efficiency-loss finetuning; plus evaluation and policy-stat export.

#ifndef VARED_TRAINING_HPP_
#define VARED_TRAINING_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "vared/cost_model.hpp"
#include "vared/data.hpp"
#include "vared/model.hpp"

namespace vared {

struct TrainConfig {
  int epochs_joint = 30;
  int epochs_finetune = 10;
  double lr = 0.05;
  double lr_finetune = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lambda_e = 0.8;
  int batch_size = 8;
  uint64_t seed = 0;
  EffMode eff_mode = EffMode::Soft;
  float eps_active = 0.0f;
  bool augment = true;
  int warmup_epochs = 3;

  static TrainConfig from_json(const Json& j, const std::string& ctx);
  Json to_json() const;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double acc = 0.0;
  double mean_gflops = 0.0;
};

// One optimization phase; both public entry points delegate here. The mode
// selects base (static, gates untouched) or dynamic-train forwards, and
// lambda_e > 0 adds the efficiency loss.
struct PhaseParams {
  int epochs = 0;
  double base_lr = 0.0;
  double lambda_e = 0.0;
  ForwardMode mode = ForwardMode::DynamicTrain;
  int warmup_epochs = 0;
  uint32_t phase_tag = 0;  // decorrelates shuffling between phases
};

std::vector<EpochStats> train_phase(Model& m, const Dataset& ds, const TrainConfig& cfg,
                                    const PhaseParams& phase);

std::vector<EpochStats> train_joint(Model& m, const Dataset& ds, const TrainConfig& cfg);
std::vector<EpochStats> finetune_efficiency(Model& m, const Dataset& ds, const TrainConfig& cfg);
// Plain static training of the same architecture; dynamic machinery is
// bypassed and gate/cheap parameters stay at initialization.
std::vector<EpochStats> train_base(Model& m, const Dataset& ds, const TrainConfig& cfg);

struct EvalResult {
  double top1 = 0.0;
  CostReport cost;  // gflops per clip, realized
  std::vector<std::string> class_names;
  std::vector<std::string> dyn_layer_names;
  std::vector<int> class_counts;
  // [class][dynamic layer] mean compute ratios; kAbsent marks empty classes.
  std::vector<std::vector<double>> ratio_t, ratio_c;
  std::vector<PolicyTrace> traces;  // dataset order
  std::vector<int> labels;

  static constexpr double kAbsent = -1.0;
  Json to_json() const;
};

EvalResult evaluate(Model& m, const Dataset& ds, float eps_active,
                    bool forced_full = false);

// class x (layer, dimension) matrix of mean compute ratios.
std::string policy_stats_csv(const EvalResult& r);
Json per_instance_cost_json(const EvalResult& r);
std::string history_jsonl(const std::vector<EpochStats>& history);

}  // namespace vared

#endif  // VARED_TRAINING_HPP_
