// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#include "vared/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vared/jsonutil.hpp"
#include "vared/nn.hpp"
#include "vared/optim.hpp"

namespace vared {

namespace {

EffMode eff_mode_from_name(const std::string& s, const std::string& ctx) {
  if (s == "soft") return EffMode::Soft;
  if (s == "literal") return EffMode::Literal;
  fail(ErrorKind::Config, ctx, ": eff_loss_mode must be 'soft' or 'literal', got '", s, "'");
}

// Copies one clip into row n of the batch tensor, with optional flip/shift
// augmentation drawn from gen.
void place_clip(Tensor& batch, int64_t n, const Tensor& clip, bool augment, std::mt19937& gen) {
  Tensor view = clip;
  if (augment) {
    std::uniform_int_distribution<int> coin(0, 1), shift(-2, 2);
    const bool flip = coin(gen) == 1;
    const int64_t dy = shift(gen), dx = shift(gen);
    if (flip) view = hflip(view);
    if (dy != 0 || dx != 0) view = spatial_shift(view, dy, dx);
  }
  std::copy(view.ptr(), view.ptr() + view.numel(), batch.ptr() + n * view.numel());
}

}  // namespace

TrainConfig TrainConfig::from_json(const Json& j, const std::string& ctx) {
  expect_keys(j, ctx,
              {"epochs_joint", "epochs_finetune", "lr", "lr_finetune", "momentum",
               "weight_decay", "lambda_e", "batch_size", "seed", "eff_loss_mode", "eps_active",
               "augment", "warmup_epochs"});
  TrainConfig c;
  c.epochs_joint = optional<int>(j, ctx, "epochs_joint", c.epochs_joint);
  c.epochs_finetune = optional<int>(j, ctx, "epochs_finetune", c.epochs_finetune);
  c.lr = optional<double>(j, ctx, "lr", c.lr);
  c.lr_finetune = optional<double>(j, ctx, "lr_finetune", c.lr_finetune);
  c.momentum = optional<double>(j, ctx, "momentum", c.momentum);
  c.weight_decay = optional<double>(j, ctx, "weight_decay", c.weight_decay);
  c.lambda_e = optional<double>(j, ctx, "lambda_e", c.lambda_e);
  c.batch_size = optional<int>(j, ctx, "batch_size", c.batch_size);
  c.seed = optional<uint64_t>(j, ctx, "seed", c.seed);
  c.eff_mode = eff_mode_from_name(
      optional<std::string>(j, ctx, "eff_loss_mode", "soft"), ctx);
  c.eps_active = optional<float>(j, ctx, "eps_active", c.eps_active);
  c.augment = optional<bool>(j, ctx, "augment", c.augment);
  c.warmup_epochs = optional<int>(j, ctx, "warmup_epochs", c.warmup_epochs);
  if (c.epochs_joint < 0 || c.epochs_finetune < 0)
    fail(ErrorKind::Config, ctx, ": epoch counts must be >= 0");
  if (c.batch_size < 1) fail(ErrorKind::Config, ctx, ": batch_size must be >= 1");
  if (c.lambda_e < 0) fail(ErrorKind::Config, ctx, ": lambda_e must be >= 0");
  if (c.lr <= 0 || c.lr_finetune <= 0) fail(ErrorKind::Config, ctx, ": learning rates must be > 0");
  if (c.eps_active < 0 || c.eps_active >= 1)
    fail(ErrorKind::Config, ctx, ": eps_active must lie in [0,1)");
  return c;
}

Json TrainConfig::to_json() const {
  Json j;
  j["epochs_joint"] = epochs_joint;
  j["epochs_finetune"] = epochs_finetune;
  j["lr"] = lr;
  j["lr_finetune"] = lr_finetune;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["lambda_e"] = lambda_e;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["eff_loss_mode"] = eff_mode == EffMode::Soft ? "soft" : "literal";
  j["eps_active"] = eps_active;
  j["augment"] = augment;
  j["warmup_epochs"] = warmup_epochs;
  return j;
}

std::vector<EpochStats> train_phase(Model& m, const Dataset& ds, const TrainConfig& cfg,
                                    const PhaseParams& phase) {
  if (ds.clips.empty()) fail(ErrorKind::Config, "train: empty dataset");
  const int64_t n_total = static_cast<int64_t>(ds.clips.size());
  const std::vector<double> layer_costs = model_dynamic_layer_costs(m);

  std::seed_seq sq{static_cast<uint32_t>(cfg.seed), static_cast<uint32_t>(cfg.seed >> 32),
                   phase.phase_tag};
  std::mt19937 gen(sq);
  Sgd opt(static_cast<float>(phase.base_lr), static_cast<float>(cfg.momentum),
          static_cast<float>(cfg.weight_decay));

  std::vector<int64_t> order(static_cast<size_t>(n_total));
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochStats> history;

  for (int epoch = 0; epoch < phase.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), gen);
    opt.set_lr(static_cast<float>(
        cosine_lr(phase.base_lr, epoch, phase.epochs, phase.warmup_epochs)));

    double loss_sum = 0.0, gflops_sum = 0.0;
    int64_t correct = 0;
    for (int64_t start = 0; start < n_total; start += cfg.batch_size) {
      const int64_t bsz = std::min<int64_t>(cfg.batch_size, n_total - start);
      Tensor batch({bsz, ds.dims[0], ds.dims[1], ds.dims[2], ds.dims[3]});
      std::vector<int> labels(static_cast<size_t>(bsz));
      for (int64_t i = 0; i < bsz; ++i) {
        const VideoClip& clip = ds.clips[static_cast<size_t>(order[static_cast<size_t>(start + i)])];
        place_clip(batch, i, clip.data, cfg.augment, gen);
        labels[static_cast<size_t>(i)] = clip.label;
      }

      Tape tape;
      ForwardOptions fo;
      fo.mode = phase.mode;
      fo.eps_active = cfg.eps_active;
      ForwardResult fr = model_forward(m, &tape, batch, fo);
      Tensor loss = softmax_cross_entropy(fr.logits, labels);

      if (phase.lambda_e > 0 && !fr.policy_c.empty()) {
        // mu0 gates the efficiency penalty to correctly classified items.
        std::vector<float> mu0(static_cast<size_t>(bsz), 0.0f);
        for (int64_t i = 0; i < bsz; ++i)
          if (fr.traces[static_cast<size_t>(i)].prediction == labels[static_cast<size_t>(i)])
            mu0[static_cast<size_t>(i)] = 1.0f;
        Tensor le = efficiency_loss(fr.policy_c, fr.policy_t, layer_costs, mu0, cfg.eff_mode,
                                    cfg.eps_active);
        loss = total_loss(loss, le, static_cast<float>(phase.lambda_e));
      }

      const double loss_val = static_cast<double>(loss.scalar());
      if (!std::isfinite(loss_val))
        fail(ErrorKind::Numeric, "training diverged: non-finite loss at epoch ", epoch);
      loss_sum += loss_val * static_cast<double>(bsz);
      for (int64_t i = 0; i < bsz; ++i) {
        const PolicyTrace& tr = fr.traces[static_cast<size_t>(i)];
        if (tr.prediction == labels[static_cast<size_t>(i)]) ++correct;
        gflops_sum += tr.realized_flops * 1e-9;
      }

      tape.backward(loss);
      opt.step(tape);
    }

    EpochStats st;
    st.epoch = epoch;
    st.loss = loss_sum / static_cast<double>(n_total);
    st.acc = static_cast<double>(correct) / static_cast<double>(n_total);
    st.mean_gflops = gflops_sum / static_cast<double>(n_total);
    history.push_back(st);
  }
  return history;
}

std::vector<EpochStats> train_joint(Model& m, const Dataset& ds, const TrainConfig& cfg) {
  PhaseParams p;
  p.epochs = cfg.epochs_joint;
  p.base_lr = cfg.lr;
  p.lambda_e = 0.0;
  p.mode = ForwardMode::DynamicTrain;
  p.warmup_epochs = cfg.warmup_epochs;
  p.phase_tag = 1;
  return train_phase(m, ds, cfg, p);
}

std::vector<EpochStats> finetune_efficiency(Model& m, const Dataset& ds, const TrainConfig& cfg) {
  PhaseParams p;
  p.epochs = cfg.epochs_finetune;
  p.base_lr = cfg.lr_finetune;
  p.lambda_e = cfg.lambda_e;
  p.mode = ForwardMode::DynamicTrain;
  p.warmup_epochs = 0;
  p.phase_tag = 2;
  return train_phase(m, ds, cfg, p);
}

std::vector<EpochStats> train_base(Model& m, const Dataset& ds, const TrainConfig& cfg) {
  PhaseParams p;
  p.epochs = cfg.epochs_joint;
  p.base_lr = cfg.lr;
  p.lambda_e = 0.0;
  p.mode = ForwardMode::Base;
  p.warmup_epochs = cfg.warmup_epochs;
  p.phase_tag = 1;
  return train_phase(m, ds, cfg, p);
}

EvalResult evaluate(Model& m, const Dataset& ds, float eps_active, bool forced_full) {
  EvalResult r;
  r.class_names = ds.class_names;
  const size_t n_classes = ds.class_names.size();
  for (int l : m.dynamic_layers)
    r.dyn_layer_names.push_back(m.spec.layers[static_cast<size_t>(l)].conv.name);
  const size_t n_dyn = r.dyn_layer_names.size();
  r.class_counts.assign(n_classes, 0);
  std::vector<std::vector<double>> sum_t(n_classes, std::vector<double>(n_dyn, 0.0));
  std::vector<std::vector<double>> sum_c(n_classes, std::vector<double>(n_dyn, 0.0));

  r.cost.static_gflops = model_static_flops(m) * 1e-9;
  int64_t correct = 0;
  for (const VideoClip& clip : ds.clips) {
    Tensor x = reshape(clip.data, {1, ds.dims[0], ds.dims[1], ds.dims[2], ds.dims[3]});
    ForwardOptions fo;
    fo.mode = ForwardMode::DynamicEval;
    fo.eps_active = eps_active;
    fo.forced_full = forced_full;
    ForwardResult fr = model_forward(m, nullptr, x, fo);
    PolicyTrace tr = std::move(fr.traces.front());
    tr.clip_id = clip.clip_id;
    if (tr.prediction == clip.label) ++correct;
    if (clip.label >= 0 && clip.label < static_cast<int>(n_classes)) {
      auto& cc = r.class_counts[static_cast<size_t>(clip.label)];
      ++cc;
      for (size_t d = 0; d < n_dyn; ++d) {
        sum_t[static_cast<size_t>(clip.label)][d] +=
            std::ldexp(1.0, -(tr.layers[d].i_s_t - 1));
        sum_c[static_cast<size_t>(clip.label)][d] +=
            std::ldexp(1.0, -(tr.layers[d].i_s_c - 1));
      }
    }
    r.cost.per_instance.push_back({clip.clip_id, tr.realized_flops * 1e-9});
    r.labels.push_back(clip.label);
    r.traces.push_back(std::move(tr));
  }
  r.cost.finalize();
  r.top1 = ds.clips.empty() ? 0.0 : static_cast<double>(correct) / ds.clips.size();

  r.ratio_t.assign(n_classes, std::vector<double>(n_dyn, EvalResult::kAbsent));
  r.ratio_c.assign(n_classes, std::vector<double>(n_dyn, EvalResult::kAbsent));
  for (size_t ci = 0; ci < n_classes; ++ci) {
    if (r.class_counts[ci] == 0) continue;
    for (size_t d = 0; d < n_dyn; ++d) {
      r.ratio_t[ci][d] = sum_t[ci][d] / r.class_counts[ci];
      r.ratio_c[ci][d] = sum_c[ci][d] / r.class_counts[ci];
    }
  }
  return r;
}

Json EvalResult::to_json() const {
  Json j;
  j["top1"] = top1;
  j["static_gflops"] = cost.static_gflops;
  j["mean_gflops"] = cost.avg;
  j["max_gflops"] = cost.max;
  j["min_gflops"] = cost.min;
  j["classes"] = class_names;
  j["class_counts"] = class_counts;
  j["dynamic_layers"] = dyn_layer_names;
  auto ratio_json = [](const std::vector<std::vector<double>>& rows) {
    Json out = Json::array();
    for (const auto& row : rows) {
      Json r = Json::array();
      for (double v : row) {
        if (v == kAbsent)
          r.push_back(nullptr);
        else
          r.push_back(v);
      }
      out.push_back(std::move(r));
    }
    return out;
  };
  j["ratio_temporal"] = ratio_json(ratio_t);
  j["ratio_channel"] = ratio_json(ratio_c);
  j["per_instance"] = Json::array();
  for (size_t i = 0; i < traces.size(); ++i) {
    Json e;
    e["clip_id"] = traces[i].clip_id;
    e["label"] = labels[i];
    e["prediction"] = traces[i].prediction;
    e["gflops"] = cost.per_instance[i].gflops;
    j["per_instance"].push_back(std::move(e));
  }
  return j;
}

std::string policy_stats_csv(const EvalResult& r) {
  std::string out = "class";
  for (const std::string& l : r.dyn_layer_names) out += "," + l + ":temporal," + l + ":channel";
  out += "\n";
  char buf[32];
  for (size_t ci = 0; ci < r.class_names.size(); ++ci) {
    out += r.class_names[ci];
    for (size_t d = 0; d < r.dyn_layer_names.size(); ++d) {
      for (double v : {r.ratio_t[ci][d], r.ratio_c[ci][d]}) {
        if (v == EvalResult::kAbsent) {
          out += ",absent";
        } else {
          std::snprintf(buf, sizeof buf, ",%.6f", v);
          out += buf;
        }
      }
    }
    out += "\n";
  }
  return out;
}

Json per_instance_cost_json(const EvalResult& r) {
  Json j;
  j["per_instance"] = Json::array();
  for (size_t i = 0; i < r.traces.size(); ++i) {
    Json e;
    e["clip_id"] = r.traces[i].clip_id;
    e["label"] = r.labels[i];
    e["prediction"] = r.traces[i].prediction;
    e["gflops"] = r.cost.per_instance[i].gflops;
    j["per_instance"].push_back(std::move(e));
  }
  return j;
}

std::string history_jsonl(const std::vector<EpochStats>& history) {
  std::string out;
  for (const EpochStats& e : history) {
    Json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["acc"] = e.acc;
    j["mean_gflops"] = e.mean_gflops;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace vared
