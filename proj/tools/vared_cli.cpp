// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Single vared executable: gen-data, train, finetune, eval, flops, analyze,
// export-policy. Machine-readable output goes to declared files (or stdout
// for flops); logs go to stderr. Exit codes: 0 ok, 2 config/usage, 3 I/O,
// 4 numeric divergence.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vared/data.hpp"
#include "vared/jsonutil.hpp"
#include "vared/model.hpp"
#include "vared/redundancy.hpp"
#include "vared/training.hpp"

namespace fs = std::filesystem;
using namespace vared;

namespace {

struct RunConfig {
  std::string arch = "toy3d";
  std::string spec_file;
  std::string manifest;
  TrainConfig train;
};

RunConfig load_run_config(const std::string& path) {
  const Json j = load_json_file(path);
  const std::string ctx = "run config '" + path + "'";
  expect_keys(j, ctx, {"config_version", "arch", "spec_file", "manifest", "train"});
  require_config_version(j, ctx);
  RunConfig rc;
  rc.manifest = require<std::string>(j, ctx, "manifest");
  rc.spec_file = optional<std::string>(j, ctx, "spec_file", "");
  if (rc.spec_file.empty()) {
    rc.arch = optional<std::string>(j, ctx, "arch", "toy3d");
  } else if (j.contains("arch")) {
    fail(ErrorKind::Config, ctx, ": give either 'arch' or 'spec_file', not both");
  }
  if (j.contains("train")) rc.train = TrainConfig::from_json(j.at("train"), ctx + ".train");
  return rc;
}

// Resolves the model spec against the dataset: builtin archs take their
// input contract and class count from the data.
ModelSpec resolve_spec(const RunConfig& rc, const Dataset& ds) {
  ModelSpec spec;
  if (!rc.spec_file.empty()) {
    spec = ModelSpec::from_json(load_json_file(rc.spec_file));
    if (spec.num_classes != static_cast<int>(ds.class_names.size()))
      fail(ErrorKind::Config, "spec '", rc.spec_file, "' declares ", spec.num_classes,
           " classes but the dataset has ", ds.class_names.size());
  } else {
    if (ds.dims[2] != ds.dims[3])
      fail(ErrorKind::Config, "builtin archs need square frames, dataset is ", ds.dims[2], "x",
           ds.dims[3]);
    spec = builtin_spec(rc.arch, ds.dims[1], ds.dims[2], static_cast<int>(ds.class_names.size()));
  }
  if (spec.input_dims != ds.dims)
    fail(ErrorKind::Config, "model expects [C,T,H,W] = [", spec.input_dims[0], ",",
         spec.input_dims[1], ",", spec.input_dims[2], ",", spec.input_dims[3],
         "] but the dataset provides [", ds.dims[0], ",", ds.dims[1], ",", ds.dims[2], ",",
         ds.dims[3], "]");
  return spec;
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

int cmd_gen_data(const std::string& config, const std::string& out) {
  const SynthConfig cfg = synth_config_from_json(load_json_file(config));
  const Dataset ds = synth_generate(cfg);
  save_dataset(out, ds);
  std::cerr << "generated " << ds.clips.size() << " clips (" << cfg.classes.size()
            << " classes) under " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& out, const std::string& resume) {
  const RunConfig rc = load_run_config(config);
  const Dataset ds = load_manifest(rc.manifest);
  Model model = resume.empty() ? build_model(resolve_spec(rc, ds), rc.train.seed)
                               : model_from_checkpoint(load_checkpoint(resume));
  const auto history = train_joint(model, ds, rc.train);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::Io, "cannot create '", out, "': ", ec.message());
  Json meta;
  meta["phases"] = Json::array({"joint"});
  meta["train_config"] = rc.train.to_json();
  save_model((fs::path(out) / "model.vrck").string(), model, meta);
  write_text_file((fs::path(out) / "history_joint.jsonl").string(), history_jsonl(history));
  std::cerr << "joint training done: " << history.size() << " epochs";
  if (!history.empty())
    std::cerr << ", final loss " << history.back().loss << ", acc " << history.back().acc;
  std::cerr << "\n";
  return 0;
}

int cmd_finetune(const std::string& config, const std::string& ckpt, const std::string& out) {
  const RunConfig rc = load_run_config(config);
  const Dataset ds = load_manifest(rc.manifest);
  const Checkpoint ck = load_checkpoint(ckpt);
  bool joint_trained = false;
  if (ck.meta.contains("phases") && ck.meta.at("phases").is_array())
    for (const Json& p : ck.meta.at("phases"))
      if (p.is_string() && p.get<std::string>() == "joint") joint_trained = true;
  if (!joint_trained)
    std::cerr << "warning: checkpoint '" << ckpt
              << "' has no joint-training record; finetuning it anyway\n";
  Model model = model_from_checkpoint(ck);
  const auto history = finetune_efficiency(model, ds, rc.train);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::Io, "cannot create '", out, "': ", ec.message());
  Json meta;
  meta["phases"] = Json::array({"joint", "finetune"});
  meta["train_config"] = rc.train.to_json();
  save_model((fs::path(out) / "model_finetuned.vrck").string(), model, meta);
  write_text_file((fs::path(out) / "history_finetune.jsonl").string(), history_jsonl(history));
  std::cerr << "efficiency finetuning done: " << history.size() << " epochs";
  if (!history.empty()) std::cerr << ", final mean " << history.back().mean_gflops << " GFLOPs";
  std::cerr << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, const std::string& out,
             double eps_active, bool forced_full) {
  Model model = model_from_checkpoint(load_checkpoint(ckpt));
  const Dataset ds = load_manifest(manifest);
  const EvalResult r = evaluate(model, ds, static_cast<float>(eps_active), forced_full);
  write_json_file(out, r.to_json());
  std::cerr << "top1 " << r.top1 << ", mean " << r.cost.avg << " GFLOPs over "
            << ds.clips.size() << " clips -> " << out << "\n";
  return 0;
}

int cmd_flops(const std::string& arch, int64_t frames, int64_t res, int classes,
              const std::string& trace_path) {
  const ModelSpec spec = builtin_spec(arch, frames, res, classes);
  Json out;
  out["arch"] = spec.arch;
  out["frames"] = frames;
  out["res"] = res;
  out["static_gflops"] = spec_static_gflops(spec);
  if (!trace_path.empty()) {
    const Json t = load_json_file(trace_path);
    if (!t.is_object() || !t.contains("per_instance") || !t.at("per_instance").is_array())
      fail(ErrorKind::Config, "trace '", trace_path, "' lacks a per_instance array");
    double sum = 0.0, mx = 0.0, mn = 0.0;
    int64_t n = 0;
    for (const Json& e : t.at("per_instance")) {
      const double g = require<double>(e, "trace item", "gflops");
      if (n == 0) mx = mn = g;
      mx = std::max(mx, g);
      mn = std::min(mn, g);
      sum += g;
      ++n;
    }
    if (n == 0) fail(ErrorKind::Config, "trace '", trace_path, "' has no instances");
    out["clips"] = n;
    out["avg_gflops"] = sum / static_cast<double>(n);
    out["max_gflops"] = mx;
    out["min_gflops"] = mn;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_analyze(const std::string& manifest, const std::string& ckpt, const std::string& arch,
                uint64_t seed, const AnalyzeOptions& opt, const std::string& out_json,
                const std::string& out_csv) {
  const Dataset ds = load_manifest(manifest);
  std::vector<Tensor> clips;
  for (const VideoClip& c : ds.clips) clips.push_back(c.data);

  RedundancyReport report;
  if (!ckpt.empty()) {
    Model model = model_from_checkpoint(load_checkpoint(ckpt));
    report = analyze(clips, model_feature_extractor(model), opt);
  } else if (!arch.empty()) {
    if (ds.dims[2] != ds.dims[3])
      fail(ErrorKind::Config, "builtin archs need square frames");
    Model model = build_model(
        builtin_spec(arch, ds.dims[1], ds.dims[2], static_cast<int>(ds.class_names.size())),
        seed);
    report = analyze(clips, model_feature_extractor(model), opt);
  } else {
    FeatureExtractor raw = [](const Tensor& clip) {
      return std::vector<std::pair<std::string, Tensor>>{{"input", clip}};
    };
    report = analyze(clips, raw, opt);
  }
  if (!out_json.empty()) write_json_file(out_json, report.to_json());
  if (!out_csv.empty()) write_text_file(out_csv, report.to_csv());
  std::cerr << "analyzed " << clips.size() << " clips, " << report.rows.size()
            << " (layer, dimension) rows\n";
  return 0;
}

int cmd_export_policy(const std::string& ckpt, const std::string& manifest,
                      const std::string& out_csv, const std::string& out_json,
                      double eps_active) {
  Model model = model_from_checkpoint(load_checkpoint(ckpt));
  const Dataset ds = load_manifest(manifest);
  const EvalResult r = evaluate(model, ds, static_cast<float>(eps_active), false);
  write_text_file(out_csv, policy_stats_csv(r));
  write_json_file(out_json, per_instance_cost_json(r));
  std::cerr << "policy stats for " << r.class_names.size() << " classes x "
            << r.dyn_layer_names.size() << " dynamic layers -> " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"input-dependent redundancy reduction for video CNNs"};
  app.require_subcommand(1);

  std::string config, out, ckpt, manifest, arch, trace, out_json, out_csv, resume;
  int64_t frames = 8, res = 32;
  int classes = 4;
  uint64_t seed = 0;
  double eps_active = 0.0;
  bool forced_full = false;
  AnalyzeOptions aopt;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--config", config, "synth config JSON")->required();
  gen->add_option("--out", out, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "joint training of weights and gates");
  train->add_option("--config", config, "run config JSON")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--ckpt", resume, "resume from checkpoint");

  CLI::App* ft = app.add_subcommand("finetune", "efficiency-loss finetuning");
  ft->add_option("--config", config, "run config JSON")->required();
  ft->add_option("--ckpt", ckpt, "checkpoint to finetune")->required();
  ft->add_option("--out", out, "output directory")->required();

  CLI::App* ev = app.add_subcommand("eval", "single-clip dynamic evaluation");
  ev->add_option("--ckpt", ckpt, "model checkpoint")->required();
  ev->add_option("--manifest", manifest, "dataset manifest")->required();
  ev->add_option("--out", out, "output JSON file")->required();
  ev->add_option("--eps-active", eps_active, "active-branch threshold");
  ev->add_flag("--forced-full", forced_full, "override gates to branch 1");

  CLI::App* fl = app.add_subcommand("flops", "static (and traced) cost of an arch");
  fl->add_option("--arch", arch, "architecture name")->required();
  fl->add_option("--frames", frames, "input frames");
  fl->add_option("--res", res, "input resolution");
  fl->add_option("--classes", classes, "classifier classes");
  fl->add_option("--trace", trace, "per-instance cost JSON to summarize");

  CLI::App* an = app.add_subcommand("analyze", "feature-map redundancy analysis");
  an->add_option("--manifest", manifest, "dataset manifest")->required();
  an->add_option("--ckpt", ckpt, "model checkpoint (feature extractor)");
  an->add_option("--arch", arch, "fresh-init architecture (feature extractor)");
  an->add_option("--seed", seed, "init seed for --arch");
  an->add_option("--cc-threshold", aopt.cc_threshold, "CC redundancy threshold");
  an->add_option("--rmse-threshold", aopt.rmse_threshold, "RMSE redundancy threshold");
  an->add_flag("--all-pairs", aopt.all_pairs, "all frame pairs, not adjacent only");
  an->add_flag("--literal-rmse", aopt.literal_flag, "flag pairs with RMSE above the threshold");
  bool no_norm = false;
  an->add_flag("--no-normalize", no_norm, "skip per-layer min-max normalization");
  an->add_option("--out-json", out_json, "report JSON path");
  an->add_option("--out-csv", out_csv, "report CSV path");

  CLI::App* ep = app.add_subcommand("export-policy", "per-class policy heatmap + cost list");
  ep->add_option("--ckpt", ckpt, "model checkpoint")->required();
  ep->add_option("--manifest", manifest, "dataset manifest")->required();
  ep->add_option("--out-csv", out_csv, "heatmap CSV path")->required();
  ep->add_option("--out-json", out_json, "per-instance cost JSON path")->required();
  ep->add_option("--eps-active", eps_active, "active-branch threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config, out);
    if (train->parsed()) return cmd_train(config, out, resume);
    if (ft->parsed()) return cmd_finetune(config, ckpt, out);
    if (ev->parsed()) return cmd_eval(ckpt, manifest, out, eps_active, forced_full);
    if (fl->parsed()) return cmd_flops(arch, frames, res, classes, trace);
    if (an->parsed()) {
      aopt.normalize = !no_norm;
      return cmd_analyze(manifest, ckpt, arch, seed, aopt, out_json, out_csv);
    }
    if (ep->parsed()) return cmd_export_policy(ckpt, manifest, out_csv, out_json, eps_active);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::Config:
      case ErrorKind::Shape:
        return 2;
      case ErrorKind::Io:
        return 3;
      case ErrorKind::Numeric:
        return 4;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
