// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Feature-map similarity measurement: Pearson correlation and RMSE over
// adjacent temporal/channel slices of each conv layer's output, aggregated
// into per-layer redundancy proportions.

#ifndef VARED_REDUNDANCY_HPP_
#define VARED_REDUNDANCY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vared/tensor.hpp"

namespace vared {

// Standard Pearson r; 0 when either input has zero variance.
inline double pearson_cc(const float* a, const float* b, int64_t n) {
  if (n < 2) fail_shape("pearson_cc: need length >= 2, got ", n);
  double ma = 0, mb = 0;
  for (int64_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double saa = 0, sbb = 0, sab = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

inline double rmse(const float* a, const float* b, int64_t n) {
  if (n < 1) fail_shape("rmse: empty input");
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

inline double pearson_cc(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) fail_shape("pearson_cc: length mismatch ", a.size(), " vs ", b.size());
  return pearson_cc(a.data(), b.data(), static_cast<int64_t>(a.size()));
}

inline double rmse(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) fail_shape("rmse: length mismatch ", a.size(), " vs ", b.size());
  return rmse(a.data(), b.data(), static_cast<int64_t>(a.size()));
}

struct AnalyzeOptions {
  double cc_threshold = 0.85;
  double rmse_threshold = 0.001;
  bool normalize = true;     // min-max normalize each layer map before RMSE
  bool literal_flag = false; // flag redundant when CC >= thr AND RMSE >= thr
  bool all_pairs = false;    // every (i, j) pair instead of adjacent slices
};

struct RedundancyReport {
  struct Row {
    std::string layer;
    std::string dimension;  // "temporal" | "channel"
    double mean_cc = 0.0;
    double mean_rmse = 0.0;
    double rp = 0.0;
    int64_t pairs = 0;
  };
  std::vector<Row> rows;
  AnalyzeOptions options;
  int64_t clips = 0;

  const Row* find(const std::string& layer, const std::string& dim) const {
    for (const auto& r : rows)
      if (r.layer == layer && r.dimension == dim) return &r;
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["cc_threshold"] = options.cc_threshold;
    j["rmse_threshold"] = options.rmse_threshold;
    j["normalize"] = options.normalize;
    j["literal_flag"] = options.literal_flag;
    j["all_pairs"] = options.all_pairs;
    j["clips"] = clips;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json e;
      e["layer"] = r.layer;
      e["dimension"] = r.dimension;
      e["mean_cc"] = r.mean_cc;
      e["mean_rmse"] = r.mean_rmse;
      e["rp"] = r.rp;
      e["pairs"] = r.pairs;
      j["layers"].push_back(std::move(e));
    }
    return j;
  }

  std::string to_csv() const {
    std::string out = "layer,dimension,mean_cc,mean_rmse,rp\n";
    char buf[160];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.9g,%.9g,%.9g\n", r.layer.c_str(),
                    r.dimension.c_str(), r.mean_cc, r.mean_rmse, r.rp);
      out += buf;
    }
    return out;
  }
};

// Named conv outputs for one clip; each tensor is [C,T,H,W] or [1,C,T,H,W].
using FeatureExtractor =
    std::function<std::vector<std::pair<std::string, Tensor>>(const Tensor& clip)>;

namespace detail {

struct PairAccum {
  double cc_sum = 0, rmse_sum = 0;
  int64_t pairs = 0, flagged = 0;

  void add(double cc, double e, const AnalyzeOptions& opt) {
    cc_sum += cc;
    rmse_sum += e;
    ++pairs;
    const bool rmse_ok = opt.literal_flag ? e >= opt.rmse_threshold : e <= opt.rmse_threshold;
    if (cc >= opt.cc_threshold && rmse_ok) ++flagged;
  }
};

inline void accumulate_layer(const Tensor& fmap_in, const AnalyzeOptions& opt, PairAccum& temporal,
                             PairAccum& channel) {
  const Tensor& f = fmap_in;
  size_t off = f.ndim() == 5 ? 1 : 0;
  if (f.ndim() != 4 && !(f.ndim() == 5 && f.dim(0) == 1))
    fail_shape("analyze: feature map must be [C,T,H,W], got ", f.shape_str());
  const int64_t C = f.dim(off), T = f.dim(off + 1), H = f.dim(off + 2), W = f.dim(off + 3);
  const int64_t hw = H * W;

  std::vector<float> norm;
  const float* base = f.ptr();
  if (opt.normalize) {
    float lo = base[0], hi = base[0];
    for (int64_t i = 1; i < f.numel(); ++i) {
      lo = std::min(lo, base[i]);
      hi = std::max(hi, base[i]);
    }
    norm.resize(static_cast<size_t>(f.numel()));
    const float range = hi - lo;
    if (range > 0)
      for (int64_t i = 0; i < f.numel(); ++i) norm[static_cast<size_t>(i)] = (base[i] - lo) / range;
    base = norm.data();
  }

  // Temporal: compare frame slices [C,H,W] at t1 vs t2.
  std::vector<float> fa(static_cast<size_t>(C * hw)), fb(fa.size());
  auto frame = [&](int64_t t, std::vector<float>& dst) {
    for (int64_t c = 0; c < C; ++c)
      std::copy(base + (c * T + t) * hw, base + (c * T + t + 1) * hw, dst.data() + c * hw);
  };
  auto do_temporal = [&](int64_t t1, int64_t t2) {
    frame(t1, fa);
    frame(t2, fb);
    temporal.add(pearson_cc(fa.data(), fb.data(), C * hw), rmse(fa.data(), fb.data(), C * hw), opt);
  };
  if (T >= 2) {
    if (opt.all_pairs) {
      for (int64_t t1 = 0; t1 < T; ++t1)
        for (int64_t t2 = t1 + 1; t2 < T; ++t2) do_temporal(t1, t2);
    } else {
      for (int64_t t = 0; t + 1 < T; ++t) do_temporal(t, t + 1);
    }
  }
  // Channel: compare channel slices [T,H,W] contiguously.
  auto do_channel = [&](int64_t c1, int64_t c2) {
    channel.add(pearson_cc(base + c1 * T * hw, base + c2 * T * hw, T * hw),
                rmse(base + c1 * T * hw, base + c2 * T * hw, T * hw), opt);
  };
  if (C >= 2) {
    if (opt.all_pairs) {
      for (int64_t c1 = 0; c1 < C; ++c1)
        for (int64_t c2 = c1 + 1; c2 < C; ++c2) do_channel(c1, c2);
    } else {
      for (int64_t c = 0; c + 1 < C; ++c) do_channel(c, c + 1);
    }
  }
}

}  // namespace detail

// Runs the extractor on every clip and aggregates per (layer, dimension).
inline RedundancyReport analyze(const std::vector<Tensor>& clips, const FeatureExtractor& extract,
                                const AnalyzeOptions& opt) {
  if (clips.empty()) fail(ErrorKind::Config, "analyze: empty dataset");
  std::vector<std::string> layer_order;
  std::vector<detail::PairAccum> temporal, channel;
  for (const Tensor& clip : clips) {
    auto feats = extract(clip);
    if (layer_order.empty()) {
      for (const auto& [name, f] : feats) {
        layer_order.push_back(name);
        temporal.emplace_back();
        channel.emplace_back();
      }
    } else if (feats.size() != layer_order.size()) {
      fail_shape("analyze: extractor returned ", feats.size(), " layers, expected ",
                 layer_order.size());
    }
    for (size_t i = 0; i < feats.size(); ++i)
      detail::accumulate_layer(feats[i].second, opt, temporal[i], channel[i]);
  }
  RedundancyReport rep;
  rep.options = opt;
  rep.clips = static_cast<int64_t>(clips.size());
  for (size_t i = 0; i < layer_order.size(); ++i) {
    auto emit = [&](const detail::PairAccum& acc, const char* dim) {
      RedundancyReport::Row r;
      r.layer = layer_order[i];
      r.dimension = dim;
      r.pairs = acc.pairs;
      if (acc.pairs > 0) {
        r.mean_cc = acc.cc_sum / static_cast<double>(acc.pairs);
        r.mean_rmse = acc.rmse_sum / static_cast<double>(acc.pairs);
        r.rp = static_cast<double>(acc.flagged) / static_cast<double>(acc.pairs);
      }
      rep.rows.push_back(std::move(r));
    };
    emit(temporal[i], "temporal");
    emit(channel[i], "channel");
  }
  return rep;
}

}  // namespace vared

#endif  // VARED_REDUNDANCY_HPP_
