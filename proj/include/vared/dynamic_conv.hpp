// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Temporal-wise and channel-wise dynamic convolutions. Branch (i_c, j_t)
// computes C_out/2^{i_c-1} channels at temporal stride S*2^{j_t-1} and cheaply
// reconstructs the rest: skipped frames from the computed ones, skipped
// channels from a round-robin source mapping. Training evaluates the policy-
// weighted sum of all branches by slicing one big-kernel result; inference
// computes only what the largest active branches need.

#ifndef VARED_DYNAMIC_CONV_HPP_
#define VARED_DYNAMIC_CONV_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vared/cost_model.hpp"
#include "vared/nn.hpp"
#include "vared/tensor.hpp"

namespace vared {

struct DynamicConvConfig {
  std::string name;
  int64_t c_in = 1, c_out = 1;
  int64_t k_t = 1, k_h = 1, k_w = 1;
  Stride3 stride;
  Pad3 pad;
  bool bias = true;
  int64_t s_t = 2, s_c = 2;
  CheapKind cheap_temporal = CheapKind::DepthwiseSpatial;
  CheapKind cheap_channel = CheapKind::DepthwiseSpatial;
};

template <typename T>
struct CheapOpT {
  CheapKind kind = CheapKind::Identity;
  TensorT<T> weights;  // depthwise: [C,3,3]; pointwise: [C,C]; identity: none
};

template <typename T>
struct DynamicConvParamsT {
  DynamicConvConfig cfg;
  TensorT<T> w;  // [C_out, C_in, k_t, k_h, k_w]
  TensorT<T> b;  // [C_out] when cfg.bias
  std::vector<CheapOpT<T>> cheap_t;  // one per temporal offset j = 1..2^{S_t-1}-1
  CheapOpT<T> cheap_c;
};

using DynamicConvParams = DynamicConvParamsT<float>;

namespace detail {

// Depthwise kernels start as spatial deltas and pointwise maps as identity,
// so reconstruction is an exact copy at initialization.
template <typename T>
CheapOpT<T> make_cheap(CheapKind kind, int64_t channels) {
  CheapOpT<T> op;
  op.kind = kind;
  if (kind == CheapKind::DepthwiseSpatial) {
    op.weights = TensorT<T>({channels, 3, 3});
    for (int64_t c = 0; c < channels; ++c) op.weights[c * 9 + 4] = T(1);
  } else if (kind == CheapKind::Pointwise) {
    op.weights = TensorT<T>({channels, channels});
    for (int64_t c = 0; c < channels; ++c) op.weights[c * channels + c] = T(1);
  }
  return op;
}

}  // namespace detail

template <typename T>
void validate_dynamic_config(const DynamicConvConfig& cfg) {
  if (cfg.s_t < 1 || cfg.s_c < 1)
    fail(ErrorKind::Config, "layer '", cfg.name, "': S_t and S_c must be >= 1");
  const int64_t div = int64_t{1} << (cfg.s_c - 1);
  if (cfg.c_out % div != 0)
    fail(ErrorKind::Config, "layer '", cfg.name, "': C_out ", cfg.c_out,
         " not divisible by 2^(S_c-1) = ", div);
}

template <typename T>
DynamicConvParamsT<T> make_dynamic_conv(const DynamicConvConfig& cfg, std::mt19937& gen) {
  validate_dynamic_config<T>(cfg);
  DynamicConvParamsT<T> p;
  p.cfg = cfg;
  const int64_t fan_in = cfg.c_in * cfg.k_t * cfg.k_h * cfg.k_w;
  p.w = he_init<T>({cfg.c_out, cfg.c_in, cfg.k_t, cfg.k_h, cfg.k_w}, fan_in, gen);
  if (cfg.bias) p.b = TensorT<T>({cfg.c_out});
  const int64_t offsets = (int64_t{1} << (cfg.s_t - 1)) - 1;
  for (int64_t j = 0; j < offsets; ++j)
    p.cheap_t.push_back(detail::make_cheap<T>(cfg.cheap_temporal, cfg.c_out));
  p.cheap_c = detail::make_cheap<T>(cfg.cheap_channel, cfg.c_out);
  return p;
}

// Applies a cheap op to every frame of a same-channel-count tensor.
template <typename T>
TensorT<T> apply_cheap_full(const CheapOpT<T>& op, const TensorT<T>& x) {
  switch (op.kind) {
    case CheapKind::Identity: return x;
    case CheapKind::DepthwiseSpatial: return depthwise_spatial(x, op.weights);
    case CheapKind::Pointwise: {
      const int64_t c = x.dim(1);
      TensorT<T> w5 = reshape(op.weights, {c, c, 1, 1, 1});
      return conv3d<T>(x, w5, nullptr, Stride3{1, 1, 1}, Pad3{0, 0, 0});
    }
  }
  fail(ErrorKind::Config, "unknown cheap-op kind");
}

// Frame positions j + i*R for j in {1..R-1} are filled by cheap copies of
// computed frame i; position i*R keeps the computed frame.
template <typename T>
TensorT<T> temporal_reconstruct(const TensorT<T>& yprime, int64_t r_factor,
                                const std::vector<CheapOpT<T>>& cheap_sets,
                                const std::string& layer = "") {
  if (r_factor < 1) fail(ErrorKind::Config, "temporal_reconstruct: R must be >= 1");
  if (r_factor == 1) return yprime;
  if (static_cast<int64_t>(cheap_sets.size()) < r_factor - 1)
    fail(ErrorKind::Config, "layer '", layer, "': need ", r_factor - 1,
         " temporal cheap ops, have ", cheap_sets.size());
  std::vector<TensorT<T>> parts;
  parts.push_back(yprime);
  for (int64_t j = 1; j < r_factor; ++j)
    parts.push_back(apply_cheap_full(cheap_sets[static_cast<size_t>(j - 1)], yprime));
  return temporal_interleave(parts);
}

// Output channel g >= n_computed is generated from source channel
// g mod n_computed; depthwise generators use the kernel at absolute index g.
template <typename T>
TensorT<T> channel_reconstruct(const TensorT<T>& yprime, int64_t c_out, const CheapOpT<T>& cheap,
                               const std::string& layer = "") {
  const int64_t n = yprime.dim(1);
  if (n == c_out) return yprime;
  if (n < 1 || n > c_out)
    fail_shape("layer '", layer, "': computed channels ", n, " vs C_out ", c_out);
  std::vector<int64_t> src(static_cast<size_t>(c_out - n));
  for (int64_t g = n; g < c_out; ++g) src[static_cast<size_t>(g - n)] = g % n;
  TensorT<T> gen;
  switch (cheap.kind) {
    case CheapKind::Identity:
      gen = gather_channels(yprime, src);
      break;
    case CheapKind::DepthwiseSpatial: {
      TensorT<T> sources = gather_channels(yprime, src);
      TensorT<T> kernels = slice(cheap.weights, 0, n, c_out - n);
      gen = depthwise_spatial(sources, kernels);
      break;
    }
    case CheapKind::Pointwise: {
      TensorT<T> wsub = slice(slice(cheap.weights, 0, n, c_out - n), 1, 0, n);
      TensorT<T> w5 = reshape(wsub, {c_out - n, n, 1, 1, 1});
      gen = conv3d<T>(yprime, w5, nullptr, Stride3{1, 1, 1}, Pad3{0, 0, 0});
      break;
    }
  }
  return concat(std::vector<TensorT<T>>{yprime, gen}, 1);
}

namespace detail {

inline int64_t conv_out_len(int64_t in, int64_t k, int64_t s, int64_t p) {
  return (in + 2 * p - k) / s + 1;
}

// The branch conv at temporal stride S*R must produce exactly T_o/R frames;
// otherwise the interleaved reconstruction indexing breaks.
inline void check_temporal_contract(const DynamicConvConfig& cfg, int64_t t_in, int64_t r_factor) {
  const int64_t t_o = conv_out_len(t_in, cfg.k_t, cfg.stride.t, cfg.pad.t);
  if (t_o % r_factor != 0)
    fail_shape("layer '", cfg.name, "': T_o = ", t_o, " not divisible by temporal factor ",
               r_factor);
  const int64_t t_branch = conv_out_len(t_in, cfg.k_t, cfg.stride.t * r_factor, cfg.pad.t);
  if (t_branch != t_o / r_factor)
    fail_shape("layer '", cfg.name, "': strided conv yields ", t_branch,
               " frames but T_o/R = ", t_o / r_factor,
               " (input length violates the divisibility contract)");
}

}  // namespace detail

// Explicit single-branch computation; the oracle the shared path must match.
template <typename T>
TensorT<T> branch_forward(const DynamicConvParamsT<T>& p, const TensorT<T>& x, int i_c, int j_t) {
  const auto& cfg = p.cfg;
  if (i_c < 1 || i_c > cfg.s_c || j_t < 1 || j_t > cfg.s_t)
    fail(ErrorKind::Config, "layer '", cfg.name, "': branch (", i_c, ",", j_t,
         ") outside search space ", cfg.s_c, "x", cfg.s_t);
  const int64_t r_factor = int64_t{1} << (j_t - 1);
  const int64_t n = cfg.c_out >> (i_c - 1);
  if (n << (i_c - 1) != cfg.c_out)
    fail(ErrorKind::Config, "layer '", cfg.name, "': C_out ", cfg.c_out,
         " not divisible for channel branch ", i_c);
  detail::check_temporal_contract(cfg, x.dim(2), r_factor);

  TensorT<T> wb = n == cfg.c_out ? p.w : slice(p.w, 0, 0, n);
  TensorT<T> y;
  Stride3 st{cfg.stride.t * r_factor, cfg.stride.h, cfg.stride.w};
  if (cfg.bias) {
    TensorT<T> bb = n == cfg.c_out ? p.b : slice(p.b, 0, 0, n);
    y = conv3d(x, wb, bb, st, cfg.pad);
  } else {
    y = conv3d<T>(x, wb, nullptr, st, cfg.pad);
  }
  y = channel_reconstruct(y, cfg.c_out, p.cheap_c, cfg.name);
  return temporal_reconstruct(y, r_factor, p.cheap_t, cfg.name);
}

// Policy-weighted dynamic layer. Train mode computes the big-kernel conv once
// and slices every branch from it:
//   Y = sum_j V_t[j] * f^t( sum_i V_c[i] * f^c(x, r_i), R_j )
// with degenerate all-zero rows replaced by branch 1 at weight 1. Eval mode
// computes only what the largest active branches (i_s_c, i_s_t) require.
template <typename T>
TensorT<T> shared_weight_forward(const DynamicConvParamsT<T>& p, const TensorT<T>& x,
                                 const TensorT<T>& v_t, const TensorT<T>& v_c, Mode mode,
                                 T eps_active = T(0)) {
  const auto& cfg = p.cfg;
  const int64_t n_items = x.dim(0);
  if (v_t.ndim() != 2 || v_t.dim(0) != n_items || v_t.dim(1) != cfg.s_t)
    fail_shape("layer '", cfg.name, "': V_t must be [", n_items, ",", cfg.s_t, "], got ",
               v_t.shape_str());
  if (v_c.ndim() != 2 || v_c.dim(0) != n_items || v_c.dim(1) != cfg.s_c)
    fail_shape("layer '", cfg.name, "': V_c must be [", n_items, ",", cfg.s_c, "], got ",
               v_c.shape_str());

  if (mode == Mode::Train) {
    TensorT<T> vt_eff = policy_effective(v_t, eps_active);
    TensorT<T> vc_eff = policy_effective(v_c, eps_active);
    TensorT<T> y_full = branch_forward(p, x, 1, 1);
    // y_full is branch (1,1) already reconstructed (a no-op for i=j=1).
    std::vector<TensorT<T>> chan_branches;
    chan_branches.push_back(y_full);
    for (int i = 2; i <= static_cast<int>(cfg.s_c); ++i) {
      const int64_t n = cfg.c_out >> (i - 1);
      TensorT<T> part = slice(y_full, 1, 0, n);
      chan_branches.push_back(channel_reconstruct(part, cfg.c_out, p.cheap_c, cfg.name));
    }
    TensorT<T> z = weighted_sum_per_item(chan_branches, vc_eff);
    std::vector<TensorT<T>> temp_branches;
    temp_branches.push_back(z);
    for (int j = 2; j <= static_cast<int>(cfg.s_t); ++j) {
      const int64_t r_factor = int64_t{1} << (j - 1);
      detail::check_temporal_contract(cfg, x.dim(2), r_factor);
      TensorT<T> sub = temporal_subsample(z, r_factor);
      temp_branches.push_back(temporal_reconstruct(sub, r_factor, p.cheap_t, cfg.name));
    }
    return weighted_sum_per_item(temp_branches, vt_eff);
  }

  // Eval: per item, compute the conv once at the joint largest-active
  // configuration and derive every active branch from it.
  std::vector<TensorT<T>> outs;
  outs.reserve(static_cast<size_t>(n_items));
  for (int64_t item = 0; item < n_items; ++item) {
    const T* vt_row = v_t.ptr() + item * cfg.s_t;
    const T* vc_row = v_c.ptr() + item * cfg.s_c;
    const auto act_t = active_branch_set(vt_row, cfg.s_t, eps_active);
    const auto act_c = active_branch_set(vc_row, cfg.s_c, eps_active);
    const int i_s_t = act_t.front().first;
    const int i_s_c = act_c.front().first;
    const int64_t r_base = int64_t{1} << (i_s_t - 1);
    const int64_t n_base = cfg.c_out >> (i_s_c - 1);
    detail::check_temporal_contract(cfg, x.dim(2), r_base);

    TensorT<T> xi = n_items == 1 ? x : slice(x, 0, item, 1);
    TensorT<T> wb = n_base == cfg.c_out ? p.w : slice(p.w, 0, 0, n_base);
    Stride3 st{cfg.stride.t * r_base, cfg.stride.h, cfg.stride.w};
    TensorT<T> y0;
    if (cfg.bias) {
      TensorT<T> bb = n_base == cfg.c_out ? p.b : slice(p.b, 0, 0, n_base);
      y0 = conv3d(xi, wb, bb, st, cfg.pad);
    } else {
      y0 = conv3d<T>(xi, wb, nullptr, st, cfg.pad);
    }

    TensorT<T> z;
    bool z_set = false;
    for (const auto& [i, wgt] : act_c) {
      const int64_t n = cfg.c_out >> (i - 1);
      TensorT<T> part = n == n_base ? y0 : slice(y0, 1, 0, n);
      TensorT<T> rec = channel_reconstruct(part, cfg.c_out, p.cheap_c, cfg.name);
      TensorT<T> term = scale(rec, wgt);
      z = z_set ? add(z, term) : term;
      z_set = true;
    }
    TensorT<T> yi;
    bool y_set = false;
    for (const auto& [j, wgt] : act_t) {
      const int64_t r_factor = int64_t{1} << (j - 1);
      TensorT<T> sub = r_factor == r_base ? z : temporal_subsample(z, r_factor / r_base);
      TensorT<T> rec = temporal_reconstruct(sub, r_factor, p.cheap_t, cfg.name);
      TensorT<T> term = scale(rec, wgt);
      yi = y_set ? add(yi, term) : term;
      y_set = true;
    }
    outs.push_back(std::move(yi));
  }
  return n_items == 1 ? outs.front() : concat(outs, 0);
}

// Static full cost of the underlying conv at the given input size.
inline LayerCostSpec dynamic_conv_cost_spec(const DynamicConvConfig& cfg, int64_t t_in,
                                            int64_t h_in, int64_t w_in) {
  LayerCostSpec s;
  s.name = cfg.name;
  s.kind = LayerKind::Conv;
  s.c_in = cfg.c_in;
  s.c_out = cfg.c_out;
  s.k_t = cfg.k_t;
  s.k_h = cfg.k_h;
  s.k_w = cfg.k_w;
  s.t_o = detail::conv_out_len(t_in, cfg.k_t, cfg.stride.t, cfg.pad.t);
  s.h_o = detail::conv_out_len(h_in, cfg.k_h, cfg.stride.h, cfg.pad.h);
  s.w_o = detail::conv_out_len(w_in, cfg.k_w, cfg.stride.w, cfg.pad.w);
  return s;
}

// Build-time budget rule: at every reduced branch configuration, the cheap
// ops must cost less than 10% of the compute they save.
inline void validate_cheap_budget(const DynamicConvConfig& cfg, int64_t t_in, int64_t h_in,
                                  int64_t w_in) {
  const LayerCostSpec s = dynamic_conv_cost_spec(cfg, t_in, h_in, w_in);
  const double base = conv_flops(s);
  for (int i = 1; i <= static_cast<int>(cfg.s_c); ++i)
    for (int j = 1; j <= static_cast<int>(cfg.s_t); ++j) {
      if (i == 1 && j == 1) continue;
      const double total = dynamic_layer_cost(s, j, i, cfg.cheap_temporal, cfg.cheap_channel);
      const double main_term = std::ldexp(base, -(i + j - 2));
      const double cheap = total - main_term;
      const double savings = base - main_term;
      if (!(cheap < 0.10 * savings))
        fail(ErrorKind::Config, "layer '", cfg.name, "': cheap ops at branch (", i, ",", j,
             ") cost ", cheap, " FLOPs, >= 10% of the ", savings, " FLOPs saved");
    }
}

}  // namespace vared

#endif  // VARED_DYNAMIC_CONV_HPP_
