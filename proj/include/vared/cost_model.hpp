// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Analytic FLOPs accounting and the efficiency loss. Convention: one
// multiply-add counts as one FLOP; BN, activations and pooling are free.
// All counts are integers held exactly in doubles (every value < 2^53).

#ifndef VARED_COST_MODEL_HPP_
#define VARED_COST_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vared/nn.hpp"
#include "vared/tensor.hpp"

namespace vared {

enum class LayerKind { Conv, Fc, Bn, CheapOp, Gate };

struct LayerCostSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int64_t c_in = 1, c_out = 1;
  int64_t k_t = 1, k_h = 1, k_w = 1;
  int64_t t_o = 1, h_o = 1, w_o = 1;
  int64_t groups = 1;
};

inline void validate_cost_spec(const LayerCostSpec& s) {
  const int64_t fields[] = {s.c_in, s.c_out, s.k_t, s.k_h, s.k_w, s.t_o, s.h_o, s.w_o, s.groups};
  for (int64_t v : fields)
    if (v <= 0) fail(ErrorKind::Config, "cost spec '", s.name, "': all fields must be positive");
}

// Multiply-add count of a conv (or fc: k = 1, unit output dims).
inline double conv_flops(const LayerCostSpec& s) {
  validate_cost_spec(s);
  return static_cast<double>(s.c_in) * static_cast<double>(s.c_out) *
         static_cast<double>(s.k_t * s.k_h * s.k_w) *
         static_cast<double>(s.t_o * s.h_o * s.w_o) / static_cast<double>(s.groups);
}

// Gate cost: two FC layers (pool/BN/tanh excluded by convention).
inline double gate_flops(int64_t c_in, int64_t t, int64_t d_h, int64_t s_total) {
  return static_cast<double>(c_in * t) * static_cast<double>(d_h) +
         static_cast<double>(d_h) * static_cast<double>(s_total);
}

enum class CheapKind { Identity, DepthwiseSpatial, Pointwise };

inline std::string cheap_kind_name(CheapKind k) {
  switch (k) {
    case CheapKind::Identity: return "identity";
    case CheapKind::DepthwiseSpatial: return "depthwise_spatial";
    case CheapKind::Pointwise: return "pointwise";
  }
  return "?";
}

inline CheapKind cheap_kind_from_name(const std::string& s) {
  if (s == "identity") return CheapKind::Identity;
  if (s == "depthwise_spatial") return CheapKind::DepthwiseSpatial;
  if (s == "pointwise") return CheapKind::Pointwise;
  fail(ErrorKind::Config, "unknown cheap-op kind '", s, "'");
}

// FLOPs to generate the missing (c_out - n_computed) channels at t_frames
// temporal positions.
inline double cheap_channel_flops(CheapKind kind, int64_t c_out, int64_t n_computed,
                                  int64_t t_frames, int64_t h_o, int64_t w_o, int64_t k = 3) {
  const int64_t gen = c_out - n_computed;
  if (gen <= 0) return 0.0;
  const double area = static_cast<double>(t_frames) * static_cast<double>(h_o * w_o);
  switch (kind) {
    case CheapKind::Identity: return 0.0;
    case CheapKind::DepthwiseSpatial: return static_cast<double>(gen) * static_cast<double>(k * k) * area;
    case CheapKind::Pointwise: return static_cast<double>(gen) * static_cast<double>(n_computed) * area;
  }
  return 0.0;
}

// FLOPs to reconstruct the skipped t_o - t_o/R frames for all c_out channels.
inline double cheap_temporal_flops(CheapKind kind, int64_t c_out, int64_t t_o, int64_t r_factor,
                                   int64_t h_o, int64_t w_o, int64_t k = 3) {
  if (r_factor <= 1) return 0.0;
  const int64_t gen_frames = t_o - t_o / r_factor;
  const double area = static_cast<double>(gen_frames) * static_cast<double>(h_o * w_o);
  switch (kind) {
    case CheapKind::Identity: return 0.0;
    case CheapKind::DepthwiseSpatial: return static_cast<double>(c_out) * static_cast<double>(k * k) * area;
    case CheapKind::Pointwise: return static_cast<double>(c_out) * static_cast<double>(c_out) * area;
  }
  return 0.0;
}

// Realized cost of a dynamic layer at largest active branches (i_s_t, i_s_c),
// both 1-based: (1/2)^{i_s_c + i_s_t - 2} * C(f) plus the exact cheap-op
// FLOPs of that configuration.
inline double dynamic_layer_cost(const LayerCostSpec& s, int i_s_t, int i_s_c,
                                 CheapKind cheap_temporal, CheapKind cheap_channel) {
  if (i_s_t < 1 || i_s_c < 1) fail(ErrorKind::Config, "branch indices are 1-based");
  const double base = conv_flops(s);
  const double main_term = std::ldexp(base, -(i_s_c + i_s_t - 2));
  const int64_t r_factor = int64_t{1} << (i_s_t - 1);
  const int64_t n_computed = s.c_out >> (i_s_c - 1);
  if (n_computed << (i_s_c - 1) != s.c_out)
    fail(ErrorKind::Config, "cost spec '", s.name, "': c_out ", s.c_out,
         " not divisible by 2^", i_s_c - 1);
  if (s.t_o % r_factor != 0)
    fail(ErrorKind::Config, "cost spec '", s.name, "': t_o ", s.t_o,
         " not divisible by temporal factor ", r_factor);
  return main_term +
         cheap_channel_flops(cheap_channel, s.c_out, n_computed, s.t_o / r_factor, s.h_o, s.w_o) +
         cheap_temporal_flops(cheap_temporal, s.c_out, s.t_o, r_factor, s.h_o, s.w_o);
}

// --- dataset-level cost reporting ---

struct PerInstanceCost {
  std::string clip_id;
  double gflops = 0.0;
};

struct CostReport {
  double static_gflops = 0.0;
  std::vector<PerInstanceCost> per_instance;
  double avg = 0.0, max = 0.0, min = 0.0;

  void finalize() {
    if (per_instance.empty()) {
      avg = max = min = 0.0;
      return;
    }
    double sum = 0.0;
    max = per_instance.front().gflops;
    min = max;
    for (const auto& p : per_instance) {
      sum += p.gflops;
      max = std::max(max, p.gflops);
      min = std::min(min, p.gflops);
    }
    avg = sum / static_cast<double>(per_instance.size());
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["static_gflops"] = static_gflops;
    j["per_instance"] = nlohmann::ordered_json::array();
    for (const auto& p : per_instance) {
      nlohmann::ordered_json e;
      e["clip_id"] = p.clip_id;
      e["gflops"] = p.gflops;
      j["per_instance"].push_back(std::move(e));
    }
    j["avg"] = avg;
    j["max"] = max;
    j["min"] = min;
    return j;
  }

  std::string to_csv() const {
    std::string out = "clip_id,gflops\n";
    for (const auto& p : per_instance) out += p.clip_id + "," + std::to_string(p.gflops) + "\n";
    return out;
  }
};

// --- efficiency loss (squared cost-weighted ratio penalty) ---

enum class EffMode { Literal, Soft };

// First 1-based index with value > eps; 0-based fallback handled by caller.
template <typename T>
int largest_active_index(const T* v, int64_t s, T eps) {
  for (int64_t i = 0; i < s; ++i)
    if (v[i] > eps) return static_cast<int>(i) + 1;
  return 1;
}

template <typename T>
std::vector<std::pair<int, T>> active_branch_set(const T* v, int64_t s, T eps) {
  std::vector<std::pair<int, T>> out;
  for (int64_t i = 0; i < s; ++i)
    if (v[i] > eps) out.emplace_back(static_cast<int>(i) + 1, v[i]);
  if (out.empty()) out.emplace_back(1, T(1));
  return out;
}

// L_e = mean_n mu0[n] * s_n^2 with
//   s_n = sum_l C_l * ratio_{l,n} / sum_l C_l.
// Literal mode: ratio = (1/2)^{i_s_c-1} * (1/2)^{i_s_t-1} from largest active
// branches (piecewise constant, zero gradient). Soft mode: ratio is the
// product of sum-normalized policy expectations of (1/2)^{i-1}; rows summing
// to zero fall back to branch 1 (ratio 1, no gradient). mu0 is a
// stop-gradient factor. Internals run in double so the anchor values
// (1.0, 0.0, 0.0625) are exact.
template <typename T>
TensorT<T> efficiency_loss(const std::vector<TensorT<T>>& v_c, const std::vector<TensorT<T>>& v_t,
                           const std::vector<double>& layer_cost, const std::vector<T>& mu0,
                           EffMode mode, T eps_active = T(0)) {
  const size_t L = v_c.size();
  if (L == 0 || v_t.size() != L || layer_cost.size() != L)
    fail_shape("efficiency_loss: need matching per-layer V_c, V_t, and costs");
  const int64_t N = v_c[0].dim(0);
  for (size_t l = 0; l < L; ++l) {
    if (v_c[l].ndim() != 2 || v_t[l].ndim() != 2 || v_c[l].dim(0) != N || v_t[l].dim(0) != N)
      fail_shape("efficiency_loss: policy tensors must be [N,S] with shared N");
    if (layer_cost[l] <= 0) fail(ErrorKind::Config, "efficiency_loss: layer costs must be positive");
  }
  if (static_cast<int64_t>(mu0.size()) != N) fail_shape("efficiency_loss: mu0 size mismatch");

  double cost_sum = 0.0;
  for (double c : layer_cost) cost_sum += c;

  // Per (layer, item): normalized channel/temporal expectations and row sums.
  auto rc = std::make_shared<std::vector<double>>(L * static_cast<size_t>(N));
  auto rt = std::make_shared<std::vector<double>>(L * static_cast<size_t>(N));
  auto sc = std::make_shared<std::vector<double>>(L * static_cast<size_t>(N));
  auto st = std::make_shared<std::vector<double>>(L * static_cast<size_t>(N));
  auto s_item = std::make_shared<std::vector<double>>(static_cast<size_t>(N));

  for (size_t l = 0; l < L; ++l) {
    const int64_t Sc = v_c[l].dim(1), St = v_t[l].dim(1);
    for (int64_t n = 0; n < N; ++n) {
      const T* pc = v_c[l].ptr() + n * Sc;
      const T* pt = v_t[l].ptr() + n * St;
      const size_t idx = l * static_cast<size_t>(N) + static_cast<size_t>(n);
      if (mode == EffMode::Literal) {
        (*rc)[idx] = std::ldexp(1.0, -(largest_active_index(pc, Sc, eps_active) - 1));
        (*rt)[idx] = std::ldexp(1.0, -(largest_active_index(pt, St, eps_active) - 1));
        (*sc)[idx] = (*st)[idx] = 0.0;
      } else {
        double sum_c = 0.0, dot_c = 0.0;
        for (int64_t i = 0; i < Sc; ++i) {
          sum_c += static_cast<double>(pc[i]);
          dot_c += static_cast<double>(pc[i]) * std::ldexp(1.0, -static_cast<int>(i));
        }
        double sum_t = 0.0, dot_t = 0.0;
        for (int64_t j = 0; j < St; ++j) {
          sum_t += static_cast<double>(pt[j]);
          dot_t += static_cast<double>(pt[j]) * std::ldexp(1.0, -static_cast<int>(j));
        }
        (*sc)[idx] = sum_c;
        (*st)[idx] = sum_t;
        (*rc)[idx] = sum_c == 0.0 ? 1.0 : dot_c / sum_c;
        (*rt)[idx] = sum_t == 0.0 ? 1.0 : dot_t / sum_t;
      }
    }
  }
  double loss = 0.0;
  for (int64_t n = 0; n < N; ++n) {
    double acc = 0.0;
    for (size_t l = 0; l < L; ++l) {
      const size_t idx = l * static_cast<size_t>(N) + static_cast<size_t>(n);
      acc += layer_cost[l] * (*rc)[idx] * (*rt)[idx];
    }
    const double sn = acc / cost_sum;
    (*s_item)[static_cast<size_t>(n)] = sn;
    loss += static_cast<double>(mu0[static_cast<size_t>(n)]) * sn * sn;
  }
  TensorT<T> out({1}, static_cast<T>(loss / static_cast<double>(N)));

  TapeT<T>* tape = nullptr;
  for (size_t l = 0; l < L; ++l) {
    for (const TensorT<T>* t : {&v_c[l], &v_t[l]})
      if (t->node >= 0) {
        if (tape && tape != t->tape) fail_shape("efficiency_loss: mixed tapes");
        tape = t->tape;
      }
  }
  if (!tape || mode == EffMode::Literal) return out;

  std::vector<int> cnodes(L), tnodes(L);
  std::vector<std::shared_ptr<std::vector<T>>> cdatas(L), tdatas(L);
  std::vector<int64_t> scs(L), sts(L);
  std::vector<int> parents;
  for (size_t l = 0; l < L; ++l) {
    cnodes[l] = v_c[l].node;
    tnodes[l] = v_t[l].node;
    cdatas[l] = v_c[l].data;
    tdatas[l] = v_t[l].data;
    scs[l] = v_c[l].dim(1);
    sts[l] = v_t[l].dim(1);
    if (cnodes[l] >= 0) parents.push_back(cnodes[l]);
    if (tnodes[l] >= 0) parents.push_back(tnodes[l]);
  }
  out.tape = tape;
  out.node = tape->record(parents, 1, [=](TapeT<T>& tp, const std::vector<T>& gout) {
    const double g0 = static_cast<double>(gout[0]);
    for (size_t l = 0; l < L; ++l) {
      const double wl = layer_cost[l] / cost_sum;
      for (int64_t n = 0; n < N; ++n) {
        const double m = static_cast<double>(mu0[static_cast<size_t>(n)]);
        if (m == 0.0) continue;
        const size_t idx = l * static_cast<size_t>(N) + static_cast<size_t>(n);
        const double common =
            g0 * 2.0 * m * (*s_item)[static_cast<size_t>(n)] / static_cast<double>(N) * wl;
        if (cnodes[l] >= 0 && (*sc)[idx] != 0.0) {
          auto& gc = tp.grad(cnodes[l]);
          const double f = common * (*rt)[idx] / (*sc)[idx];
          for (int64_t i = 0; i < scs[l]; ++i)
            gc[static_cast<size_t>(n * scs[l] + i)] +=
                static_cast<T>(f * (std::ldexp(1.0, -static_cast<int>(i)) - (*rc)[idx]));
        }
        if (tnodes[l] >= 0 && (*st)[idx] != 0.0) {
          auto& gt = tp.grad(tnodes[l]);
          const double f = common * (*rc)[idx] / (*st)[idx];
          for (int64_t j = 0; j < sts[l]; ++j)
            gt[static_cast<size_t>(n * sts[l] + j)] +=
                static_cast<T>(f * (std::ldexp(1.0, -static_cast<int>(j)) - (*rt)[idx]));
        }
      }
    }
  });
  return out;
}

// L = L_a + lambda_e * L_e
template <typename T>
TensorT<T> total_loss(const TensorT<T>& l_a, const TensorT<T>& l_e, T lambda_e) {
  if (lambda_e < T(0)) fail(ErrorKind::Config, "lambda_e must be >= 0");
  return add(l_a, scale(l_e, lambda_e));
}

}  // namespace vared

#endif  // VARED_COST_MODEL_HPP_
