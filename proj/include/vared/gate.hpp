// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Soft modulation gate: maps layer input features to temporal and channel
// policy vectors in [0,1) via
//   [V_t, V_c] = phi(FC2(tanh(BN(FC1(G(x))))) + beta),  phi(z) = max(tanh z, 0)
// where G is the global spatial pool flattening to C_in*T.

#ifndef VARED_GATE_HPP_
#define VARED_GATE_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vared/cost_model.hpp"
#include "vared/nn.hpp"
#include "vared/tensor.hpp"

namespace vared {

template <typename T>
struct GateParamsT {
  TensorT<T> w1;        // [C_in*T, D_h]
  TensorT<T> w2;        // [D_h, S_t+S_c]
  TensorT<T> beta;      // [S_t+S_c]
  TensorT<T> bn_gamma;  // [D_h]
  TensorT<T> bn_beta;   // [D_h]
  BatchNormState<T> bn;
  int64_t d_h = 16;
  int64_t s_t = 2, s_c = 2;
};

using GateParams = GateParamsT<float>;

// beta starts at +1 on branch 1 of both halves so training begins near the
// full-compute network; FC weights start small so features, not noise, drive
// early policies.
template <typename T>
GateParamsT<T> make_gate(int64_t in_width, int64_t s_t, int64_t s_c, int64_t d_h,
                         std::mt19937& gen) {
  if (s_t < 1 || s_c < 1 || d_h < 1)
    fail(ErrorKind::Config, "gate: S_t, S_c, D_h must all be >= 1");
  GateParamsT<T> g;
  g.d_h = d_h;
  g.s_t = s_t;
  g.s_c = s_c;
  g.w1 = he_init<T>({in_width, d_h}, in_width, gen);
  g.w2 = randn<T>({d_h, s_t + s_c}, gen, static_cast<T>(0.01));
  g.beta = TensorT<T>({s_t + s_c});
  g.beta[0] = T(1);
  g.beta[s_t] = T(1);
  g.bn_gamma = TensorT<T>({d_h}, T(1));
  g.bn_beta = TensorT<T>({d_h});
  g.bn.running_mean = TensorT<T>({d_h});
  g.bn.running_var = TensorT<T>({d_h}, T(1));
  return g;
}

// Policy rows for a batch: [N, S_t+S_c]; columns [0,S_t) are V_t, the rest
// V_c. Differentiable end-to-end in train mode.
template <typename T>
TensorT<T> gate_forward(GateParamsT<T>& gate, const TensorT<T>& x, Mode mode) {
  if (x.ndim() != 5) fail_shape("gate_forward: input must be [N,C,T,H,W]");
  const int64_t width = x.dim(1) * x.dim(2);
  if (width != gate.w1.dim(0))
    fail_shape("gate_forward: input width C_in*T = ", width, " but gate expects ",
               gate.w1.dim(0));
  TensorT<T> pooled = global_spatial_pool(x);
  TensorT<T> zero1(std::vector<int64_t>{gate.d_h});
  TensorT<T> h = fully_connected(pooled, gate.w1, zero1);
  h = batch_norm(h, gate.bn_gamma, gate.bn_beta, gate.bn, mode);
  h = tanh_op(h);
  TensorT<T> out = fully_connected(h, gate.w2, gate.beta);
  return phi_clamp(out);
}

template <typename T>
TensorT<T> gate_v_t(const TensorT<T>& policy, const GateParamsT<T>& gate) {
  return slice(policy, 1, 0, gate.s_t);
}

template <typename T>
TensorT<T> gate_v_c(const TensorT<T>& policy, const GateParamsT<T>& gate) {
  return slice(policy, 1, gate.s_t, gate.s_c);
}

// Typed policy-vector views over raw rows.
enum class PolicyDim { Temporal, Channel };

struct PolicyVector {
  std::vector<float> values;
  PolicyDim kind = PolicyDim::Temporal;
};

inline int largest_active_index(const PolicyVector& v, float eps = 0.0f) {
  return largest_active_index(v.values.data(), static_cast<int64_t>(v.values.size()), eps);
}

inline std::vector<std::pair<int, float>> active_branch_set(const PolicyVector& v,
                                                            float eps = 0.0f) {
  return active_branch_set(v.values.data(), static_cast<int64_t>(v.values.size()), eps);
}

}  // namespace vared

#endif  // VARED_GATE_HPP_
