// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Convolutions run as im2col + GEMM (Eigen);
// every op records its backward closure on the active tape.

#ifndef VARED_NN_HPP_
#define VARED_NN_HPP_

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vared/tensor.hpp"

namespace vared {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct Stride3 {
  int64_t t = 1, h = 1, w = 1;
};
struct Pad3 {
  int64_t t = 0, h = 0, w = 0;
};

enum class Mode { Train, Eval };

namespace detail {

template <typename T>
TapeT<T>* merge_tapes(std::initializer_list<const TensorT<T>*> ins) {
  TapeT<T>* tape = nullptr;
  for (const TensorT<T>* t : ins) {
    if (!t || t->node < 0) continue;
    if (tape && t->tape != tape)
      fail_shape("operands recorded on different tapes");
    tape = t->tape;
  }
  return tape;
}

// im2col for 5D input [C,T,H,W] (single batch item) -> col [C*kt*kh*kw, P].
template <typename T>
void im2col(const T* x, int64_t C, int64_t Ti, int64_t Hi, int64_t Wi,
            int64_t kt, int64_t kh, int64_t kw, Stride3 s, Pad3 p,
            int64_t To, int64_t Ho, int64_t Wo, T* col) {
  const int64_t P = To * Ho * Wo;
  int64_t row = 0;
  for (int64_t c = 0; c < C; ++c) {
    const T* xc = x + c * Ti * Hi * Wi;
    for (int64_t dt = 0; dt < kt; ++dt)
      for (int64_t dh = 0; dh < kh; ++dh)
        for (int64_t dw = 0; dw < kw; ++dw, ++row) {
          T* dst = col + row * P;
          for (int64_t to = 0; to < To; ++to) {
            const int64_t ti = to * s.t - p.t + dt;
            if (ti < 0 || ti >= Ti) {
              std::fill(dst, dst + Ho * Wo, T(0));
              dst += Ho * Wo;
              continue;
            }
            const T* xt = xc + ti * Hi * Wi;
            for (int64_t ho = 0; ho < Ho; ++ho) {
              const int64_t hi = ho * s.h - p.h + dh;
              if (hi < 0 || hi >= Hi) {
                std::fill(dst, dst + Wo, T(0));
                dst += Wo;
                continue;
              }
              const T* xr = xt + hi * Wi;
              const int64_t wi0 = -p.w + dw;
              for (int64_t wo = 0; wo < Wo; ++wo) {
                const int64_t wi = wo * s.w + wi0;
                *dst++ = (wi >= 0 && wi < Wi) ? xr[wi] : T(0);
              }
            }
          }
        }
  }
}

// Transpose of im2col: accumulates col gradients back into the input.
template <typename T>
void col2im_acc(const T* col, int64_t C, int64_t Ti, int64_t Hi, int64_t Wi,
                int64_t kt, int64_t kh, int64_t kw, Stride3 s, Pad3 p,
                int64_t To, int64_t Ho, int64_t Wo, T* gx) {
  const int64_t P = To * Ho * Wo;
  int64_t row = 0;
  for (int64_t c = 0; c < C; ++c) {
    T* gc = gx + c * Ti * Hi * Wi;
    for (int64_t dt = 0; dt < kt; ++dt)
      for (int64_t dh = 0; dh < kh; ++dh)
        for (int64_t dw = 0; dw < kw; ++dw, ++row) {
          const T* src = col + row * P;
          for (int64_t to = 0; to < To; ++to) {
            const int64_t ti = to * s.t - p.t + dt;
            if (ti < 0 || ti >= Ti) {
              src += Ho * Wo;
              continue;
            }
            T* gt = gc + ti * Hi * Wi;
            for (int64_t ho = 0; ho < Ho; ++ho) {
              const int64_t hi = ho * s.h - p.h + dh;
              if (hi < 0 || hi >= Hi) {
                src += Wo;
                continue;
              }
              T* gr = gt + hi * Wi;
              const int64_t wi0 = -p.w + dw;
              for (int64_t wo = 0; wo < Wo; ++wo) {
                const int64_t wi = wo * s.w + wi0;
                if (wi >= 0 && wi < Wi) gr[wi] += src[wo];
              }
              src += Wo;
            }
          }
        }
  }
}

}  // namespace detail

// --- convolution ---

// 3D convolution over [N, C_in, T, H, W]. Weight layout
// [C_out, C_in/groups, kt, kh, kw]; bias optional. 2D convolution is the
// kt = 1 case, 1D temporal convolution the kh = kw = 1 case.
template <typename T>
TensorT<T> conv3d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias,
                  Stride3 stride, Pad3 pad, int64_t groups = 1) {
  if (x.ndim() != 5) fail_shape("conv3d: input must be 5D, got ", x.shape_str());
  if (w.ndim() != 5) fail_shape("conv3d: weight must be 5D, got ", w.shape_str());
  const int64_t N = x.dim(0), Cin = x.dim(1), Ti = x.dim(2), Hi = x.dim(3), Wi = x.dim(4);
  const int64_t Cout = w.dim(0), kt = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  if (groups < 1 || Cin % groups != 0 || Cout % groups != 0)
    fail_shape("conv3d: groups ", groups, " must divide C_in ", Cin, " and C_out ", Cout);
  if (w.dim(1) != Cin / groups)
    fail_shape("conv3d: weight channel dim ", w.dim(1), " != C_in/groups ", Cin / groups);
  if (stride.t < 1 || stride.h < 1 || stride.w < 1)
    fail_shape("conv3d: strides must be >= 1");
  if (kt > Ti + 2 * pad.t) fail_shape("conv3d: kernel t ", kt, " exceeds padded input t ", Ti + 2 * pad.t);
  if (kh > Hi + 2 * pad.h) fail_shape("conv3d: kernel h ", kh, " exceeds padded input h ", Hi + 2 * pad.h);
  if (kw > Wi + 2 * pad.w) fail_shape("conv3d: kernel w ", kw, " exceeds padded input w ", Wi + 2 * pad.w);
  if (bias && (bias->ndim() != 1 || bias->dim(0) != Cout))
    fail_shape("conv3d: bias must be [C_out], got ", bias->shape_str());

  const int64_t To = (Ti + 2 * pad.t - kt) / stride.t + 1;
  const int64_t Ho = (Hi + 2 * pad.h - kh) / stride.h + 1;
  const int64_t Wo = (Wi + 2 * pad.w - kw) / stride.w + 1;
  const int64_t P = To * Ho * Wo;
  const int64_t Cg = Cin / groups, Og = Cout / groups;
  const int64_t Kg = Cg * kt * kh * kw;

  TensorT<T> y({N, Cout, To, Ho, Wo});
  std::vector<T> col(static_cast<size_t>(Cin * kt * kh * kw * P));
  for (int64_t n = 0; n < N; ++n) {
    detail::im2col(x.ptr() + n * Cin * Ti * Hi * Wi, Cin, Ti, Hi, Wi, kt, kh, kw,
                   stride, pad, To, Ho, Wo, col.data());
    for (int64_t g = 0; g < groups; ++g) {
      ConstMatMap<T> Wm(w.ptr() + g * Og * Kg, Og, Kg);
      ConstMatMap<T> Cm(col.data() + g * Kg * P, Kg, P);
      MatMap<T> Ym(y.ptr() + (n * Cout + g * Og) * P, Og, P);
      Ym.noalias() = Wm * Cm;
    }
    if (bias) {
      T* yp = y.ptr() + n * Cout * P;
      for (int64_t c = 0; c < Cout; ++c) {
        const T b = (*bias)[c];
        T* row = yp + c * P;
        for (int64_t i = 0; i < P; ++i) row[i] += b;
      }
    }
  }

  TapeT<T>* tape = detail::merge_tapes<T>({&x, &w, bias});
  if (!tape) return y;
  const int xn = x.node, wn = w.node, bn = bias ? bias->node : -1;
  auto xd = x.data, wd = w.data;
  auto xshape = x.shape, wshape = w.shape;
  std::vector<int> parents{};
  if (xn >= 0) parents.push_back(xn);
  if (wn >= 0) parents.push_back(wn);
  if (bn >= 0) parents.push_back(bn);
  y.tape = tape;
  y.node = tape->record(
      parents, y.numel(),
      [=](TapeT<T>& tp, const std::vector<T>& gout) {
        std::vector<T> colb(static_cast<size_t>(Cin * kt * kh * kw * P));
        std::vector<T> gcol(colb.size());
        for (int64_t n = 0; n < N; ++n) {
          const T* go_n = gout.data() + n * Cout * P;
          if (bn >= 0) {
            auto& gb = tp.grad(bn);
            for (int64_t c = 0; c < Cout; ++c) {
              T acc = 0;
              const T* row = go_n + c * P;
              for (int64_t i = 0; i < P; ++i) acc += row[i];
              gb[static_cast<size_t>(c)] += acc;
            }
          }
          if (wn >= 0 || xn >= 0)
            detail::im2col(xd->data() + n * Cin * Ti * Hi * Wi, Cin, Ti, Hi, Wi,
                           kt, kh, kw, stride, pad, To, Ho, Wo, colb.data());
          if (wn >= 0) {
            auto& gw = tp.grad(wn);
            for (int64_t g = 0; g < groups; ++g) {
              ConstMatMap<T> Gm(go_n + g * Og * P, Og, P);
              ConstMatMap<T> Cm(colb.data() + g * Kg * P, Kg, P);
              MatMap<T> GW(gw.data() + g * Og * Kg, Og, Kg);
              GW.noalias() += Gm * Cm.transpose();
            }
          }
          if (xn >= 0) {
            for (int64_t g = 0; g < groups; ++g) {
              ConstMatMap<T> Wm(wd->data() + g * Og * Kg, Og, Kg);
              ConstMatMap<T> Gm(go_n + g * Og * P, Og, P);
              MatMap<T> GC(gcol.data() + g * Kg * P, Kg, P);
              GC.noalias() = Wm.transpose() * Gm;
            }
            auto& gx = tp.grad(xn);
            detail::col2im_acc(gcol.data(), Cin, Ti, Hi, Wi, kt, kh, kw, stride,
                               pad, To, Ho, Wo, gx.data() + n * Cin * Ti * Hi * Wi);
          }
        }
      });
  return y;
}

template <typename T>
TensorT<T> conv3d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                  Stride3 stride, Pad3 pad, int64_t groups = 1) {
  return conv3d(x, w, &bias, stride, pad, groups);
}


// --- fully connected ---

template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1)
    fail_shape("fully_connected: expected x[N,Din], w[Din,Dout], b[Dout]");
  const int64_t N = x.dim(0), Din = x.dim(1), Dout = w.dim(1);
  if (w.dim(0) != Din)
    fail_shape("fully_connected: inner dims disagree, x ", x.shape_str(), " vs w ", w.shape_str());
  if (b.dim(0) != Dout) fail_shape("fully_connected: bias dim ", b.dim(0), " != ", Dout);

  TensorT<T> y({N, Dout});
  ConstMatMap<T> Xm(x.ptr(), N, Din);
  ConstMatMap<T> Wm(w.ptr(), Din, Dout);
  MatMap<T> Ym(y.ptr(), N, Dout);
  Ym.noalias() = Xm * Wm;
  for (int64_t n = 0; n < N; ++n)
    for (int64_t j = 0; j < Dout; ++j) y[n * Dout + j] += b[j];

  TapeT<T>* tape = detail::merge_tapes<T>({&x, &w, &b});
  if (!tape) return y;
  auto xd = x.data, wd = w.data;
  const int xn = x.node, wn = w.node, bn = b.node;
  std::vector<int> parents;
  for (int p : {xn, wn, bn})
    if (p >= 0) parents.push_back(p);
  y.tape = tape;
  y.node = tape->record(parents, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    ConstMatMap<T> Gm(gout.data(), N, Dout);
    if (xn >= 0) {
      ConstMatMap<T> Wm2(wd->data(), Din, Dout);
      MatMap<T> GX(tp.grad(xn).data(), N, Din);
      GX.noalias() += Gm * Wm2.transpose();
    }
    if (wn >= 0) {
      ConstMatMap<T> Xm2(xd->data(), N, Din);
      MatMap<T> GW(tp.grad(wn).data(), Din, Dout);
      GW.noalias() += Xm2.transpose() * Gm;
    }
    if (bn >= 0) {
      auto& gb = tp.grad(bn);
      for (int64_t n = 0; n < N; ++n)
        for (int64_t j = 0; j < Dout; ++j) gb[static_cast<size_t>(j)] += gout[n * Dout + j];
    }
  });
  return y;
}

// --- batch normalization ---

template <typename T>
struct BatchNormState {
  TensorT<T> running_mean;
  TensorT<T> running_var;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);
};

// Normalizes over all axes except axis 1 (channels) for >=2D tensors.
// Train mode uses batch statistics and updates running stats in place;
// eval mode uses running statistics only.
template <typename T>
TensorT<T> batch_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      BatchNormState<T>& state, Mode mode) {
  if (x.ndim() < 2) fail_shape("batch_norm: input must have a channel axis");
  const int64_t N = x.dim(0), C = x.dim(1);
  int64_t inner = 1;
  for (size_t i = 2; i < x.ndim(); ++i) inner *= x.dim(i);
  if (gamma.numel() != C || beta.numel() != C || state.running_mean.numel() != C ||
      state.running_var.numel() != C)
    fail_shape("batch_norm: stats dimension must match channel dim ", C);
  if (mode == Mode::Train && N == 0) fail_shape("batch_norm: zero-size batch in train mode");

  const int64_t M = N * inner;  // samples per channel
  std::vector<T> mean(static_cast<size_t>(C)), var(static_cast<size_t>(C));
  if (mode == Mode::Train) {
    for (int64_t c = 0; c < C; ++c) {
      double acc = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* p = x.ptr() + (n * C + c) * inner;
        for (int64_t i = 0; i < inner; ++i) acc += p[i];
      }
      mean[static_cast<size_t>(c)] = static_cast<T>(acc / static_cast<double>(M));
      double vacc = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* p = x.ptr() + (n * C + c) * inner;
        for (int64_t i = 0; i < inner; ++i) {
          const double d = static_cast<double>(p[i]) - mean[static_cast<size_t>(c)];
          vacc += d * d;
        }
      }
      var[static_cast<size_t>(c)] = static_cast<T>(vacc / static_cast<double>(M));
    }
    for (int64_t c = 0; c < C; ++c) {
      state.running_mean[c] = (T(1) - state.momentum) * state.running_mean[c] +
                              state.momentum * mean[static_cast<size_t>(c)];
      state.running_var[c] = (T(1) - state.momentum) * state.running_var[c] +
                             state.momentum * var[static_cast<size_t>(c)];
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mean[static_cast<size_t>(c)] = state.running_mean[c];
      var[static_cast<size_t>(c)] = state.running_var[c];
    }
  }

  TensorT<T> y(x.shape);
  std::vector<T> inv_std(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c)
    inv_std[static_cast<size_t>(c)] =
        T(1) / std::sqrt(var[static_cast<size_t>(c)] + state.eps);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const T* p = x.ptr() + (n * C + c) * inner;
      T* q = y.ptr() + (n * C + c) * inner;
      const T m = mean[static_cast<size_t>(c)], is = inv_std[static_cast<size_t>(c)];
      const T g = gamma[c], bb = beta[c];
      for (int64_t i = 0; i < inner; ++i) q[i] = (p[i] - m) * is * g + bb;
    }

  TapeT<T>* tape = detail::merge_tapes<T>({&x, &gamma, &beta});
  if (!tape) return y;
  auto xd = x.data;
  auto gd = gamma.data;
  const int xn = x.node, gn = gamma.node, bn = beta.node;
  const bool train = mode == Mode::Train;
  std::vector<int> parents;
  for (int p : {xn, gn, bn})
    if (p >= 0) parents.push_back(p);
  y.tape = tape;
  y.node = tape->record(parents, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    for (int64_t c = 0; c < C; ++c) {
      const T m = mean[static_cast<size_t>(c)], is = inv_std[static_cast<size_t>(c)];
      const T g = (*gd)[static_cast<size_t>(c)];
      // Accumulate per-channel sums of gout and gout * xhat.
      double sg = 0, sgx = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* go = gout.data() + (n * C + c) * inner;
        const T* p = xd->data() + (n * C + c) * inner;
        for (int64_t i = 0; i < inner; ++i) {
          sg += go[i];
          sgx += go[i] * static_cast<double>((p[i] - m) * is);
        }
      }
      if (gn >= 0) tp.grad(gn)[static_cast<size_t>(c)] += static_cast<T>(sgx);
      if (bn >= 0) tp.grad(bn)[static_cast<size_t>(c)] += static_cast<T>(sg);
      if (xn >= 0) {
        auto& gx = tp.grad(xn);
        if (train) {
          const double invM = 1.0 / static_cast<double>(M);
          for (int64_t n = 0; n < N; ++n) {
            const T* go = gout.data() + (n * C + c) * inner;
            const T* p = xd->data() + (n * C + c) * inner;
            T* gq = gx.data() + (n * C + c) * inner;
            for (int64_t i = 0; i < inner; ++i) {
              const double xhat = (p[i] - m) * is;
              gq[i] += static_cast<T>(g * is * (go[i] - invM * sg - xhat * invM * sgx));
            }
          }
        } else {
          for (int64_t n = 0; n < N; ++n) {
            const T* go = gout.data() + (n * C + c) * inner;
            T* gq = gx.data() + (n * C + c) * inner;
            for (int64_t i = 0; i < inner; ++i) gq[i] += g * is * go[i];
          }
        }
      }
    }
  });
  return y;
}

// --- elementwise activations ---

enum class Elementwise { Relu, Tanh, PhiClamp };

// phi_clamp(x) = max(tanh(x), 0), range [0, 1); subgradient at 0 is 0. tanh
// rounds to 1 for large arguments, so the top of the range is pinned to the
// largest representable value below 1 to keep the interval half-open.
template <typename T>
TensorT<T> elementwise(Elementwise kind, const TensorT<T>& x) {
  const T below_one = std::nextafter(T(1), T(0));
  TensorT<T> y(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) {
    const T v = x[i];
    switch (kind) {
      case Elementwise::Relu: y[i] = v > T(0) ? v : T(0); break;
      case Elementwise::Tanh: y[i] = std::tanh(v); break;
      case Elementwise::PhiClamp:
        y[i] = v > T(0) ? std::min(std::tanh(v), below_one) : T(0);
        break;
    }
  }
  if (x.node < 0) return y;
  auto xd = x.data;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (size_t i = 0; i < gout.size(); ++i) {
      const T v = (*xd)[i];
      T d = T(0);
      switch (kind) {
        case Elementwise::Relu: d = v > T(0) ? T(1) : T(0); break;
        case Elementwise::Tanh: {
          const T t = std::tanh(v);
          d = T(1) - t * t;
          break;
        }
        case Elementwise::PhiClamp: {
          if (v > T(0)) {
            const T t = std::tanh(v);
            d = T(1) - t * t;
          }
          break;
        }
      }
      gx[i] += d * gout[i];
    }
  });
  return y;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) { return elementwise(Elementwise::Relu, x); }
template <typename T>
TensorT<T> tanh_op(const TensorT<T>& x) { return elementwise(Elementwise::Tanh, x); }
template <typename T>
TensorT<T> phi_clamp(const TensorT<T>& x) { return elementwise(Elementwise::PhiClamp, x); }

// --- pooling ---

// Mean over H and W only; output [N, C*T] with channel-major flattening
// (index c*T + t), the gate input layout.
template <typename T>
TensorT<T> global_spatial_pool(const TensorT<T>& x) {
  if (x.ndim() != 5) fail_shape("global_spatial_pool: input must be 5D, got ", x.shape_str());
  const int64_t N = x.dim(0), C = x.dim(1), Ti = x.dim(2), HW = x.dim(3) * x.dim(4);
  TensorT<T> y({N, C * Ti});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t t = 0; t < Ti; ++t) {
        const T* p = x.ptr() + ((n * C + c) * Ti + t) * HW;
        double acc = 0;
        for (int64_t i = 0; i < HW; ++i) acc += p[i];
        y[n * C * Ti + c * Ti + t] = static_cast<T>(acc / static_cast<double>(HW));
      }
  if (x.node < 0) return y;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    const T scale = T(1) / static_cast<T>(HW);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t t = 0; t < Ti; ++t) {
          const T g = gout[n * C * Ti + c * Ti + t] * scale;
          T* q = gx.data() + ((n * C + c) * Ti + t) * HW;
          for (int64_t i = 0; i < HW; ++i) q[i] += g;
        }
  });
  return y;
}

// Mean over T, H and W; output [N, C]. Classification head pooling.
template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  if (x.ndim() != 5) fail_shape("global_avg_pool: input must be 5D, got ", x.shape_str());
  const int64_t N = x.dim(0), C = x.dim(1), inner = x.dim(2) * x.dim(3) * x.dim(4);
  TensorT<T> y({N, C});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const T* p = x.ptr() + (n * C + c) * inner;
      double acc = 0;
      for (int64_t i = 0; i < inner; ++i) acc += p[i];
      y[n * C + c] = static_cast<T>(acc / static_cast<double>(inner));
    }
  if (x.node < 0) return y;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    const T scale = T(1) / static_cast<T>(inner);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c) {
        const T g = gout[n * C + c] * scale;
        T* q = gx.data() + (n * C + c) * inner;
        for (int64_t i = 0; i < inner; ++i) q[i] += g;
      }
  });
  return y;
}

// --- loss ---

// Mean negative log-softmax of the true class, max-stabilized.
template <typename T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) fail_shape("softmax_cross_entropy: logits must be [N,K]");
  const int64_t N = logits.dim(0), K = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != N)
    fail_shape("softmax_cross_entropy: ", labels.size(), " labels for batch ", N);
  for (int v : labels)
    if (v < 0 || v >= K) fail_shape("softmax_cross_entropy: label ", v, " out of range [0,", K, ")");

  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(N * K));
  double loss = 0;
  for (int64_t n = 0; n < N; ++n) {
    const T* p = logits.ptr() + n * K;
    T mx = p[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, p[k]);
    double z = 0;
    for (int64_t k = 0; k < K; ++k) z += std::exp(static_cast<double>(p[k] - mx));
    for (int64_t k = 0; k < K; ++k)
      (*probs)[static_cast<size_t>(n * K + k)] =
          static_cast<T>(std::exp(static_cast<double>(p[k] - mx)) / z);
    loss -= std::log(static_cast<double>((*probs)[static_cast<size_t>(n * K + labels[static_cast<size_t>(n)])]));
  }
  TensorT<T> y({1}, static_cast<T>(loss / static_cast<double>(N)));
  if (logits.node < 0) return y;
  const int xn = logits.node;
  y.tape = logits.tape;
  y.node = logits.tape->record({xn}, 1, [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    const T g = gout[0] / static_cast<T>(N);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t k = 0; k < K; ++k) {
        T d = (*probs)[static_cast<size_t>(n * K + k)];
        if (k == labels[static_cast<size_t>(n)]) d -= T(1);
        gx[static_cast<size_t>(n * K + k)] += g * d;
      }
  });
  return y;
}

// --- structural ops ---

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) fail_shape("add: shape mismatch ", a.shape_str(), " vs ", b.shape_str());
  TensorT<T> y(a.shape);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = a[i] + b[i];
  TapeT<T>* tape = detail::merge_tapes<T>({&a, &b});
  if (!tape) return y;
  const int an = a.node, bn = b.node;
  std::vector<int> parents;
  for (int p : {an, bn})
    if (p >= 0) parents.push_back(p);
  y.tape = tape;
  y.node = tape->record(parents, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    if (an >= 0) {
      auto& g = tp.grad(an);
      for (size_t i = 0; i < gout.size(); ++i) g[i] += gout[i];
    }
    if (bn >= 0) {
      auto& g = tp.grad(bn);
      for (size_t i = 0; i < gout.size(); ++i) g[i] += gout[i];
    }
  });
  return y;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  TensorT<T> y(a.shape);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = a[i] * s;
  if (a.node < 0) return y;
  const int an = a.node;
  y.tape = a.tape;
  y.node = a.tape->record({an}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& g = tp.grad(an);
    for (size_t i = 0; i < gout.size(); ++i) g[i] += s * gout[i];
  });
  return y;
}

// y = a + s * b
template <typename T>
TensorT<T> add_scaled(const TensorT<T>& a, const TensorT<T>& b, T s) {
  return add(a, scale(b, s));
}

// Same data, new shape (sizes must agree).
template <typename T>
TensorT<T> reshape(const TensorT<T>& x, std::vector<int64_t> shape) {
  TensorT<T> y(std::move(shape));
  if (y.numel() != x.numel())
    fail_shape("reshape: cannot view ", x.shape_str(), " as ", y.shape_str());
  std::copy(x.ptr(), x.ptr() + x.numel(), y.ptr());
  if (x.node < 0) return y;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (size_t i = 0; i < gout.size(); ++i) gx[i] += gout[i];
  });
  return y;
}

// Per-channel spatial convolution, one [kh, kw] kernel per channel, stride 1,
// "same" padding. The cheap-op workhorse. w layout [C, kh, kw].
template <typename T>
TensorT<T> depthwise_spatial(const TensorT<T>& x, const TensorT<T>& w) {
  if (x.ndim() != 5) fail_shape("depthwise_spatial: input must be 5D, got ", x.shape_str());
  if (w.ndim() != 3 || w.dim(0) != x.dim(1))
    fail_shape("depthwise_spatial: weight must be [C,kh,kw] with C=", x.dim(1),
               ", got ", w.shape_str());
  const int64_t C = x.dim(1), kh = w.dim(1), kw = w.dim(2);
  TensorT<T> w5 = reshape(w, {C, 1, 1, kh, kw});
  return conv3d<T>(x, w5, nullptr, Stride3{1, 1, 1}, Pad3{0, kh / 2, kw / 2}, C);
}

// Slice along an axis: out = x[..., start:start+len, ...].
template <typename T>
TensorT<T> slice(const TensorT<T>& x, size_t axis, int64_t start, int64_t len) {
  if (axis >= x.ndim()) fail_shape("slice: axis ", axis, " out of range for ", x.shape_str());
  if (start < 0 || len < 1 || start + len > x.dim(axis))
    fail_shape("slice: [", start, ",", start + len, ") out of range for axis ", axis,
               " of ", x.shape_str());
  std::vector<int64_t> oshape = x.shape;
  oshape[axis] = len;
  int64_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  const int64_t A = x.dim(axis);
  TensorT<T> y(oshape);
  for (int64_t o = 0; o < outer; ++o)
    std::copy(x.ptr() + (o * A + start) * inner, x.ptr() + (o * A + start + len) * inner,
              y.ptr() + o * len * inner);
  if (x.node < 0) return y;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (int64_t o = 0; o < outer; ++o) {
      const T* src = gout.data() + o * len * inner;
      T* dst = gx.data() + (o * A + start) * inner;
      for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
  return y;
}

// Concatenate along an axis.
template <typename T>
TensorT<T> concat(const std::vector<TensorT<T>>& xs, size_t axis) {
  if (xs.empty()) fail_shape("concat: empty input list");
  const auto& first = xs.front();
  if (axis >= first.ndim()) fail_shape("concat: axis out of range");
  int64_t total = 0;
  for (const auto& x : xs) {
    if (x.ndim() != first.ndim()) fail_shape("concat: rank mismatch");
    for (size_t i = 0; i < first.ndim(); ++i)
      if (i != axis && x.dim(i) != first.dim(i))
        fail_shape("concat: shape mismatch ", x.shape_str(), " vs ", first.shape_str());
    total += x.dim(axis);
  }
  std::vector<int64_t> oshape = first.shape;
  oshape[axis] = total;
  int64_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= first.dim(i);
  for (size_t i = axis + 1; i < first.ndim(); ++i) inner *= first.dim(i);
  TensorT<T> y(oshape);
  int64_t off = 0;
  for (const auto& x : xs) {
    const int64_t A = x.dim(axis);
    for (int64_t o = 0; o < outer; ++o)
      std::copy(x.ptr() + o * A * inner, x.ptr() + (o + 1) * A * inner,
                y.ptr() + (o * total + off) * inner);
    off += A;
  }
  TapeT<T>* tape = nullptr;
  for (const auto& x : xs)
    if (x.node >= 0) {
      if (tape && tape != x.tape) fail_shape("concat: operands on different tapes");
      tape = x.tape;
    }
  if (!tape) return y;
  std::vector<int> nodes;
  std::vector<int64_t> sizes;
  std::vector<int> parents;
  for (const auto& x : xs) {
    nodes.push_back(x.node);
    sizes.push_back(x.dim(axis));
    if (x.node >= 0) parents.push_back(x.node);
  }
  y.tape = tape;
  y.node = tape->record(parents, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    int64_t o2 = 0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      const int64_t A = sizes[k];
      if (nodes[k] >= 0) {
        auto& gx = tp.grad(nodes[k]);
        for (int64_t o = 0; o < outer; ++o) {
          const T* src = gout.data() + (o * total + o2) * inner;
          T* dst = gx.data() + o * A * inner;
          for (int64_t i = 0; i < A * inner; ++i) dst[i] += src[i];
        }
      }
      o2 += A;
    }
  });
  return y;
}

// Temporal subsampling: out[t] = x[t*step] along axis 2.
template <typename T>
TensorT<T> temporal_subsample(const TensorT<T>& x, int64_t step) {
  if (x.ndim() != 5) fail_shape("temporal_subsample: input must be 5D");
  if (step < 1) fail_shape("temporal_subsample: step must be >= 1");
  const int64_t N = x.dim(0), C = x.dim(1), Ti = x.dim(2), inner = x.dim(3) * x.dim(4);
  if (Ti % step != 0)
    fail_shape("temporal_subsample: T=", Ti, " not divisible by step ", step);
  const int64_t To = Ti / step;
  TensorT<T> y({N, C, To, x.dim(3), x.dim(4)});
  for (int64_t nc = 0; nc < N * C; ++nc)
    for (int64_t t = 0; t < To; ++t)
      std::copy(x.ptr() + (nc * Ti + t * step) * inner, x.ptr() + (nc * Ti + t * step + 1) * inner,
                y.ptr() + (nc * To + t) * inner);
  if (x.node < 0) return y;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (int64_t nc = 0; nc < N * C; ++nc)
      for (int64_t t = 0; t < To; ++t) {
        const T* src = gout.data() + (nc * To + t) * inner;
        T* dst = gx.data() + (nc * Ti + t * step) * inner;
        for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
  });
  return y;
}

// Temporal interleave: parts[j] supplies output frames j, j+R, j+2R, ...
// Inverse of splitting by offset; all parts share shape [N,C,T/R,H,W].
template <typename T>
TensorT<T> temporal_interleave(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) fail_shape("temporal_interleave: empty parts");
  const int64_t R = static_cast<int64_t>(parts.size());
  const auto& p0 = parts.front();
  if (p0.ndim() != 5) fail_shape("temporal_interleave: parts must be 5D");
  for (const auto& p : parts)
    if (!p.same_shape(p0)) fail_shape("temporal_interleave: part shape mismatch");
  const int64_t N = p0.dim(0), C = p0.dim(1), Tp = p0.dim(2), inner = p0.dim(3) * p0.dim(4);
  TensorT<T> y({N, C, Tp * R, p0.dim(3), p0.dim(4)});
  for (int64_t j = 0; j < R; ++j)
    for (int64_t nc = 0; nc < N * C; ++nc)
      for (int64_t t = 0; t < Tp; ++t)
        std::copy(parts[static_cast<size_t>(j)].ptr() + (nc * Tp + t) * inner,
                  parts[static_cast<size_t>(j)].ptr() + (nc * Tp + t + 1) * inner,
                  y.ptr() + (nc * Tp * R + t * R + j) * inner);
  TapeT<T>* tape = nullptr;
  for (const auto& p : parts)
    if (p.node >= 0) {
      if (tape && tape != p.tape) fail_shape("temporal_interleave: parts on different tapes");
      tape = p.tape;
    }
  if (!tape) return y;
  std::vector<int> nodes;
  std::vector<int> parents;
  for (const auto& p : parts) {
    nodes.push_back(p.node);
    if (p.node >= 0) parents.push_back(p.node);
  }
  y.tape = tape;
  y.node = tape->record(parents, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    for (int64_t j = 0; j < R; ++j) {
      if (nodes[static_cast<size_t>(j)] < 0) continue;
      auto& gp = tp.grad(nodes[static_cast<size_t>(j)]);
      for (int64_t nc = 0; nc < N * C; ++nc)
        for (int64_t t = 0; t < Tp; ++t) {
          const T* src = gout.data() + (nc * Tp * R + t * R + j) * inner;
          T* dst = gp.data() + (nc * Tp + t) * inner;
          for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    }
  });
  return y;
}

// Gather along the channel axis: out channel g = x channel src[g].
template <typename T>
TensorT<T> gather_channels(const TensorT<T>& x, const std::vector<int64_t>& src) {
  if (x.ndim() != 5) fail_shape("gather_channels: input must be 5D");
  const int64_t N = x.dim(0), C = x.dim(1);
  int64_t inner = x.dim(2) * x.dim(3) * x.dim(4);
  for (int64_t s : src)
    if (s < 0 || s >= C) fail_shape("gather_channels: source channel ", s, " out of range");
  const int64_t G = static_cast<int64_t>(src.size());
  TensorT<T> y({N, G, x.dim(2), x.dim(3), x.dim(4)});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t g = 0; g < G; ++g)
      std::copy(x.ptr() + (n * C + src[static_cast<size_t>(g)]) * inner,
                x.ptr() + (n * C + src[static_cast<size_t>(g)] + 1) * inner,
                y.ptr() + (n * G + g) * inner);
  if (x.node < 0) return y;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t g = 0; g < G; ++g) {
        const T* s = gout.data() + (n * G + g) * inner;
        T* d = gx.data() + (n * C + src[static_cast<size_t>(g)]) * inner;
        for (int64_t i = 0; i < inner; ++i) d[i] += s[i];
      }
  });
  return y;
}

// Per-item weighted sum of branch tensors: out[n] = sum_s w[n,s] * branch_s[n].
// Differentiable in both the branches and the weights; zero-weight branches
// contribute exactly zero, so restricting to active branches is bit-identical.
template <typename T>
TensorT<T> weighted_sum_per_item(const std::vector<TensorT<T>>& branches, const TensorT<T>& w) {
  if (branches.empty()) fail_shape("weighted_sum_per_item: no branches");
  const auto& b0 = branches.front();
  const int64_t N = b0.dim(0);
  const int64_t S = static_cast<int64_t>(branches.size());
  if (w.ndim() != 2 || w.dim(0) != N || w.dim(1) != S)
    fail_shape("weighted_sum_per_item: weights must be [", N, ",", S, "], got ", w.shape_str());
  int64_t inner = 1;
  for (size_t i = 1; i < b0.ndim(); ++i) inner *= b0.dim(i);
  for (const auto& b : branches)
    if (!b.same_shape(b0)) fail_shape("weighted_sum_per_item: branch shape mismatch");

  TensorT<T> y(b0.shape);
  for (int64_t n = 0; n < N; ++n) {
    T* out = y.ptr() + n * inner;
    for (int64_t s = 0; s < S; ++s) {
      const T c = w[n * S + s];
      if (c == T(0)) continue;
      const T* src = branches[static_cast<size_t>(s)].ptr() + n * inner;
      for (int64_t i = 0; i < inner; ++i) out[i] += c * src[i];
    }
  }
  TapeT<T>* tape = w.node >= 0 ? w.tape : nullptr;
  for (const auto& b : branches)
    if (b.node >= 0) {
      if (tape && tape != b.tape) fail_shape("weighted_sum_per_item: mixed tapes");
      tape = b.tape;
    }
  if (!tape) return y;
  std::vector<int> nodes;
  std::vector<std::shared_ptr<std::vector<T>>> datas;
  std::vector<int> parents;
  for (const auto& b : branches) {
    nodes.push_back(b.node);
    datas.push_back(b.data);
    if (b.node >= 0) parents.push_back(b.node);
  }
  const int wn = w.node;
  auto wd = w.data;
  if (wn >= 0) parents.push_back(wn);
  y.tape = tape;
  y.node = tape->record(parents, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    for (int64_t s = 0; s < S; ++s) {
      const auto& bd = *datas[static_cast<size_t>(s)];
      if (nodes[static_cast<size_t>(s)] >= 0) {
        auto& gb = tp.grad(nodes[static_cast<size_t>(s)]);
        for (int64_t n = 0; n < N; ++n) {
          const T c = (*wd)[static_cast<size_t>(n * S + s)];
          if (c == T(0)) continue;
          const T* go = gout.data() + n * inner;
          T* gp = gb.data() + n * inner;
          for (int64_t i = 0; i < inner; ++i) gp[i] += c * go[i];
        }
      }
      if (wn >= 0) {
        auto& gw = tp.grad(wn);
        for (int64_t n = 0; n < N; ++n) {
          const T* go = gout.data() + n * inner;
          const T* bp = bd.data() + n * inner;
          double acc = 0;
          for (int64_t i = 0; i < inner; ++i) acc += static_cast<double>(go[i]) * bp[i];
          gw[static_cast<size_t>(n * S + s)] += static_cast<T>(acc);
        }
      }
    }
  });
  return y;
}

// Row normalization with degenerate fallback: rows whose sum is zero become
// one-hot on entry 0 (constant, no gradient).
template <typename T>
TensorT<T> normalize_rows_or_fallback(const TensorT<T>& x) {
  if (x.ndim() != 2) fail_shape("normalize_rows_or_fallback: input must be [N,S]");
  const int64_t N = x.dim(0), S = x.dim(1);
  TensorT<T> y(x.shape);
  std::vector<T> sums(static_cast<size_t>(N));
  for (int64_t n = 0; n < N; ++n) {
    T s = 0;
    for (int64_t j = 0; j < S; ++j) s += x[n * S + j];
    sums[static_cast<size_t>(n)] = s;
    if (s == T(0)) {
      y[n * S] = T(1);
    } else {
      for (int64_t j = 0; j < S; ++j) y[n * S + j] = x[n * S + j] / s;
    }
  }
  if (x.node < 0) return y;
  const int xn = x.node;
  auto xd = x.data;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (int64_t n = 0; n < N; ++n) {
      const T s = sums[static_cast<size_t>(n)];
      if (s == T(0)) continue;
      // d(x_j/s)/dx_k = delta_jk/s - x_j/s^2
      double dot = 0;
      for (int64_t j = 0; j < S; ++j)
        dot += static_cast<double>(gout[static_cast<size_t>(n * S + j)]) * (*xd)[static_cast<size_t>(n * S + j)];
      for (int64_t k = 0; k < S; ++k)
        gx[static_cast<size_t>(n * S + k)] +=
            gout[static_cast<size_t>(n * S + k)] / s - static_cast<T>(dot) / (s * s);
    }
  });
  return y;
}

// Degenerate-policy fallback: rows with every entry <= eps become one-hot on
// branch 1 (constant, zero gradient); other rows pass through unchanged.
template <typename T>
TensorT<T> policy_effective(const TensorT<T>& x, T eps) {
  if (x.ndim() != 2) fail_shape("policy_effective: input must be [N,S]");
  const int64_t N = x.dim(0), S = x.dim(1);
  TensorT<T> y(x.shape);
  std::vector<char> fell(static_cast<size_t>(N), 0);
  for (int64_t n = 0; n < N; ++n) {
    bool dead = true;
    for (int64_t j = 0; j < S; ++j)
      if (x[n * S + j] > eps) { dead = false; break; }
    if (dead) {
      fell[static_cast<size_t>(n)] = 1;
      y[n * S] = T(1);
    } else {
      for (int64_t j = 0; j < S; ++j) y[n * S + j] = x[n * S + j];
    }
  }
  if (x.node < 0) return y;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (int64_t n = 0; n < N; ++n) {
      if (fell[static_cast<size_t>(n)]) continue;
      for (int64_t j = 0; j < S; ++j)
        gx[static_cast<size_t>(n * S + j)] += gout[static_cast<size_t>(n * S + j)];
    }
  });
  return y;
}

// Row-wise dot with a constant vector: out[n] = sum_j x[n,j] * c[j].
template <typename T>
TensorT<T> rowwise_dot_const(const TensorT<T>& x, const std::vector<T>& c) {
  if (x.ndim() != 2 || x.dim(1) != static_cast<int64_t>(c.size()))
    fail_shape("rowwise_dot_const: shape mismatch");
  const int64_t N = x.dim(0), S = x.dim(1);
  TensorT<T> y({N});
  for (int64_t n = 0; n < N; ++n) {
    double acc = 0;
    for (int64_t j = 0; j < S; ++j) acc += static_cast<double>(x[n * S + j]) * c[static_cast<size_t>(j)];
    y[n] = static_cast<T>(acc);
  }
  if (x.node < 0) return y;
  const int xn = x.node;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t j = 0; j < S; ++j)
        gx[static_cast<size_t>(n * S + j)] += gout[static_cast<size_t>(n)] * c[static_cast<size_t>(j)];
  });
  return y;
}

template <typename T>
TensorT<T> ew_mul(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) fail_shape("ew_mul: shape mismatch ", a.shape_str(), " vs ", b.shape_str());
  TensorT<T> y(a.shape);
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = a[i] * b[i];
  TapeT<T>* tape = detail::merge_tapes<T>({&a, &b});
  if (!tape) return y;
  const int an = a.node, bn = b.node;
  auto ad = a.data, bd = b.data;
  std::vector<int> parents;
  for (int p : {an, bn})
    if (p >= 0) parents.push_back(p);
  y.tape = tape;
  y.node = tape->record(parents, y.numel(), [=](TapeT<T>& tp, const std::vector<T>& gout) {
    if (an >= 0) {
      auto& g = tp.grad(an);
      for (size_t i = 0; i < gout.size(); ++i) g[i] += gout[i] * (*bd)[i];
    }
    if (bn >= 0) {
      auto& g = tp.grad(bn);
      for (size_t i = 0; i < gout.size(); ++i) g[i] += gout[i] * (*ad)[i];
    }
  });
  return y;
}

// mean_n mask[n] * x[n]^2; the mask is a constant (stop-gradient) factor.
template <typename T>
TensorT<T> masked_sq_mean(const TensorT<T>& x, const std::vector<T>& mask) {
  if (x.ndim() != 1 || x.dim(0) != static_cast<int64_t>(mask.size()))
    fail_shape("masked_sq_mean: shape mismatch");
  const int64_t N = x.dim(0);
  double acc = 0;
  for (int64_t n = 0; n < N; ++n)
    acc += static_cast<double>(mask[static_cast<size_t>(n)]) * x[n] * x[n];
  TensorT<T> y({1}, static_cast<T>(acc / static_cast<double>(N)));
  if (x.node < 0) return y;
  const int xn = x.node;
  auto xd = x.data;
  y.tape = x.tape;
  y.node = x.tape->record({xn}, 1, [=](TapeT<T>& tp, const std::vector<T>& gout) {
    auto& gx = tp.grad(xn);
    for (int64_t n = 0; n < N; ++n)
      gx[static_cast<size_t>(n)] += gout[0] * T(2) * mask[static_cast<size_t>(n)] * (*xd)[static_cast<size_t>(n)] /
                                    static_cast<T>(N);
  });
  return y;
}

}  // namespace vared

#endif  // VARED_NN_HPP_
