// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Dense tensor with reverse-mode automatic differentiation on an explicit
// tape. Float is the working precision; double exists for gradient checks.

#ifndef VARED_TENSOR_HPP_
#define VARED_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vared/common.hpp"

namespace vared {

template <typename T>
class TapeT;

// Value-semantic handle over shared storage. A tensor with node < 0 is a
// plain value; a tensor bound to a tape participates in backward.
template <typename T>
struct TensorT {
  std::vector<int64_t> shape;
  std::shared_ptr<std::vector<T>> data;
  TapeT<T>* tape = nullptr;
  int node = -1;

  TensorT() : data(std::make_shared<std::vector<T>>()) {}

  explicit TensorT(std::vector<int64_t> s) : shape(std::move(s)) {
    data = std::make_shared<std::vector<T>>(checked_numel(shape), T(0));
  }

  TensorT(std::vector<int64_t> s, T fill) : shape(std::move(s)) {
    data = std::make_shared<std::vector<T>>(checked_numel(shape), fill);
  }

  TensorT(std::vector<int64_t> s, std::vector<T> values) : shape(std::move(s)) {
    if (checked_numel(shape) != static_cast<int64_t>(values.size()))
      fail_shape("tensor data size ", values.size(), " does not match shape product ",
                 checked_numel(shape));
    data = std::make_shared<std::vector<T>>(std::move(values));
  }

  static int64_t checked_numel(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d <= 0) fail_shape("tensor dimension must be positive, got ", d);
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data->size()); }
  int64_t dim(size_t i) const { return shape.at(i); }
  size_t ndim() const { return shape.size(); }

  T* ptr() { return data->data(); }
  const T* ptr() const { return data->data(); }
  T& operator[](int64_t i) { return (*data)[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return (*data)[static_cast<size_t>(i)]; }

  T scalar() const {
    if (numel() != 1) fail_shape("scalar() on tensor with ", numel(), " elements");
    return (*data)[0];
  }

  // Detached copy of the value (fresh storage, no tape).
  TensorT detached() const {
    TensorT out;
    out.shape = shape;
    out.data = std::make_shared<std::vector<T>>(*data);
    return out;
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

// Records operations in execution order. Backward replays them exactly once
// in reverse. Single-threaded by contract; independent tapes may run on
// independent threads.
template <typename T>
class TapeT {
 public:
  using BackwardFn = std::function<void(TapeT&, const std::vector<T>&)>;

  int record(std::vector<int> parents, int64_t out_size, BackwardFn fn) {
    Node n;
    n.parents = std::move(parents);
    n.size = out_size;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    grads_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Registers a parameter (leaf) and returns a tape-bound view sharing the
  // parameter's storage.
  TensorT<T> leaf(const TensorT<T>& value, const std::string& name = "") {
    TensorT<T> out;
    out.shape = value.shape;
    out.data = value.data;
    out.tape = this;
    out.node = record({}, value.numel(), nullptr);
    if (!name.empty()) params_.push_back({name, out.node, value.shape, value.data});
    return out;
  }

  std::vector<T>& grad(int node) {
    auto& g = grads_.at(static_cast<size_t>(node));
    if (g.empty()) g.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].size), T(0));
    return g;
  }

  bool has_grad(int node) const { return !grads_.at(static_cast<size_t>(node)).empty(); }

  void backward(const TensorT<T>& loss) {
    if (loss.tape != this || loss.node < 0)
      fail(ErrorKind::Shape, "backward: loss is not recorded on this tape");
    if (loss.numel() != 1) fail_shape("backward: loss must be scalar");
    grad(loss.node).assign(1, T(1));
    for (int i = loss.node; i >= 0; --i) {
      auto& n = nodes_[static_cast<size_t>(i)];
      if (!n.backward) continue;
      auto& g = grads_[static_cast<size_t>(i)];
      if (g.empty()) continue;  // not reachable from loss
      n.backward(*this, g);
    }
  }

  // Gradient of a tape-bound tensor as a plain tensor; exact zeros when the
  // tensor never influenced the loss.
  TensorT<T> grad_tensor(const TensorT<T>& t) {
    if (t.tape != this || t.node < 0)
      fail(ErrorKind::Shape, "grad_tensor: tensor not on this tape");
    TensorT<T> out(t.shape);
    const auto& g = grads_[static_cast<size_t>(t.node)];
    if (!g.empty()) std::copy(g.begin(), g.end(), out.ptr());
    return out;
  }

  struct ParamRef {
    std::string name;
    int node;
    std::vector<int64_t> shape;
    std::shared_ptr<std::vector<T>> storage;
  };
  const std::vector<ParamRef>& params() const { return params_; }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> parents;
    int64_t size = 0;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<T>> grads_;
  std::vector<ParamRef> params_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

// --- construction helpers ---

template <typename T>
TensorT<T> full(std::vector<int64_t> shape, T v) {
  return TensorT<T>(std::move(shape), v);
}

template <typename T>
TensorT<T> randn(std::vector<int64_t> shape, std::mt19937& gen, T stddev = T(1)) {
  TensorT<T> out(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(dist(gen)) * stddev;
  return out;
}

template <typename T>
TensorT<T> uniform(std::vector<int64_t> shape, std::mt19937& gen, T lo, T hi) {
  TensorT<T> out(std::move(shape));
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(dist(gen));
  return out;
}

// He fan-in normal init for conv / fc weights.
template <typename T>
TensorT<T> he_init(std::vector<int64_t> shape, int64_t fan_in, std::mt19937& gen) {
  return randn<T>(std::move(shape), gen, static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in))));
}

template <typename To, typename From>
TensorT<To> cast(const TensorT<From>& t) {
  TensorT<To> out(t.shape);
  for (int64_t i = 0; i < t.numel(); ++i) out[i] = static_cast<To>(t[i]);
  return out;
}

}  // namespace vared

#endif  // VARED_TENSOR_HPP_
