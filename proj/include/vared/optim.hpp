// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef VARED_OPTIM_HPP_
#define VARED_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "vared/tensor.hpp"

namespace vared {

// SGD with Nesterov momentum. A fresh tape is built per batch, so momentum
// buffers are keyed by parameter name and parameter storage is shared between
// tape leaves and the model's store. An optional predicate freezes parameters.
template <typename T>
class SgdT {
 public:
  explicit SgdT(T lr, T momentum = static_cast<T>(0.9), T weight_decay = T(0))
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }

  void step(TapeT<T>& tape,
            const std::function<bool(const std::string&)>& trainable = nullptr) {
    for (const auto& p : tape.params()) {
      if (trainable && !trainable(p.name)) continue;
      if (!tape.has_grad(p.node)) continue;  // parameter unused by this batch
      auto& storage = *p.storage;
      auto& v = velocity_[p.name];
      if (v.size() != storage.size()) v.assign(storage.size(), T(0));
      const std::vector<T>& g = tape.grad(p.node);
      for (size_t k = 0; k < storage.size(); ++k) {
        const T gk = g[k] + weight_decay_ * storage[k];
        v[k] = momentum_ * v[k] + gk;
        storage[k] -= lr_ * (gk + momentum_ * v[k]);  // Nesterov lookahead
      }
    }
  }

 private:
  T lr_, momentum_, weight_decay_;
  std::unordered_map<std::string, std::vector<T>> velocity_;
};

using Sgd = SgdT<float>;

// Cosine decay from base_lr to 0 over total_epochs, with an optional linear
// warmup over the first warmup_epochs.
inline double cosine_lr(double base_lr, int epoch, int total_epochs, int warmup_epochs = 0) {
  if (total_epochs <= 0) return base_lr;
  if (warmup_epochs > 0 && epoch < warmup_epochs)
    return base_lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
  const int e = epoch - warmup_epochs;
  const int span = total_epochs - warmup_epochs;
  if (span <= 0) return base_lr;
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * static_cast<double>(e) /
                                         static_cast<double>(span)));
}

}  // namespace vared

#endif  // VARED_OPTIM_HPP_
