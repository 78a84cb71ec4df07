// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Named parameter storage and the VRCK checkpoint container:
//   "VRCK" | u32 version | u64 header_len | JSON header | f32 LE blobs
// The header lists parameter names, shapes, dtypes and byte offsets into the
// blob section, in blob order, plus a free-form "meta" object.

#ifndef VARED_CHECKPOINT_HPP_
#define VARED_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vared/tensor.hpp"

namespace vared {

using Json = nlohmann::ordered_json;

// Ordered name -> tensor registry. Insertion order defines checkpoint layout.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    if (index_.count(name)) fail(ErrorKind::Config, "duplicate parameter name '", name, "'");
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::Config, "unknown parameter '", name, "'");
    return items_[it->second].second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::Config, "unknown parameter '", name, "'");
    return items_[it->second].second;
  }

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  size_t size() const { return items_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, size_t> index_;
};

struct Checkpoint {
  ParamStore params;
  Json meta;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ParamStore& params, const Json& meta);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vared

#endif  // VARED_CHECKPOINT_HPP_
