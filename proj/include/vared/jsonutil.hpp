// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Strict JSON helpers: configs must declare every key they use.

#ifndef VARED_JSONUTIL_HPP_
#define VARED_JSONUTIL_HPP_

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "vared/common.hpp"

namespace vared {

using Json = nlohmann::ordered_json;

inline void expect_object(const Json& j, const std::string& ctx) {
  if (!j.is_object()) fail(ErrorKind::Config, ctx, ": expected a JSON object");
}

// Rejects keys outside the allowed set.
inline void expect_keys(const Json& j, const std::string& ctx,
                        std::initializer_list<const char*> allowed) {
  expect_object(j, ctx);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) fail(ErrorKind::Config, ctx, ": unknown key '", key, "'");
  }
}

template <typename T>
T require(const Json& j, const std::string& ctx, const std::string& key) {
  if (!j.contains(key)) fail(ErrorKind::Config, ctx, ": missing required key '", key, "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, ctx, ": key '", key, "' has wrong type: ", e.what());
  }
}

template <typename T>
T optional(const Json& j, const std::string& ctx, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, ctx, ": key '", key, "' has wrong type: ", e.what());
  }
}

inline void require_config_version(const Json& j, const std::string& ctx) {
  const int v = require<int>(j, ctx, "config_version");
  if (v != 1) fail(ErrorKind::Config, ctx, ": unsupported config_version ", v);
}

Json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace vared

#endif  // VARED_JSONUTIL_HPP_
