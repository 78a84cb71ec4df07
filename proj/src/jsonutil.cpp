// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#include "vared/jsonutil.hpp"

#include <fstream>
#include <sstream>

namespace vared {

Json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot open '", path, "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Config, "'", path, "': ", e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open '", path, "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.flush();
  if (!f) fail(ErrorKind::Io, "write failed for '", path, "'");
}

}  // namespace vared
