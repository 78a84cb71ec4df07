// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#include "vared/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace vared {

namespace {

void write_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& f, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  f.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    fail(ErrorKind::Io, "checkpoint '", path, "': truncated while reading header fields");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::ifstream& f, const std::string& path) {
  unsigned char b[8];
  if (!f.read(reinterpret_cast<char*>(b), 8))
    fail(ErrorKind::Io, "checkpoint '", path, "': truncated while reading header fields");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params, const Json& meta) {
  Json header;
  Json plist = Json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : params.items()) {
    Json p;
    p["name"] = name;
    p["shape"] = t.shape;
    p["dtype"] = "f32";
    p["offset"] = offset;
    plist.push_back(std::move(p));
    offset += static_cast<uint64_t>(t.numel()) * 4;
  }
  header["params"] = std::move(plist);
  header["meta"] = meta;
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open '", path, "' for writing");
  f.write("VRCK", 4);
  write_u32(f, kCheckpointVersion);
  write_u64(f, hs.size());
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  static_assert(sizeof(float) == 4);
  for (const auto& [name, t] : params.items())
    f.write(reinterpret_cast<const char*>(t.ptr()), t.numel() * 4);
  f.flush();
  if (!f) fail(ErrorKind::Io, "write failed for '", path, "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open checkpoint '", path, "'");
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "VRCK", 4) != 0)
    fail(ErrorKind::Io, "'", path, "' is not a VRCK checkpoint (bad magic)");
  const uint32_t version = read_u32(f, path);
  if (version != kCheckpointVersion)
    fail(ErrorKind::Io, "checkpoint '", path, "' has unsupported version ", version);
  const uint64_t hlen = read_u64(f, path);
  std::string hs(hlen, '\0');
  if (!f.read(hs.data(), static_cast<std::streamsize>(hlen)))
    fail(ErrorKind::Io, "checkpoint '", path, "': truncated header");
  Json header;
  try {
    header = Json::parse(hs);
  } catch (const std::exception& e) {
    fail(ErrorKind::Io, "checkpoint '", path, "': corrupt header JSON: ", e.what());
  }

  Checkpoint out;
  if (header.contains("meta")) out.meta = header["meta"];
  for (const auto& p : header.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    const std::string dtype = p.at("dtype").get<std::string>();
    if (dtype != "f32")
      fail(ErrorKind::Io, "checkpoint '", path, "': unsupported dtype '", dtype, "'");
    std::vector<int64_t> shape = p.at("shape").get<std::vector<int64_t>>();
    Tensor t(shape);
    if (!f.read(reinterpret_cast<char*>(t.ptr()), t.numel() * 4))
      fail(ErrorKind::Io, "checkpoint '", path, "': truncated blob for '", name, "' (expected ",
           t.numel() * 4, " bytes at offset ", p.at("offset").get<uint64_t>(), ")");
    out.params.add(name, std::move(t));
  }
  return out;
}

}  // namespace vared
