// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "vared/checkpoint.hpp"

using namespace vared;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::path("ckpt_test_scratch") / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string file(const std::string& n) const { return (dir / n).string(); }
};

}  // namespace

TEST_CASE("ParamStore keeps insertion order and rejects duplicates") {
  ParamStore ps;
  ps.add("conv.w", Tensor({2, 3}, 1.0f));
  ps.add("conv.b", Tensor({2}, 2.0f));
  ps.add("head.w", Tensor({4}, 3.0f));
  REQUIRE(ps.size() == 3);
  CHECK(ps.items()[0].first == "conv.w");
  CHECK(ps.items()[1].first == "conv.b");
  CHECK(ps.items()[2].first == "head.w");
  CHECK(ps.contains("head.w"));
  CHECK(!ps.contains("head.b"));
  CHECK(ps.at("conv.b")[0] == 2.0f);
  CHECK_THROWS_AS(ps.add("conv.w", Tensor({1})), Error);
  try {
    ps.at("nope");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("checkpoints round trip bitwise with meta intact") {
  Scratch s("rt");
  std::mt19937 gen(7);
  ParamStore ps;
  ps.add("a", randn<float>({3, 4}, gen));
  ps.add("b", randn<float>({2, 2, 2}, gen));
  ps.add("scalarish", Tensor({1}, -0.5f));
  Json meta;
  meta["arch"] = "toy3d";
  meta["epoch"] = 12;
  save_checkpoint(s.file("m.vrck"), ps, meta);

  Checkpoint ck = load_checkpoint(s.file("m.vrck"));
  REQUIRE(ck.params.size() == 3);
  CHECK(ck.params.items()[0].first == "a");
  CHECK(ck.params.items()[1].first == "b");
  CHECK(ck.params.items()[2].first == "scalarish");
  for (const auto& [name, t] : ps.items()) {
    const Tensor& back = ck.params.at(name);
    REQUIRE(back.shape == t.shape);
    for (int64_t i = 0; i < t.numel(); ++i) REQUIRE(back[i] == t[i]);
  }
  CHECK(ck.meta["arch"] == "toy3d");
  CHECK(ck.meta["epoch"] == 12);
}

TEST_CASE("same params serialize to identical bytes") {
  Scratch s("det");
  std::mt19937 gen(9);
  ParamStore ps;
  ps.add("w", randn<float>({5, 5}, gen));
  Json meta;
  meta["k"] = 1;
  save_checkpoint(s.file("x1.vrck"), ps, meta);
  save_checkpoint(s.file("x2.vrck"), ps, meta);
  std::ifstream f1(s.file("x1.vrck"), std::ios::binary);
  std::ifstream f2(s.file("x2.vrck"), std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(b1.size() > 16 + 25 * 4);
}

TEST_CASE("loader rejects malformed checkpoints with Io errors") {
  Scratch s("bad");
  auto kind_of_load = [](const std::string& p) {
    try {
      load_checkpoint(p);
    } catch (const Error& e) {
      return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Numeric;
  };

  CHECK(kind_of_load(s.file("missing.vrck")) == ErrorKind::Io);

  {
    std::ofstream f(s.file("magic.vrck"), std::ios::binary);
    f.write("JUNKJUNKJUNKJUNK", 16);
  }
  CHECK(kind_of_load(s.file("magic.vrck")) == ErrorKind::Io);

  {
    std::ofstream f(s.file("version.vrck"), std::ios::binary);
    f.write("VRCK\x07\x00\x00\x00", 8);
  }
  CHECK(kind_of_load(s.file("version.vrck")) == ErrorKind::Io);

  {
    std::ofstream f(s.file("hdr.vrck"), std::ios::binary);
    f.write("VRCK\x01\x00\x00\x00", 8);
    const unsigned char len[8] = {100, 0, 0, 0, 0, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(len), 8);
    f.write("{\"params\":[]}", 13);  // shorter than the declared 100
  }
  CHECK(kind_of_load(s.file("hdr.vrck")) == ErrorKind::Io);

  {
    std::ofstream f(s.file("json.vrck"), std::ios::binary);
    f.write("VRCK\x01\x00\x00\x00", 8);
    const unsigned char len[8] = {7, 0, 0, 0, 0, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(len), 8);
    f.write("not{json", 7);
  }
  CHECK(kind_of_load(s.file("json.vrck")) == ErrorKind::Io);

  // Valid header that promises more blob bytes than the file holds.
  {
    ParamStore ps;
    ps.add("w", Tensor({4, 4}, 1.0f));
    save_checkpoint(s.file("trunc.vrck"), ps, Json::object());
    const auto full = fs::file_size(s.file("trunc.vrck"));
    fs::resize_file(s.file("trunc.vrck"), full - 8);
  }
  try {
    load_checkpoint(s.file("trunc.vrck"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(std::string(e.what()).find("truncated blob for 'w'") != std::string::npos);
  }
}
