// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "vared/data.hpp"
#include "vared/jsonutil.hpp"

using namespace vared;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::path("data_test_scratch") / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string file(const std::string& n) const { return (dir / n).string(); }
};

Json base_config() {
  Json j;
  j["config_version"] = 1;
  j["classes"] = Json::array();
  Json c0;
  c0["name"] = "still";
  c0["motion_level"] = 0.0;
  c0["texture_complexity"] = 0.5;
  j["classes"].push_back(c0);
  Json c1;
  c1["name"] = "mover";
  c1["motion_level"] = 1.0;
  c1["texture_complexity"] = 0.5;
  j["classes"].push_back(c1);
  j["clips_per_class"] = 3;
  j["dims"] = {2, 4, 8, 8};
  j["noise_std"] = 0.0;
  j["seed"] = 5;
  return j;
}

ErrorKind kind_of_config(const Json& j) {
  try {
    synth_config_from_json(j);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Numeric;
}

}  // namespace

TEST_CASE("synth config parsing is strict") {
  SynthConfig cfg = synth_config_from_json(base_config());
  CHECK(cfg.classes.size() == 2);
  CHECK(cfg.classes[1].motion_level == 1.0);
  CHECK(cfg.clips_per_class == 3);
  CHECK(cfg.h == 8);
  CHECK(cfg.seed == 5);

  Json j = base_config();
  j["surprise"] = 1;
  CHECK(kind_of_config(j) == ErrorKind::Config);

  j = base_config();
  j["config_version"] = 2;
  CHECK(kind_of_config(j) == ErrorKind::Config);

  j = base_config();
  j.erase("classes");
  CHECK(kind_of_config(j) == ErrorKind::Config);

  j = base_config();
  j["classes"][0]["motion_level"] = 1.5;
  CHECK(kind_of_config(j) == ErrorKind::Config);

  j = base_config();
  j["classes"][0]["speed"] = 3;
  CHECK(kind_of_config(j) == ErrorKind::Config);

  j = base_config();
  j["dims"] = {2, 4, 8};
  CHECK(kind_of_config(j) == ErrorKind::Config);

  j = base_config();
  j["dims"] = {9, 4, 8, 8};  // C > 8
  CHECK(kind_of_config(j) == ErrorKind::Config);

  j = base_config();
  j["clips_per_class"] = 0;
  CHECK(kind_of_config(j) == ErrorKind::Config);

  j = base_config();
  j["noise_std"] = -0.1;
  CHECK(kind_of_config(j) == ErrorKind::Config);
}

TEST_CASE("generation is deterministic and well-formed") {
  SynthConfig cfg = synth_config_from_json(base_config());
  Dataset a = synth_generate(cfg);
  Dataset b = synth_generate(cfg);
  REQUIRE(a.clips.size() == 6);
  CHECK(a.class_names == std::vector<std::string>{"still", "mover"});
  CHECK(a.dims == std::vector<int64_t>{2, 4, 8, 8});
  for (size_t i = 0; i < a.clips.size(); ++i) {
    REQUIRE(a.clips[i].data.numel() == b.clips[i].data.numel());
    for (int64_t k = 0; k < a.clips[i].data.numel(); ++k)
      REQUIRE(a.clips[i].data[k] == b.clips[i].data[k]);
  }
  CHECK(a.clips[0].label == 0);
  CHECK(a.clips[3].label == 1);
  CHECK(a.clips[0].clip_id == "still_0000");
  CHECK(a.clips[5].clip_id == "mover_0002");
  for (const auto& clip : a.clips)
    for (int64_t k = 0; k < clip.data.numel(); ++k) {
      REQUIRE(clip.data[k] >= 0.0f);
      REQUIRE(clip.data[k] <= 1.0f);
    }
}

TEST_CASE("zero motion and zero noise give identical frames; motion moves") {
  SynthConfig cfg = synth_config_from_json(base_config());
  Dataset ds = synth_generate(cfg);
  const int64_t C = 2, T = 4, hw = 64;
  auto frames_differ = [&](const Tensor& clip) {
    for (int64_t c = 0; c < C; ++c)
      for (int64_t t = 1; t < T; ++t)
        for (int64_t i = 0; i < hw; ++i)
          if (clip[(c * T + t) * hw + i] != clip[(c * T) * hw + i]) return true;
    return false;
  };
  for (int k = 0; k < 3; ++k) CHECK(!frames_differ(ds.clips[static_cast<size_t>(k)].data));
  int moving = 0;
  for (int k = 3; k < 6; ++k) moving += frames_differ(ds.clips[static_cast<size_t>(k)].data);
  CHECK(moving == 3);
}

TEST_CASE("clip files round trip bitwise") {
  Scratch s("clip_rt");
  std::mt19937 gen(3);
  Tensor clip = randn<float>({2, 3, 5, 6}, gen);
  save_clip(s.file("a.vred"), clip);
  Tensor back = load_clip(s.file("a.vred"));
  REQUIRE(back.shape == clip.shape);
  for (int64_t i = 0; i < clip.numel(); ++i) REQUIRE(back[i] == clip[i]);

  CHECK_THROWS_AS(save_clip(s.file("bad.vred"), Tensor({2, 3})), Error);
}

TEST_CASE("clip loader rejects malformed files with Io errors") {
  Scratch s("clip_bad");
  auto kind_of_load = [](const std::string& p) {
    try {
      load_clip(p);
    } catch (const Error& e) {
      return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Numeric;
  };

  CHECK(kind_of_load(s.file("missing.vred")) == ErrorKind::Io);

  {
    std::ofstream f(s.file("magic.vred"), std::ios::binary);
    f.write("NOPE\x01\x00\x00\x00", 8);
  }
  CHECK(kind_of_load(s.file("magic.vred")) == ErrorKind::Io);

  {
    std::ofstream f(s.file("version.vred"), std::ios::binary);
    f.write("VRED\x09\x00\x00\x00", 8);
    const char dims[16] = {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
    f.write(dims, 16);
  }
  CHECK(kind_of_load(s.file("version.vred")) == ErrorKind::Io);

  {
    std::ofstream f(s.file("dims.vred"), std::ios::binary);
    f.write("VRED\x01\x00\x00\x00", 8);
    const unsigned char dims[16] = {1, 0, 0, 0, 1, 0, 0, 0,
                                    0, 0, 2, 0, 0, 0, 0, 0};  // H = 2^17
    f.write(reinterpret_cast<const char*>(dims), 16);
  }
  CHECK(kind_of_load(s.file("dims.vred")) == ErrorKind::Io);

  {
    std::ofstream f(s.file("short.vred"), std::ios::binary);
    f.write("VRED\x01\x00\x00\x00", 8);
    const char dims[16] = {1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0};
    f.write(dims, 16);
    const float payload[2] = {1.0f, 2.0f};  // needs 4 floats
    f.write(reinterpret_cast<const char*>(payload), 8);
  }
  try {
    load_clip(s.file("short.vred"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(std::string(e.what()).find("expected 16 bytes, got 8") != std::string::npos);
  }

  {
    std::ofstream f(s.file("header.vred"), std::ios::binary);
    f.write("VRED\x01", 5);
  }
  CHECK(kind_of_load(s.file("header.vred")) == ErrorKind::Io);
}

TEST_CASE("dataset save / manifest load round trip") {
  Scratch s("ds_rt");
  SynthConfig cfg = synth_config_from_json(base_config());
  Dataset ds = synth_generate(cfg);
  save_dataset(s.dir.string(), ds);
  Dataset back = load_manifest(s.file("manifest.json"));
  REQUIRE(back.clips.size() == ds.clips.size());
  CHECK(back.class_names == ds.class_names);
  CHECK(back.dims == ds.dims);
  for (size_t i = 0; i < ds.clips.size(); ++i) {
    CHECK(back.clips[i].label == ds.clips[i].label);
    CHECK(back.clips[i].clip_id == ds.clips[i].clip_id);
    for (int64_t k = 0; k < ds.clips[i].data.numel(); ++k)
      REQUIRE(back.clips[i].data[k] == ds.clips[i].data[k]);
  }
}

TEST_CASE("manifest validation error kinds") {
  Scratch s("ds_bad");
  SynthConfig cfg = synth_config_from_json(base_config());
  cfg.clips_per_class = 1;
  Dataset ds = synth_generate(cfg);
  save_dataset(s.dir.string(), ds);
  const std::string mpath = s.file("manifest.json");
  const Json good = load_json_file(mpath);

  auto kind_after = [&](const Json& j) {
    write_text_file(mpath, j.dump(2));
    try {
      load_manifest(mpath);
    } catch (const Error& e) {
      return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Numeric;
  };

  Json j = good;
  j["comment"] = "hi";
  CHECK(kind_after(j) == ErrorKind::Config);

  j = good;
  j["items"][0]["label"] = 7;
  CHECK(kind_after(j) == ErrorKind::Io);

  j = good;
  j["dims"] = {2, 4, 8, 9};
  CHECK(kind_after(j) == ErrorKind::Io);

  j = good;
  j["classes"] = Json::array();
  CHECK(kind_after(j) == ErrorKind::Config);

  j = good;
  j["items"] = Json::array();
  CHECK(kind_after(j) == ErrorKind::Config);

  j = good;
  j["items"][0]["file"] = "nope.vred";
  CHECK(kind_after(j) == ErrorKind::Io);

  CHECK_THROWS_AS(load_manifest(s.file("nothere.json")), Error);
}

TEST_CASE("hflip mirrors the width axis and is an involution") {
  std::mt19937 gen(9);
  Tensor clip = randn<float>({2, 3, 4, 5}, gen);
  Tensor flipped = hflip(clip);
  const int64_t w = 5, rows = clip.numel() / w;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t x = 0; x < w; ++x) REQUIRE(flipped[r * w + x] == clip[r * w + (w - 1 - x)]);
  Tensor twice = hflip(flipped);
  for (int64_t i = 0; i < clip.numel(); ++i) REQUIRE(twice[i] == clip[i]);
  CHECK_THROWS_AS(hflip(Tensor({2, 3})), Error);
}

TEST_CASE("spatial_shift translates and zero-fills") {
  std::mt19937 gen(10);
  Tensor clip = randn<float>({1, 2, 4, 4}, gen);
  Tensor same = spatial_shift(clip, 0, 0);
  for (int64_t i = 0; i < clip.numel(); ++i) REQUIRE(same[i] == clip[i]);

  Tensor sh = spatial_shift(clip, 1, 2);
  for (int64_t t = 0; t < 2; ++t)
    for (int64_t y = 0; y < 4; ++y)
      for (int64_t x = 0; x < 4; ++x) {
        const float got = sh[(t * 4 + y) * 4 + x];
        if (y < 1 || x < 2)
          CHECK(got == 0.0f);
        else
          CHECK(got == clip[(t * 4 + (y - 1)) * 4 + (x - 2)]);
      }
  Tensor neg = spatial_shift(clip, 0, -1);
  CHECK(neg[(0 * 4 + 0) * 4 + 3] == 0.0f);
  CHECK(neg[0] == clip[1]);
}
