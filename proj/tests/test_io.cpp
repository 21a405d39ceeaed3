// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "mossformer/checkpoint.hpp"
#include "mossformer/config.hpp"
#include "mossformer/model.hpp"
#include "mossformer/separate.hpp"
#include "mossformer/synth.hpp"
#include "mossformer/wav.hpp"

using namespace mossformer;
namespace fs = std::filesystem;

namespace {

// Scratch directory removed at scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("mossformer_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back(v >> 8);
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void tag(std::vector<std::uint8_t>& b, const char* t) { b.insert(b.end(), t, t + 4); }

// A WAV file built byte by byte, with an optional chunk before "data".
std::vector<std::uint8_t> handmade_wav(const std::vector<std::int16_t>& pcm, std::uint32_t rate,
                                       std::uint16_t channels = 1, std::uint16_t bits = 16,
                                       std::uint16_t format = 1, bool extra_chunk = false) {
  std::vector<std::uint8_t> body;
  tag(body, "WAVE");
  tag(body, "fmt ");
  put32(body, 16);
  put16(body, format);
  put16(body, channels);
  put32(body, rate);
  put32(body, rate * channels * bits / 8);
  put16(body, channels * bits / 8);
  put16(body, bits);
  if (extra_chunk) {
    tag(body, "LIST");
    put32(body, 5);
    body.insert(body.end(), {'a', 'b', 'c', 'd', 'e', 0});  // odd size plus pad byte
  }
  tag(body, "data");
  put32(body, static_cast<std::uint32_t>(pcm.size() * 2));
  for (auto s : pcm) put16(body, static_cast<std::uint16_t>(s));
  std::vector<std::uint8_t> out;
  tag(out, "RIFF");
  put32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

bool same_values(const ParamStore<double>& a, const ParamStore<double>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, e] : a.entries()) {
    if (!b.contains(name)) return false;
    const auto& o = b.at(name);
    if (o.value.shape() != e.value.shape() || o.trainable != e.trainable) return false;
    if (std::memcmp(o.value.raw(), e.value.raw(), e.value.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("wav: reads handmade files and scales by 1/32768") {
  const std::vector<std::int16_t> pcm = {0, 1, -1, 32767, -32768, 16384};
  for (bool extra : {false, true}) {
    const auto wav = parse_wav(handmade_wav(pcm, 8000, 1, 16, 1, extra));
    CHECK(wav.sample_rate == 8000);
    REQUIRE(wav.samples.size() == pcm.size());
    for (std::size_t i = 0; i < pcm.size(); ++i) CHECK(wav.samples[i] == pcm[i] / 32768.0);
  }
  CHECK(encode_wav(parse_wav(handmade_wav(pcm, 8000)).samples, 8000) == handmade_wav(pcm, 8000));
}

TEST_CASE("wav: write then read through a file, with rounding and clamping") {
  TempDir dir("wav");
  const std::vector<double> x = {0.0, 0.5, -0.5, 1.5, -2.0, 3.0 / 32768.0, 0.49 / 32768.0};
  write_wav(dir.file("a.wav"), x, 8000);
  const auto back = read_wav(dir.file("a.wav"));
  CHECK(back.sample_rate == 8000);
  const std::vector<double> want = {0.0, 0.5, -0.5, 32767 / 32768.0, -1.0, 3.0 / 32768.0, 0.0};
  CHECK(back.samples == want);
}

TEST_CASE("wav: malformed headers are format errors") {
  const std::vector<std::int16_t> pcm = {1, 2, 3};
  CHECK_THROWS_AS(parse_wav(handmade_wav(pcm, 8000, 2)), FormatError);
  CHECK_THROWS_AS(parse_wav(handmade_wav(pcm, 8000, 1, 8)), FormatError);
  CHECK_THROWS_AS(parse_wav(handmade_wav(pcm, 8000, 1, 16, 3)), FormatError);
  auto bytes = handmade_wav(pcm, 8000);
  bytes[0] = 'X';
  CHECK_THROWS_AS(parse_wav(bytes), FormatError);
  bytes = handmade_wav(pcm, 8000);
  bytes.resize(bytes.size() - 3);  // data chunk shorter than declared
  CHECK_THROWS_AS(parse_wav(bytes), FormatError);
  CHECK_THROWS_AS(parse_wav({}), FormatError);
  CHECK_THROWS_AS(read_wav("/nonexistent/dir/x.wav"), FormatError);
}

TEST_CASE("checkpoint round-trip is bitwise and restores every field") {
  TempDir dir("ckpt");
  const auto cfg = ModelConfig::preset_config("tiny");
  const Model model(cfg);
  Checkpoint<double> c;
  c.config = cfg;
  c.params = model.init<double>(3);
  c.adam_m = model.init<double>(4);
  c.adam_v = model.init<double>(5);
  c.adam_steps = 17;
  c.epoch = 4;
  c.rng_state = "1 2 3";
  save_checkpoint(dir.file("m.ckpt"), c);
  CHECK(checkpoint_scalar_size(dir.file("m.ckpt")) == 8);
  const auto back = load_checkpoint<double>(dir.file("m.ckpt"));
  CHECK(back.config == cfg);
  CHECK(back.adam_steps == 17);
  CHECK(back.epoch == 4);
  CHECK(back.rng_state == "1 2 3");
  CHECK(same_values(back.params, c.params));
  CHECK(same_values(back.adam_m, c.adam_m));
  CHECK(same_values(back.adam_v, c.adam_v));
  CHECK(!fs::exists(dir.file("m.ckpt.tmp")));

  // Saving what was loaded gives the same bytes.
  save_checkpoint(dir.file("n.ckpt"), back);
  std::ifstream a(dir.file("m.ckpt"), std::ios::binary), b(dir.file("n.ckpt"), std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(sa.compare(0, 8, "MSFMCKPT") == 0);
}

TEST_CASE("checkpoint errors") {
  TempDir dir("ckpt_err");
  const auto cfg = ModelConfig::preset_config("tiny");
  Checkpoint<double> c;
  c.config = cfg;
  c.params = Model(cfg).init<double>(1);
  save_checkpoint(dir.file("ok.ckpt"), c);

  std::ifstream in(dir.file("ok.ckpt"), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  auto write = [&](const std::string& name, const std::string& b) {
    std::ofstream(dir.file(name), std::ios::binary) << b;
    return dir.file(name);
  };
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(load_checkpoint<double>(write("magic.ckpt", bad)), FormatError);
  bad = bytes;
  bad[8] = 99;  // version
  CHECK_THROWS_AS(load_checkpoint<double>(write("version.ckpt", bad)), VersionError);
  CHECK_THROWS_AS(load_checkpoint<double>(write("short.ckpt", bytes.substr(0, bytes.size() / 2))),
                  FormatError);
  CHECK_THROWS_AS(load_checkpoint<float>(dir.file("ok.ckpt")), VersionError);
  CHECK_THROWS_AS(load_checkpoint<double>(dir.file("missing.ckpt")), FormatError);

  // Parameters that do not fit the stored config.
  Checkpoint<double> mismatched = c;
  ModelConfig other = cfg;
  other.N = 24;
  mismatched.params = Model(other).init<double>(1);
  save_checkpoint(dir.file("mismatch.ckpt"), mismatched);
  CHECK_THROWS_AS(load_checkpoint<double>(dir.file("mismatch.ckpt")), VersionError);
}

TEST_CASE("config text: comments, overrides, unknown keys, round trip") {
  const auto kv = parse_key_values("# comment\n\n preset = S \nlr=0.001  # trailing\nseed=9\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv[0] == std::pair<std::string, std::string>{"preset", "S"});
  ModelConfig m;
  TrainConfig t;
  apply_settings(kv, m, &t);
  CHECK(m == ModelConfig::preset_config("S"));
  CHECK(t.lr == 0.001);
  CHECK(t.seed == 9);
  CHECK_THROWS_AS(apply_settings({{"no_such_key", "1"}}, m, &t), ConfigError);
  CHECK_THROWS_AS(apply_settings({{"N", "abc"}}, m, &t), ConfigError);
  CHECK_THROWS_AS(parse_key_values("just words\n"), ConfigError);

  ModelConfig odd = ModelConfig::preset_config("tiny");
  odd.set("phi", "gelu");
  odd.set("attention_mode", "local_only");
  ModelConfig back;
  apply_settings(parse_key_values(odd.to_text()), back, nullptr);
  CHECK(back == odd);
  TrainConfig tb;
  ModelConfig unused;
  apply_settings(parse_key_values(t.to_text()), unused, &tb);
  CHECK(tb.to_text() == t.to_text());
}

TEST_CASE("synthetic data: exact mixtures, determinism, distinct fundamentals") {
  const auto a = synth_dataset(11, 3, 3, 500);
  const auto b = synth_dataset(11, 3, 3, 500);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].mixture == b[i].mixture);
    CHECK(a[i].sources == b[i].sources);
    CHECK(a[i].sources.shape() == Shape{3, 500});
    for (std::size_t t = 0; t < 500; ++t) {
      const double sum = (a[i].sources(0, t) + a[i].sources(1, t)) + a[i].sources(2, t);
      CHECK(a[i].mixture[t] - sum == 0.0);
    }
  }
  CHECK(synth_dataset(12, 1, 3, 500)[0].mixture != a[0].mixture);

  // 100 seeds: no two draws share a fundamental, within or across mixtures.
  std::set<double> seen;
  std::size_t draws = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto d = synth_dataset(seed, 1, 2, 400);
    for (double f0 : d[0].fundamentals) {
      seen.insert(f0);
      ++draws;
    }
  }
  CHECK(seen.size() == draws);
}

TEST_CASE("separate: file names, output length, silent input, bad input") {
  TempDir dir("separate");
  const auto cfg = ModelConfig::preset_config("tiny");
  Checkpoint<float> c;
  c.config = cfg;
  c.params = Model(cfg).init<float>(2);

  const auto mix = synth_dataset(1, 1, 2, 1003)[0].mixture;
  write_wav(dir.file("mix.wav"), std::vector<double>(mix.raw(), mix.raw() + mix.size()), 8000);
  const auto outputs = separate_file(c, dir.file("mix.wav"), dir.file("out"));
  REQUIRE(outputs.size() == 2);
  CHECK(fs::path(outputs[0]).filename() == "mix_spk1.wav");
  CHECK(fs::path(outputs[1]).filename() == "mix_spk2.wav");
  for (const auto& p : outputs) CHECK(read_wav(p).samples.size() == 1003);

  // A silent mixture only carries what the encoder bias leaks through: small.
  const auto quiet = separate_samples(c, std::vector<double>(800, 0.0));
  for (const auto& s : quiet) {
    double peak = 0.0;
    for (double v : s) peak = std::max(peak, std::abs(v));
    CHECK(peak < 0.05);
  }

  write_wav(dir.file("fast.wav"), {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}, 16000);
  CHECK_THROWS_AS(separate_file(c, dir.file("fast.wav"), dir.file("out")), FormatError);
  std::ofstream(dir.file("junk.wav")) << "not a wav";
  CHECK_THROWS_AS(separate_file(c, dir.file("junk.wav"), dir.file("out")), FormatError);
}
