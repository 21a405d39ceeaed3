// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mossformer/errors.hpp"

namespace mossformer {

namespace {

std::uint32_t u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

WavData parse_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("wav: missing RIFF/WAVE header");
  }
  WavData wav;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) throw FormatError("wav: chunk runs past end of file");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("wav: fmt chunk too short");
      const std::uint8_t* f = bytes.data() + body;
      if (u16(f) != 1) throw FormatError("wav: audio format " + std::to_string(u16(f)) + " is not PCM");
      if (u16(f + 2) != 1) throw FormatError("wav: " + std::to_string(u16(f + 2)) + " channels, expected mono");
      if (u16(f + 14) != 16) {
        throw FormatError("wav: " + std::to_string(u16(f + 14)) + " bits per sample, expected 16");
      }
      wav.sample_rate = u32(f + 4);
      if (wav.sample_rate == 0) throw FormatError("wav: zero sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      const std::uint8_t* d = bytes.data() + body;
      wav.samples.resize(size / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        wav.samples[i] = static_cast<double>(static_cast<std::int16_t>(u16(d + 2 * i))) / 32768.0;
      }
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);  // chunks are word aligned
  }
  if (!have_fmt) throw FormatError("wav: no fmt chunk");
  if (!have_data) throw FormatError("wav: no data chunk");
  return wav;
}

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("wav: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const std::vector<double>& samples,
                                     std::uint32_t sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, 1);  // PCM
  put16(out, 1);  // mono
  put32(out, sample_rate);
  put32(out, sample_rate * 2);
  put16(out, 2);
  put16(out, 16);
  put_tag(out, "data");
  put32(out, data_bytes);
  for (double s : samples) {
    const double scaled = std::isnan(s) ? 0.0 : std::nearbyint(s * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void write_wav(const std::string& path, const std::vector<double>& samples,
               std::uint32_t sample_rate) {
  const auto bytes = encode_wav(samples, sample_rate);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("wav: cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("wav: write to '" + path + "' failed");
}

}  // namespace mossformer
