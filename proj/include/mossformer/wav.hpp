// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Mono 16-bit PCM WAV files. Samples are scaled by 1/32768 on read and by
// 32768 (rounded, clamped to the int16 range) on write.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mossformer {

struct WavData {
  std::uint32_t sample_rate = 0;
  std::vector<double> samples;
};

/// Throws FormatError for anything but mono 16-bit PCM, naming the field.
WavData read_wav(const std::string& path);
WavData parse_wav(const std::vector<std::uint8_t>& bytes);

void write_wav(const std::string& path, const std::vector<double>& samples,
               std::uint32_t sample_rate);
std::vector<std::uint8_t> encode_wav(const std::vector<double>& samples, std::uint32_t sample_rate);

}  // namespace mossformer
