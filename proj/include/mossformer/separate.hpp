// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mossformer/checkpoint.hpp"

namespace mossformer {

/// Separates a mono mixture into C waveforms of the same length.
template <typename T>
std::vector<std::vector<double>> separate_samples(const Checkpoint<T>& ckpt,
                                                  const std::vector<double>& mixture);

/// Reads `wav_in`, writes `<stem>_spk<i>.wav` (i from 1) into `out_dir` and
/// returns their paths. A sample rate other than the model's is a FormatError.
template <typename T>
std::vector<std::string> separate_file(const Checkpoint<T>& ckpt, const std::string& wav_in,
                                       const std::string& out_dir);

}  // namespace mossformer
