// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic multi-speaker mixtures for training and tests.

#pragma once

#include <cstdint>
#include <vector>

#include "mossformer/ndarray.hpp"

namespace mossformer {

struct Example {
  NdArray<double> mixture;  // [T]
  NdArray<double> sources;  // [C x T]; mixture is their exact sum
  std::vector<double> fundamentals;  // Hz, one per source
};

/// `count` mixtures of C sources, T samples each. Source c is a comb of
/// partials spaced by a fundamental f0 drawn from the c-th of C disjoint
/// bands, confined to the c-th of C equal slices of the spectrum, with a slow
/// random amplitude envelope and white noise 30 dB below the tonal part.
/// Fully determined by `seed`.
std::vector<Example> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t C,
                                   std::size_t T, std::uint32_t sample_rate = 8000);

}  // namespace mossformer
