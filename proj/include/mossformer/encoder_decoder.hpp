// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Convolutional encoder, mask application and transposed-convolution decoder.
// The encoder uses stride K1/2; inputs whose length does not land on a frame
// boundary are right-padded with zeros and the decoder output is trimmed back.

#pragma once

#include <string>

#include "mossformer/ops.hpp"
#include "mossformer/param_decl.hpp"

namespace mossformer {

/// Smallest length >= samples of the form K1 + m * K1/2.
std::size_t padded_length(std::size_t samples, std::size_t K1);
/// Encoder frame count for `samples` input samples: 2(T' - K1)/K1 + 1 with T' padded.
std::size_t frame_count(std::size_t samples, std::size_t K1);
/// Decoder output length for `frames` frames: (frames - 1) K1/2 + K1.
std::size_t decoded_length(std::size_t frames, std::size_t K1);

/// Parameters: `encoder.weight` [N x 1 x K1], `encoder.bias` [N],
/// `decoder.weight` [N x 1 x K1]. The decoder has no bias.
class EncoderDecoder {
 public:
  EncoderDecoder(std::size_t N, std::size_t K1);

  std::size_t features() const { return N_; }
  std::size_t kernel() const { return K1_; }
  std::size_t stride() const { return K1_ / 2; }

  void declare(ParamList& params) const;

  /// Waveform [1 x T] -> non-negative features [N x S]. Throws
  /// InputTooShortError when T < K1.
  template <typename T>
  Var<T> encode(const ForwardContext<T>& ctx, const Var<T>& signal) const;

  /// Features [N x S] -> waveform [1 x (S-1)K1/2 + K1].
  template <typename T>
  Var<T> decode(const ForwardContext<T>& ctx, const Var<T>& features) const;

 private:
  std::size_t N_;
  std::size_t K1_;
};

/// Masked features M_i * X' for speaker `speaker` of masks [C x N x S].
template <typename T>
NdArray<T> apply_mask(const NdArray<T>& encoded, const NdArray<T>& masks, std::size_t speaker);

/// First `samples` samples of a [1 x L] waveform (L >= samples).
template <typename T>
Var<T> trim(const Var<T>& waveform, std::size_t samples);

}  // namespace mossformer
