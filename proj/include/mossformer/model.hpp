// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "mossformer/config.hpp"
#include "mossformer/encoder_decoder.hpp"
#include "mossformer/masking_net.hpp"

namespace mossformer {

template <typename T>
struct ForwardResult {
  Var<T> encoded;                // X' [N x S]
  Var<T> masks;                  // [S x C*N], speaker-major columns
  std::vector<Var<T>> estimates;  // C waveforms [1 x T], trimmed to the input length
};

/// Masks [S x C*N] rearranged as [C x N x S].
template <typename T>
NdArray<T> mask_set(const NdArray<T>& masks, std::size_t speakers);

/// Encoder, masking net and decoder.
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const EncoderDecoder& codec() const { return codec_; }
  const MaskingNet& masking_net() const { return masknet_; }
  const ParamList& params() const { return params_; }
  std::size_t parameter_count() const { return scalar_count(params_); }

  /// Fresh parameters drawn from a generator seeded with `seed`.
  template <typename T>
  ParamStore<T> init(std::uint64_t seed) const;

  /// signal: mixture [1 x T].
  template <typename T>
  ForwardResult<T> forward(const ForwardContext<T>& ctx, const Var<T>& signal) const;

  /// Eval-mode separation without recording: returns [C x T].
  template <typename T>
  NdArray<T> separate(ParamStore<T>& params, const NdArray<T>& mixture) const;

 private:
  ModelConfig config_;
  EncoderDecoder codec_;
  MaskingNet masknet_;
  ParamList params_;
};

/// Trainable scalars of the full model (encoder, masking net, decoder).
std::size_t count_parameters(const ModelConfig& config);

}  // namespace mossformer
