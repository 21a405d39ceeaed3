// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/encoder_decoder.hpp"

#include <cmath>

namespace mossformer {

std::size_t padded_length(std::size_t samples, std::size_t K1) {
  if (samples < K1) {
    throw InputTooShortError("input has " + std::to_string(samples) +
                             " samples, fewer than the encoder kernel " + std::to_string(K1));
  }
  const std::size_t stride = K1 / 2;
  const std::size_t steps = (samples - K1 + stride - 1) / stride;
  return K1 + steps * stride;
}

std::size_t frame_count(std::size_t samples, std::size_t K1) {
  return 2 * (padded_length(samples, K1) - K1) / K1 + 1;
}

std::size_t decoded_length(std::size_t frames, std::size_t K1) {
  return (frames - 1) * (K1 / 2) + K1;
}

EncoderDecoder::EncoderDecoder(std::size_t N, std::size_t K1) : N_(N), K1_(K1) {
  if (N_ == 0) throw ConfigError("encoder: N must be positive");
  if (K1_ < 2 || K1_ % 2 != 0) {
    throw ConfigError("encoder: kernel size " + std::to_string(K1_) + " must be even and >= 2");
  }
}

void EncoderDecoder::declare(ParamList& params) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(K1_));
  params.push_back({"encoder.weight", {N_, 1, K1_}, Init::kUniform, bound});
  params.push_back({"encoder.bias", {N_}, Init::kZeros});
  params.push_back({"decoder.weight", {N_, 1, K1_}, Init::kUniform, bound});
}

template <typename T>
Var<T> EncoderDecoder::encode(const ForwardContext<T>& ctx, const Var<T>& signal) const {
  if (signal.rank() != 2 || signal.dim(0) != 1) {
    throw DimensionError("encode: signal " + shape_string(signal.shape()) + ", expected [1 x T]");
  }
  const std::size_t samples = signal.dim(1);
  const std::size_t padded = padded_length(samples, K1_);
  Var<T> x = padded > samples ? pad_cols(signal, padded - samples) : signal;
  Var<T> y = conv1d(x, ctx.param("encoder.weight"), ctx.param("encoder.bias"), stride());
  return activation(Activation::kRelu, y);
}

template <typename T>
Var<T> EncoderDecoder::decode(const ForwardContext<T>& ctx, const Var<T>& features) const {
  if (features.rank() != 2 || features.dim(0) != N_) {
    throw DimensionError("decode: features " + shape_string(features.shape()) + ", expected [" +
                         std::to_string(N_) + " x S]");
  }
  return transposed_conv1d(features, ctx.param("decoder.weight"), stride());
}

template <typename T>
NdArray<T> apply_mask(const NdArray<T>& encoded, const NdArray<T>& masks, std::size_t speaker) {
  require_rank(encoded, 2, "apply_mask features");
  require_rank(masks, 3, "apply_mask masks");
  if (masks.dim(1) != encoded.dim(0) || masks.dim(2) != encoded.dim(1)) {
    throw DimensionError("apply_mask: masks " + shape_string(masks.shape()) +
                         " do not match features " + shape_string(encoded.shape()));
  }
  if (speaker >= masks.dim(0)) {
    throw IndexError("apply_mask: speaker " + std::to_string(speaker) + " out of range for " +
                     std::to_string(masks.dim(0)) + " speakers");
  }
  NdArray<T> out(encoded.shape());
  const T* m = masks.raw() + speaker * encoded.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] * encoded[i];
  return out;
}

template <typename T>
Var<T> trim(const Var<T>& waveform, std::size_t samples) {
  if (waveform.dim(1) == samples) return waveform;
  return slice_cols(waveform, 0, samples);
}

#define MOSSFORMER_ENCDEC(T)                                                                  \
  template Var<T> EncoderDecoder::encode(const ForwardContext<T>&, const Var<T>&) const;     \
  template Var<T> EncoderDecoder::decode(const ForwardContext<T>&, const Var<T>&) const;     \
  template NdArray<T> apply_mask(const NdArray<T>&, const NdArray<T>&, std::size_t);         \
  template Var<T> trim(const Var<T>&, std::size_t);

MOSSFORMER_ENCDEC(float)
MOSSFORMER_ENCDEC(double)

}  // namespace mossformer
