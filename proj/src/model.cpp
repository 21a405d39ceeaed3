// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/model.hpp"

#include <algorithm>

namespace mossformer {

template <typename T>
NdArray<T> mask_set(const NdArray<T>& masks, std::size_t speakers) {
  require_rank(masks, 2, "mask_set");
  const std::size_t frames = masks.dim(0);
  if (speakers == 0 || masks.dim(1) % speakers != 0) {
    throw DimensionError("mask_set: " + std::to_string(masks.dim(1)) +
                         " channels do not split into " + std::to_string(speakers) + " speakers");
  }
  const std::size_t n = masks.dim(1) / speakers;
  NdArray<T> out({speakers, n, frames});
  for (std::size_t s = 0; s < frames; ++s)
    for (std::size_t c = 0; c < speakers; ++c)
      for (std::size_t f = 0; f < n; ++f) out(c, f, s) = masks(s, c * n + f);
  return out;
}

Model::Model(ModelConfig config)
    : config_((config.validate(), std::move(config))),
      codec_(config_.N, config_.K1),
      masknet_(config_) {
  codec_.declare(params_);
  masknet_.declare(params_);
}

template <typename T>
ParamStore<T> Model::init(std::uint64_t seed) const {
  ParamStore<T> store;
  Rng rng(seed);
  initialize(params_, store, rng);
  return store;
}

template <typename T>
ForwardResult<T> Model::forward(const ForwardContext<T>& ctx, const Var<T>& signal) const {
  const std::size_t samples = signal.dim(1);
  ForwardResult<T> r;
  r.encoded = codec_.encode(ctx, signal);
  const Var<T> features = transpose(r.encoded);  // [S x N]
  r.masks = masknet_.forward(ctx, features);
  const std::size_t n = config_.N;
  for (std::size_t c = 0; c < config_.C; ++c) {
    const Var<T> masked = mul(slice_cols(r.masks, c * n, (c + 1) * n), features);
    r.estimates.push_back(trim(codec_.decode(ctx, transpose(masked)), samples));
  }
  return r;
}

template <typename T>
NdArray<T> Model::separate(ParamStore<T>& params, const NdArray<T>& mixture) const {
  Tape<T> tape(false);
  ForwardContext<T> ctx{tape, params};
  const std::size_t samples = mixture.size();
  const ForwardResult<T> r = forward(ctx, tape.constant(mixture.reshaped({1, samples})));
  NdArray<T> out({config_.C, samples});
  for (std::size_t c = 0; c < config_.C; ++c) {
    std::copy_n(r.estimates[c].value().raw(), samples, out.raw() + c * samples);
  }
  return out;
}

std::size_t count_parameters(const ModelConfig& config) { return Model(config).parameter_count(); }

#define MOSSFORMER_MODEL(T)                                                                   \
  template NdArray<T> mask_set(const NdArray<T>&, std::size_t);                               \
  template ParamStore<T> Model::init(std::uint64_t) const;                                    \
  template ForwardResult<T> Model::forward(const ForwardContext<T>&, const Var<T>&) const;    \
  template NdArray<T> Model::separate(ParamStore<T>&, const NdArray<T>&) const;

MOSSFORMER_MODEL(float)
MOSSFORMER_MODEL(double)

}  // namespace mossformer
