// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/masking_net.hpp"

#include <cmath>

namespace mossformer {

template <typename T>
NdArray<T> positional_encoding(std::size_t frames, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("positional_encoding: dimension " + std::to_string(dim) + " must be even");
  }
  if (frames == 0) throw DimensionError("positional_encoding: zero frames");
  NdArray<T> pe({frames, dim});
  for (std::size_t j = 0; j < dim / 2; ++j) {
    const double freq = std::pow(10000.0, -static_cast<double>(2 * j) / static_cast<double>(dim));
    for (std::size_t m = 0; m < frames; ++m) {
      const double angle = static_cast<double>(m) * freq;
      pe(m, 2 * j) = static_cast<T>(std::sin(angle));
      pe(m, 2 * j + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

namespace {

void pointwise(ParamList& params, const std::string& name, std::size_t in, std::size_t out) {
  params.push_back({name + ".weight", {out, in}, Init::kUniform,
                    1.0 / std::sqrt(static_cast<double>(in))});
  params.push_back({name + ".bias", {out}, Init::kZeros});
}

template <typename T>
Var<T> pointwise(const ForwardContext<T>& ctx, const std::string& name, const Var<T>& x) {
  return linear(x, ctx.param(name + ".weight"), ctx.param(name + ".bias"));
}

}  // namespace

MaskingNet::MaskingNet(const ModelConfig& config)
    : N_(config.N), C_(config.C), norm_eps_(config.norm_eps) {
  if (N_ % 2 != 0) {
    throw ConfigError("masking net: N=" + std::to_string(N_) +
                      " must be even for the positional encoding");
  }
  const BlockSpec spec = config.block_spec();
  blocks_.reserve(config.R);
  for (std::size_t i = 0; i < config.R; ++i) {
    blocks_.emplace_back("masknet.blocks." + std::to_string(i), spec);
  }
}

void MaskingNet::declare(ParamList& params) const {
  params.push_back({"masknet.norm.gain", {N_}, Init::kOnes});
  params.push_back({"masknet.norm.bias", {N_}, Init::kZeros});
  pointwise(params, "masknet.in_pw", N_, N_);
  for (const auto& b : blocks_) b.declare(params);
  pointwise(params, "masknet.expand_pw", N_, C_ * N_);
  pointwise(params, "masknet.glu_a", C_ * N_, C_ * N_);
  pointwise(params, "masknet.glu_b", C_ * N_, C_ * N_);
  pointwise(params, "masknet.out_pw", C_ * N_, C_ * N_);
}

template <typename T>
Var<T> MaskingNet::forward(const ForwardContext<T>& ctx, const Var<T>& x) const {
  if (x.rank() != 2 || x.dim(1) != N_) {
    throw DimensionError("masking net input: " + shape_string(x.shape()) + ", expected [frames x " +
                         std::to_string(N_) + "]");
  }
  Var<T> y = layer_norm(x, ctx.param("masknet.norm.gain"), ctx.param("masknet.norm.bias"),
                        norm_eps_);
  y = add(y, ctx.tape.constant(positional_encoding<T>(x.dim(0), N_)));
  y = pointwise(ctx, "masknet.in_pw", y);
  for (const auto& b : blocks_) y = b.forward(ctx, y);
  y = pointwise(ctx, "masknet.expand_pw", activation(Activation::kRelu, y));
  const Var<T> value = pointwise(ctx, "masknet.glu_a", y);
  const Var<T> gate = activation(Activation::kSigmoid, pointwise(ctx, "masknet.glu_b", y));
  return activation(Activation::kRelu, pointwise(ctx, "masknet.out_pw", mul(value, gate)));
}

template NdArray<float> positional_encoding(std::size_t, std::size_t);
template NdArray<double> positional_encoding(std::size_t, std::size_t);
template Var<float> MaskingNet::forward(const ForwardContext<float>&, const Var<float>&) const;
template Var<double> MaskingNet::forward(const ForwardContext<double>&, const Var<double>&) const;

}  // namespace mossformer
