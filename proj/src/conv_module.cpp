// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/conv_module.hpp"

#include <cmath>

#include "mossformer/ops.hpp"

namespace mossformer {

ConvModule::ConvModule(std::string prefix, ConvModuleSpec spec)
    : prefix_(std::move(prefix)), spec_(spec) {
  if (spec_.in == 0 || spec_.out == 0) throw ConfigError(prefix_ + ": zero width");
  if (!spec_.dense && spec_.kernel % 2 == 0) {
    throw ConfigError(prefix_ + ": depthwise kernel size " + std::to_string(spec_.kernel) +
                      " must be odd");
  }
}

void ConvModule::declare(ParamList& params) const {
  params.push_back({prefix_ + ".norm.gain", {spec_.in}, Init::kOnes});
  params.push_back({prefix_ + ".norm.bias", {spec_.in}, Init::kZeros});
  params.push_back({prefix_ + ".proj.weight", {spec_.out, spec_.in}, Init::kUniform,
                    1.0 / std::sqrt(static_cast<double>(spec_.in))});
  params.push_back({prefix_ + ".proj.bias", {spec_.out}, Init::kZeros});
  if (!spec_.dense) {
    params.push_back({prefix_ + ".dw.weight", {spec_.out, spec_.kernel}, Init::kUniform,
                      1.0 / std::sqrt(static_cast<double>(spec_.kernel))});
  }
}

template <typename T>
Var<T> ConvModule::forward(const ForwardContext<T>& ctx, const Var<T>& x) const {
  if (x.rank() != 2 || x.dim(1) != spec_.in) {
    throw DimensionError(prefix_ + ": input " + shape_string(x.shape()) +
                         ", expected [frames x " + std::to_string(spec_.in) + "]");
  }
  Var<T> h = layer_norm(x, ctx.param(prefix_ + ".norm.gain"), ctx.param(prefix_ + ".norm.bias"),
                        spec_.norm_eps);
  h = linear(h, ctx.param(prefix_ + ".proj.weight"), ctx.param(prefix_ + ".proj.bias"));
  h = activation(Activation::kSilu, h);
  if (!spec_.dense) {
    // Depthwise convolution runs along time, one channel per projected feature.
    Var<T> conv = transpose(depthwise_conv1d(transpose(h), ctx.param(prefix_ + ".dw.weight")));
    h = add(h, conv);
  }
  return dropout(h, spec_.dropout, ctx.rng, ctx.train);
}

template Var<float> ConvModule::forward(const ForwardContext<float>&, const Var<float>&) const;
template Var<double> ConvModule::forward(const ForwardContext<double>&, const Var<double>&) const;

}  // namespace mossformer
