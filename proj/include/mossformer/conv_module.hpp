// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "mossformer/autodiff.hpp"
#include "mossformer/param_decl.hpp"

namespace mossformer {

struct ConvModuleSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;  // depthwise kernel, odd
  double dropout = 0.0;
  double norm_eps = 1e-5;
  /// Drop the depthwise convolution and its skip, leaving norm, linear and
  /// SiLU: the dense layer of a gated attention unit.
  bool dense = false;
};

/// Convolution module:
///
///   y0  = silu(layer_norm(x) W^T + b)
///   out = dropout(y0 + depthwise_conv(y0))
///
/// x is [frames x in], out is [frames x out]. The skip connection wraps only
/// the depthwise convolution because the projection changes the width.
/// Parameters live under `<prefix>.norm.{gain,bias}`, `<prefix>.proj.{weight,bias}`
/// and `<prefix>.dw.weight`.
class ConvModule {
 public:
  ConvModule(std::string prefix, ConvModuleSpec spec);

  const std::string& prefix() const { return prefix_; }
  const ConvModuleSpec& spec() const { return spec_; }

  void declare(ParamList& params) const;

  template <typename T>
  Var<T> forward(const ForwardContext<T>& ctx, const Var<T>& x) const;

 private:
  std::string prefix_;
  ConvModuleSpec spec_;
};

}  // namespace mossformer
