// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "mossformer/joint_attention.hpp"

namespace mossformer {

/// Switches for the ablation variants. All flags are independent.
struct BlockAblation {
  AttentionMode attention_mode = AttentionMode::kJoint;
  bool single_gate = false;  // drop O' so only U' * V reaches the output projection
  bool dense_uv = false;     // U, V from a dense layer (norm, linear, SiLU) instead of ConvM
  bool dense_qk = false;     // Z from a dense layer instead of ConvM

  bool operator==(const BlockAblation&) const = default;
};

struct BlockSpec {
  std::size_t model_dim = 0;  // N
  std::size_t attn_dim = 0;   // D
  std::size_t chunk = 0;      // P
  std::size_t kernel = 0;     // K2
  std::size_t expansion = 2;
  double dropout = 0.0;
  double norm_eps = 1e-5;
  double rope_base = 10000.0;
  Activation gate = Activation::kSigmoid;  // phi
  Activation global_qk_activation = Activation::kIdentity;
  BlockAblation ablation;
  bool tie_uv = false;  // V reuses U's convolution module
};

/// Gated block with a residual connection:
///
///   U, V   = ConvM_u(x), ConvM_v(x)              [S x 2N]
///   V', U' = joint attention of x over (V, U)
///   O'     = phi(U * V')
///   O''    = U' * V
///   out    = x + ConvM_out(O' * O'')             [S x N]
class MossFormerBlock {
 public:
  MossFormerBlock(std::string prefix, BlockSpec spec);

  const BlockSpec& spec() const { return spec_; }
  const JointAttention& attention() const { return attn_; }
  void declare(ParamList& params) const;

  template <typename T>
  Var<T> forward(const ForwardContext<T>& ctx, const Var<T>& x) const;

 private:
  std::string prefix_;
  BlockSpec spec_;
  ConvModule conv_u_;
  std::optional<ConvModule> conv_v_;
  JointAttention attn_;
  ConvModule conv_out_;
};

}  // namespace mossformer
