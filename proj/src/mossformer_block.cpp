// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/mossformer_block.hpp"

namespace mossformer {

namespace {

ConvModuleSpec value_spec(const BlockSpec& s) {
  return {s.model_dim, s.expansion * s.model_dim, s.kernel, s.dropout, s.norm_eps,
          s.ablation.dense_uv};
}

AttentionSpec attention_spec(const BlockSpec& s) {
  AttentionSpec a;
  a.model_dim = s.model_dim;
  a.attn_dim = s.attn_dim;
  a.chunk = s.chunk;
  a.kernel = s.kernel;
  a.dropout = s.dropout;
  a.norm_eps = s.norm_eps;
  a.rope_base = s.rope_base;
  a.dense_qk = s.ablation.dense_qk;
  a.mode = s.ablation.attention_mode;
  a.global_qk_activation = s.global_qk_activation;
  return a;
}

}  // namespace

MossFormerBlock::MossFormerBlock(std::string prefix, BlockSpec spec)
    : prefix_(std::move(prefix)),
      spec_(spec),
      conv_u_(prefix_ + ".convm_u", value_spec(spec)),
      attn_(prefix_ + ".attn", attention_spec(spec)),
      conv_out_(prefix_ + ".convm_out", ConvModuleSpec{spec.expansion * spec.model_dim,
                                                       spec.model_dim, spec.kernel, spec.dropout,
                                                       spec.norm_eps, false}) {
  if (!spec_.tie_uv) conv_v_.emplace(prefix_ + ".convm_v", value_spec(spec));
}

void MossFormerBlock::declare(ParamList& params) const {
  conv_u_.declare(params);
  if (conv_v_) conv_v_->declare(params);
  attn_.declare(params);
  conv_out_.declare(params);
}

template <typename T>
Var<T> MossFormerBlock::forward(const ForwardContext<T>& ctx, const Var<T>& x) const {
  if (x.rank() != 2 || x.dim(1) != spec_.model_dim) {
    throw DimensionError(prefix_ + ": input " + shape_string(x.shape()) + ", expected [frames x " +
                         std::to_string(spec_.model_dim) + "]");
  }
  const Var<T> u = conv_u_.forward(ctx, x);
  const Var<T> v = conv_v_ ? conv_v_->forward(ctx, x) : u;
  const AttentionOutput<T> att = attn_.forward(ctx, x, v, u);

  Var<T> gated = mul(att.u_att, v);  // O''
  if (!spec_.ablation.single_gate) {
    const Var<T> o_prime = activation(spec_.gate, mul(u, att.v_att));
    gated = mul(o_prime, gated);
  }
  return add(x, conv_out_.forward(ctx, gated));
}

template Var<float> MossFormerBlock::forward(const ForwardContext<float>&, const Var<float>&) const;
template Var<double> MossFormerBlock::forward(const ForwardContext<double>&,
                                              const Var<double>&) const;

}  // namespace mossformer
