// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/joint_attention.hpp"

namespace mossformer {

AttentionMode parse_attention_mode(std::string_view name) {
  if (name == "joint") return AttentionMode::kJoint;
  if (name == "local_only") return AttentionMode::kLocalOnly;
  if (name == "global_only") return AttentionMode::kGlobalOnly;
  throw ConfigError("unknown attention mode '" + std::string(name) + "'");
}

std::string attention_mode_name(AttentionMode m) {
  switch (m) {
    case AttentionMode::kJoint: return "joint";
    case AttentionMode::kLocalOnly: return "local_only";
    case AttentionMode::kGlobalOnly: return "global_only";
  }
  return "?";
}

ChunkPlan ChunkPlan::make(std::size_t frames, std::size_t chunk) {
  if (chunk == 0) throw ConfigError("chunk size must be >= 1");
  ChunkPlan p;
  p.frames = frames;
  p.chunk = chunk;
  p.chunks = (frames + chunk - 1) / chunk;
  p.pad = p.chunks * chunk - frames;
  return p;
}

namespace {

const char* const kQkNames[4] = {"q", "k", "q_global", "k_global"};

template <typename T>
void require_streams(const Var<T>& v, const Var<T>& u, std::size_t frames) {
  require_same_shape(v.shape(), u.shape(), "attention V/U");
  if (v.rank() != 2 || v.dim(0) != frames) {
    throw DimensionError("attention: value stream " + shape_string(v.shape()) + " but queries have " +
                         std::to_string(frames) + " frames");
  }
}

template <typename T>
AttentionOutput<T> split(const Var<T>& both, std::size_t width) {
  return {slice_cols(both, 0, width), slice_cols(both, width, 2 * width)};
}

}  // namespace

template <typename T>
AttentionOutput<T> global_attention(const Var<T>& q_global, const Var<T>& k_global,
                                    const Var<T>& v, const Var<T>& u) {
  require_same_shape(q_global.shape(), k_global.shape(), "global_attention Q'/K'");
  const std::size_t frames = q_global.dim(0);
  require_streams(v, u, frames);
  Var<T> values = concat_cols(v, u);
  Var<T> kv = scale(matmul_tn(k_global, values), 1.0 / static_cast<double>(frames));
  return split(matmul(q_global, kv), v.dim(1));
}

template <typename T>
AttentionOutput<T> local_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                                   const Var<T>& u, std::size_t chunk, ForwardStats* stats) {
  require_streams(v, u, q.dim(0));
  Var<T> values = concat_cols(v, u);
  Var<T> out = local_attention(q, k, values, chunk, 1.0 / static_cast<double>(chunk), stats);
  return split(out, v.dim(1));
}

JointAttention::JointAttention(std::string prefix, AttentionSpec spec)
    : prefix_(std::move(prefix)),
      spec_(spec),
      z_(prefix_ + ".z", ConvModuleSpec{spec.model_dim, spec.attn_dim, spec.kernel, spec.dropout,
                                        spec.norm_eps, spec.dense_qk}) {
  if (spec_.attn_dim % 2 != 0) {
    throw ConfigError(prefix_ + ": attention dimension " + std::to_string(spec_.attn_dim) +
                      " must be even for RoPE");
  }
  if (spec_.chunk == 0) throw ConfigError(prefix_ + ": chunk size must be >= 1");
}

void JointAttention::declare(ParamList& params) const {
  z_.declare(params);
  for (const char* n : kQkNames) params.push_back({prefix_ + ".scale." + n, {spec_.attn_dim}, Init::kOnes});
  for (const char* n : kQkNames) params.push_back({prefix_ + ".offset." + n, {spec_.attn_dim}, Init::kZeros});
}

template <typename T>
Var<T> JointAttention::shared_representation(const ForwardContext<T>& ctx, const Var<T>& x) const {
  return z_.forward(ctx, x);
}

template <typename T>
QueryKeys<T> JointAttention::derive_qk(const ForwardContext<T>& ctx, const Var<T>& z) const {
  Var<T> out[4];
  for (int i = 0; i < 4; ++i) {
    const std::string n = kQkNames[i];
    Var<T> affine = add_row(mul_row(z, ctx.param(prefix_ + ".scale." + n)),
                            ctx.param(prefix_ + ".offset." + n));
    out[i] = rope(affine, spec_.rope_base);
  }
  return {out[0], out[1], out[2], out[3]};
}

template <typename T>
AttentionOutput<T> JointAttention::forward(const ForwardContext<T>& ctx, const Var<T>& x,
                                           const Var<T>& v, const Var<T>& u) const {
  return forward(ctx, x, v, u, spec_.mode);
}

template <typename T>
AttentionOutput<T> JointAttention::forward(const ForwardContext<T>& ctx, const Var<T>& x,
                                           const Var<T>& v, const Var<T>& u,
                                           AttentionMode mode) const {
  const QueryKeys<T> qk = derive_qk(ctx, shared_representation(ctx, x));
  const bool want_local = mode != AttentionMode::kGlobalOnly;
  const bool want_global = mode != AttentionMode::kLocalOnly;

  AttentionOutput<T> local, global;
  if (want_local) local = local_attention(qk.q, qk.k, v, u, spec_.chunk, ctx.stats);
  if (want_global) {
    Var<T> qg = qk.q_global, kg = qk.k_global;
    if (spec_.global_qk_activation != Activation::kIdentity) {
      qg = activation(spec_.global_qk_activation, qg);
      kg = activation(spec_.global_qk_activation, kg);
    }
    global = global_attention(qg, kg, v, u);
  }
  if (!want_global) return local;
  if (!want_local) return global;
  return {add(local.v_att, global.v_att), add(local.u_att, global.u_att)};
}

#define MOSSFORMER_ATTN(T)                                                                       \
  template AttentionOutput<T> global_attention(const Var<T>&, const Var<T>&, const Var<T>&,     \
                                               const Var<T>&);                                   \
  template AttentionOutput<T> local_attention(const Var<T>&, const Var<T>&, const Var<T>&,      \
                                              const Var<T>&, std::size_t, ForwardStats*);        \
  template Var<T> JointAttention::shared_representation(const ForwardContext<T>&,               \
                                                        const Var<T>&) const;                    \
  template QueryKeys<T> JointAttention::derive_qk(const ForwardContext<T>&, const Var<T>&)      \
      const;                                                                                     \
  template AttentionOutput<T> JointAttention::forward(const ForwardContext<T>&, const Var<T>&, \
                                                      const Var<T>&, const Var<T>&) const;      \
  template AttentionOutput<T> JointAttention::forward(                                          \
      const ForwardContext<T>&, const Var<T>&, const Var<T>&, const Var<T>&, AttentionMode) const;

MOSSFORMER_ATTN(float)
MOSSFORMER_ATTN(double)

}  // namespace mossformer
