// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Joint local/global single-head self-attention.
//
// A shared representation Z = ConvM(x) of width D is turned into four
// query/key tensors by per-dimension scale and offset followed by RoPE:
// Q, K feed the chunked quadratic attention, Q', K' the linearized global
// attention. Both branches act on the value streams V and U and are summed.

#pragma once

#include <string>
#include <utility>

#include "mossformer/conv_module.hpp"
#include "mossformer/ops.hpp"

namespace mossformer {

enum class AttentionMode { kJoint, kLocalOnly, kGlobalOnly };

AttentionMode parse_attention_mode(std::string_view name);
std::string attention_mode_name(AttentionMode m);

/// Chunk layout of a sequence: H = ceil(S / P) chunks, the last one padded by `pad` frames.
struct ChunkPlan {
  std::size_t frames = 0;
  std::size_t chunk = 0;
  std::size_t chunks = 0;
  std::size_t pad = 0;

  static ChunkPlan make(std::size_t frames, std::size_t chunk);
};

struct AttentionSpec {
  std::size_t model_dim = 0;  // N
  std::size_t attn_dim = 0;   // D
  std::size_t chunk = 0;      // P
  std::size_t kernel = 0;     // K2 of the Z convolution module
  double dropout = 0.0;
  double norm_eps = 1e-5;
  double rope_base = 10000.0;
  bool dense_qk = false;
  AttentionMode mode = AttentionMode::kJoint;
  /// Applied to Q' and K' before the global product. Identity keeps the
  /// global branch bilinear, exactly as the linearized form is written.
  Activation global_qk_activation = Activation::kIdentity;
};

template <typename T>
struct QueryKeys {
  Var<T> q, k;                // local branch
  Var<T> q_global, k_global;  // global branch
};

template <typename T>
struct AttentionOutput {
  Var<T> v_att;  // V'
  Var<T> u_att;  // U'
};

/// V'_g = Q' (beta K'^T V), U'_g = Q' (beta K'^T U), beta = 1/S. K'^T V is
/// formed first, so no [S x S] intermediate exists.
template <typename T>
AttentionOutput<T> global_attention(const Var<T>& q_global, const Var<T>& k_global,
                                    const Var<T>& v, const Var<T>& u);

/// Chunked relu^2 attention with gamma = 1/P; one score block per chunk shared by V and U.
template <typename T>
AttentionOutput<T> local_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                                   const Var<T>& u, std::size_t chunk,
                                   ForwardStats* stats = nullptr);

/// Parameters: `<prefix>.z.*` (ConvM N -> D), `<prefix>.scale.{q,k,q_global,k_global}`,
/// `<prefix>.offset.{q,k,q_global,k_global}`.
class JointAttention {
 public:
  JointAttention(std::string prefix, AttentionSpec spec);

  const AttentionSpec& spec() const { return spec_; }
  void declare(ParamList& params) const;

  template <typename T>
  Var<T> shared_representation(const ForwardContext<T>& ctx, const Var<T>& x) const;

  template <typename T>
  QueryKeys<T> derive_qk(const ForwardContext<T>& ctx, const Var<T>& z) const;

  /// (V', U') for the configured mode.
  template <typename T>
  AttentionOutput<T> forward(const ForwardContext<T>& ctx, const Var<T>& x, const Var<T>& v,
                             const Var<T>& u) const;

  /// Same, with an explicit mode (ablation runs and tests).
  template <typename T>
  AttentionOutput<T> forward(const ForwardContext<T>& ctx, const Var<T>& x, const Var<T>& v,
                             const Var<T>& u, AttentionMode mode) const;

 private:
  std::string prefix_;
  AttentionSpec spec_;
  ConvModule z_;
};

}  // namespace mossformer
