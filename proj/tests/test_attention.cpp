// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "mossformer/joint_attention.hpp"
#include "oracles.hpp"

using namespace mossformer;

namespace {

struct Harness {
  Tape<double> tape{false};
  ParamStore<double> params;
  ForwardContext<double> ctx{tape, params};

  Var<double> constant(const NdArray<double>& a) { return tape.constant(a); }
};

// Random parameters, including the per-dimension scales and offsets.
ParamStore<double> random_params(const ParamList& list, std::uint64_t seed) {
  ParamStore<double> store;
  Rng rng(seed);
  initialize(list, store, rng);
  std::uint64_t s = seed * 1000;
  for (auto& [name, e] : store.entries()) {
    const auto r = oracle::random(e.value.shape(), ++s, 0.5);
    for (std::size_t i = 0; i < r.size(); ++i) e.value[i] += r[i];
  }
  return store;
}

}  // namespace

TEST_CASE("chunked local attention equals the dense oracle for V and U") {
  for (std::size_t S : {8ul, 21ul, 64ul}) {
    const std::size_t P = 8, D = 4, W = 8;
    Harness h;
    const auto q = oracle::random({S, D}, 1), k = oracle::random({S, D}, 2),
               v = oracle::random({S, W}, 3), u = oracle::random({S, W}, 4);
    ForwardStats stats;
    const auto out =
        local_attention(h.constant(q), h.constant(k), h.constant(v), h.constant(u), P, &stats);
    CAPTURE(S);
    CHECK(oracle::max_abs_diff(out.v_att.value(), oracle::local_attention(q, k, v, P, 1.0 / P)) < 1e-12);
    CHECK(oracle::max_abs_diff(out.u_att.value(), oracle::local_attention(q, k, u, P, 1.0 / P)) < 1e-12);
    // One score block per chunk, shared by both value streams.
    CHECK(stats.chunk_score_blocks == (S + P - 1) / P);
  }
}

TEST_CASE("global attention is the associative rewrite of the dense product") {
  const std::size_t S = 64, D = 8, W = 16;
  Harness h;
  const auto q = oracle::random({S, D}, 5), k = oracle::random({S, D}, 6),
             v = oracle::random({S, W}, 7), u = oracle::random({S, W}, 8);
  const auto out = global_attention(h.constant(q), h.constant(k), h.constant(v), h.constant(u));
  const auto want_v = oracle::global_attention(q, k, v, 1.0 / S);
  const auto want_u = oracle::global_attention(q, k, u, 1.0 / S);
  CHECK(oracle::max_abs_diff(out.v_att.value(), want_v) <= 1e-12 * oracle::max_abs(want_v));
  CHECK(oracle::max_abs_diff(out.u_att.value(), want_u) <= 1e-12 * oracle::max_abs(want_u));
}

TEST_CASE("local attention ignores frames outside the chunk") {
  const std::size_t S = 16, P = 8, D = 4, W = 3;
  Harness h;
  auto q = oracle::random({S, D}, 9), k = oracle::random({S, D}, 10), v = oracle::random({S, W}, 11);
  const auto before = local_attention(h.constant(q), h.constant(k), h.constant(v), h.constant(v), P);
  for (std::size_t c = 0; c < W; ++c) v(12, c) += 100.0;  // second chunk only
  const auto after = local_attention(h.constant(q), h.constant(k), h.constant(v), h.constant(v), P);
  for (std::size_t i = 0; i < P * W; ++i) CHECK(before.v_att.value()[i] == after.v_att.value()[i]);
}

TEST_CASE("joint attention output is exactly local plus global") {
  const AttentionSpec spec{16, 8, 8, 7, 0.0, 1e-5, 10000.0, false, AttentionMode::kJoint,
                           Activation::kIdentity};
  const JointAttention attn("attn", spec);
  ParamList list;
  attn.declare(list);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Tape<double> tape(false);
    ParamStore<double> params = random_params(list, seed);
    ForwardContext<double> ctx{tape, params};
    const std::size_t S = 19 + seed;
    const auto x = tape.constant(oracle::random({S, 16}, seed + 100));
    const auto v = tape.constant(oracle::random({S, 32}, seed + 200));
    const auto u = tape.constant(oracle::random({S, 32}, seed + 300));
    const auto joint = attn.forward(ctx, x, v, u, AttentionMode::kJoint);
    const auto local = attn.forward(ctx, x, v, u, AttentionMode::kLocalOnly);
    const auto global = attn.forward(ctx, x, v, u, AttentionMode::kGlobalOnly);
    bool exact = true;
    for (std::size_t i = 0; i < joint.v_att.value().size(); ++i) {
      exact = exact && joint.v_att.value()[i] == local.v_att.value()[i] + global.v_att.value()[i];
      exact = exact && joint.u_att.value()[i] == local.u_att.value()[i] + global.u_att.value()[i];
    }
    CAPTURE(seed);
    CHECK(exact);
  }
}

TEST_CASE("query/key derivation is affine then rotary") {
  const AttentionSpec spec{12, 6, 4, 5, 0.0, 1e-5, 10000.0, false, AttentionMode::kJoint,
                           Activation::kIdentity};
  const JointAttention attn("a", spec);
  ParamList list;
  attn.declare(list);
  Tape<double> tape(false);
  ParamStore<double> params = random_params(list, 3);
  ForwardContext<double> ctx{tape, params};
  const auto z = oracle::random({10, 6}, 4);
  const auto qk = attn.derive_qk(ctx, tape.constant(z));
  const auto& sc = params.at("a.scale.q_global").value;
  const auto& of = params.at("a.offset.q_global").value;
  NdArray<double> affine(z.shape());
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 6; ++c) affine(r, c) = z(r, c) * sc[c] + of[c];
  CHECK(oracle::max_abs_diff(qk.q_global.value(), oracle::rope(affine, 10000.0)) < 1e-12);
}

TEST_CASE("attention rejects mismatched streams and odd dimensions") {
  Harness h;
  const auto q = h.constant(oracle::random({8, 4}, 1));
  const auto v = h.constant(oracle::random({8, 6}, 2));
  const auto u_bad = h.constant(oracle::random({8, 5}, 3));
  CHECK_THROWS_AS(local_attention(q, q, v, u_bad, 4), DimensionError);
  CHECK_THROWS_AS(global_attention(q, q, v, u_bad), DimensionError);
  const AttentionSpec odd{8, 5, 4, 3, 0.0, 1e-5, 10000.0, false, AttentionMode::kJoint,
                          Activation::kIdentity};
  CHECK_THROWS_AS(JointAttention("x", odd), ConfigError);
  CHECK(parse_attention_mode("local_only") == AttentionMode::kLocalOnly);
  CHECK_THROWS_AS(parse_attention_mode("both"), ConfigError);
}
