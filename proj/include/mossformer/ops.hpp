// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable primitives.
//
// Most operations come in two flavours: a plain one over NdArray and one over
// Var that records itself on the operands' tape. Sequences are time-major
// [frames x features] unless a function says otherwise; the convolution
// primitives use channel-major [channels x length].

#pragma once

#include <string>
#include <string_view>

#include "mossformer/autodiff.hpp"
#include "mossformer/ndarray.hpp"

namespace mossformer {

enum class Activation { kRelu, kReluSquared, kSilu, kSigmoid, kGelu, kSwish, kIdentity };

/// Parses relu, relu_squared, silu, sigmoid, gelu, swish, identity (alias: bilinear).
Activation parse_activation(std::string_view name);
std::string activation_name(Activation a);

// ---- plain array operations -------------------------------------------------

template <typename T>
NdArray<T> conv1d(const NdArray<T>& x, const NdArray<T>& weight, const NdArray<T>& bias,
                  std::size_t stride);
template <typename T>
NdArray<T> transposed_conv1d(const NdArray<T>& x, const NdArray<T>& weight, std::size_t stride);
template <typename T>
NdArray<T> depthwise_conv1d(const NdArray<T>& x, const NdArray<T>& weight);
template <typename T>
NdArray<T> layer_norm(const NdArray<T>& x, const NdArray<T>& gain, const NdArray<T>& bias,
                      double eps);
template <typename T>
NdArray<T> activation(Activation kind, const NdArray<T>& x);
template <typename T>
T activation(Activation kind, T x);
template <typename T>
NdArray<T> matmul(const NdArray<T>& a, const NdArray<T>& b);
template <typename T>
NdArray<T> transpose(const NdArray<T>& a);
/// Rotary position embedding of [frames x dim] rows; row m is rotated as position m.
template <typename T>
NdArray<T> rope(const NdArray<T>& x, double base = 10000.0);

// ---- recorded operations ----------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, double s);
/// x[S x N] + row[N] broadcast over frames.
template <typename T>
Var<T> add_row(const Var<T>& x, const Var<T>& row);
/// x[S x N] * row[N] broadcast over frames.
template <typename T>
Var<T> mul_row(const Var<T>& x, const Var<T>& row);

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// a^T b for a[K x M], b[K x N].
template <typename T>
Var<T> matmul_tn(const Var<T>& a, const Var<T>& b);
/// x[S x in] weight[out x in]^T + bias[out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> transpose(const Var<T>& a);
template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape);
template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t end);
/// Appends `extra` zero columns.
template <typename T>
Var<T> pad_cols(const Var<T>& a, std::size_t extra);

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, std::size_t stride);
template <typename T>
Var<T> transposed_conv1d(const Var<T>& x, const Var<T>& weight, std::size_t stride);
template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& weight);
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps);
template <typename T>
Var<T> activation(Activation kind, const Var<T>& x);
/// Inverted dropout: zeroes with probability p and scales survivors by 1/(1-p)
/// when `train`; identity otherwise.
template <typename T>
Var<T> dropout(const Var<T>& x, double p, Rng* rng, bool train);
template <typename T>
Var<T> rope(const Var<T>& x, double base = 10000.0);

/// Chunked squared-ReLU attention: for each chunk h of `chunk` frames,
/// out_h = relu(scale * q_h k_h^T)^2 values_h. The score block of a chunk is
/// computed once and shared by every value column.
template <typename T>
Var<T> local_attention(const Var<T>& q, const Var<T>& k, const Var<T>& values, std::size_t chunk,
                       double scale, ForwardStats* stats = nullptr);

template <typename T>
Var<T> sum(const Var<T>& x);

// ---- shape helpers ----------------------------------------------------------

void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace mossformer
