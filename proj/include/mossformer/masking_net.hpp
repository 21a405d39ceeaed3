// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "mossformer/config.hpp"
#include "mossformer/mossformer_block.hpp"

namespace mossformer {

/// Sinusoidal absolute encodings [frames x dim]:
/// pe[m, 2j] = sin(m / 10000^(2j/dim)), pe[m, 2j+1] = cos(same angle).
template <typename T>
NdArray<T> positional_encoding(std::size_t frames, std::size_t dim);

/// Maps encoded features to per-speaker masks:
///
///   y = in_pw(layer_norm(x) + PE)
///   y = block_R(... block_1(y))
///   y = expand_pw(relu(y))                      [S x C*N]
///   y = glu_a(y) * sigmoid(glu_b(y))
///   M = relu(out_pw(y))
///
/// Pointwise convolutions are per-frame linear maps with bias. Column c*N + n
/// of M is feature n of speaker c.
class MaskingNet {
 public:
  explicit MaskingNet(const ModelConfig& config);

  const std::vector<MossFormerBlock>& blocks() const { return blocks_; }
  void declare(ParamList& params) const;

  /// x: encoder output, time-major [S x N]. Returns masks [S x C*N].
  template <typename T>
  Var<T> forward(const ForwardContext<T>& ctx, const Var<T>& x) const;

 private:
  std::size_t N_;
  std::size_t C_;
  double norm_eps_;
  std::vector<MossFormerBlock> blocks_;
};

}  // namespace mossformer
