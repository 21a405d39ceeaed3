// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mossformer/autodiff.hpp"

namespace mossformer {

enum class Init { kZeros, kOnes, kUniform };

/// A parameter a module will look up by name, with its initialization rule.
struct ParamDecl {
  std::string name;
  Shape shape;
  Init init = Init::kZeros;
  double bound = 0.0;  // kUniform draws from [-bound, bound)
};

using ParamList = std::vector<ParamDecl>;

inline std::size_t scalar_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += shape_size(p.shape);
  return n;
}

/// Adds every declared parameter to `store`, drawing uniform values from `rng`
/// in declaration order.
template <typename T>
void initialize(const ParamList& params, ParamStore<T>& store, Rng& rng) {
  for (const auto& p : params) {
    NdArray<T> v(p.shape);
    switch (p.init) {
      case Init::kZeros:
        break;
      case Init::kOnes:
        v.fill(T{1});
        break;
      case Init::kUniform:
        for (std::size_t i = 0; i < v.size(); ++i) {
          const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
          v[i] = static_cast<T>((2.0 * u - 1.0) * p.bound);
        }
        break;
    }
    store.add(p.name, std::move(v));
  }
}

}  // namespace mossformer
