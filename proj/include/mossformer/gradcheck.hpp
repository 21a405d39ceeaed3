// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

#include "mossformer/autodiff.hpp"
#include "mossformer/config.hpp"

namespace mossformer {

/// Builds a scalar on the given tape from the given parameters.
using ScalarFn = std::function<Var<double>(Tape<double>&, ParamStore<double>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;  // scalars compared
};

/// Compares reverse-mode gradients against central differences
/// (f(p + h) - f(p - h)) / 2h for every trainable scalar, scoring each one by
/// |a - n| / max(|a|, |n|, 1e-8). Parameter values are restored afterwards and
/// the store's gradient slots hold the analytic gradient.
GradCheckResult gradient_check(const ScalarFn& f, ParamStore<double>& params, double h = 1e-5);

/// gradient_check() of the PIT loss of a freshly initialised model on one
/// synthetic mixture of `samples` samples, dropout off.
GradCheckResult model_gradient_check(const ModelConfig& config, std::size_t samples,
                                     std::uint64_t seed, double h = 1e-5);

}  // namespace mossformer
