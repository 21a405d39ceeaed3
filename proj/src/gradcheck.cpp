// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mossformer/loss.hpp"
#include "mossformer/model.hpp"
#include "mossformer/synth.hpp"

namespace mossformer {

namespace {

double evaluate(const ScalarFn& f, ParamStore<double>& params, const std::string& name,
                std::size_t index) {
  Tape<double> tape(false);
  const Var<double> y = f(tape, params);
  if (y.value().size() != 1) {
    throw DimensionError("gradient_check: function returned " + shape_string(y.shape()));
  }
  const double v = y.value()[0];
  if (!std::isfinite(v)) {
    throw NumericalError("gradient_check: non-finite value while perturbing '" + name + "'[" +
                         std::to_string(index) + "]");
  }
  return v;
}

}  // namespace

GradCheckResult gradient_check(const ScalarFn& f, ParamStore<double>& params, double h) {
  if (!(h >= 1e-6 && h <= 1e-4)) {
    throw ConfigError("gradient_check: step " + std::to_string(h) + " outside [1e-6, 1e-4]");
  }
  params.zero_grad();
  {
    Tape<double> tape;
    const Var<double> y = f(tape, params);
    if (!std::isfinite(y.value()[0])) throw NumericalError("gradient_check: non-finite value");
    tape.backward(y);
  }

  GradCheckResult r;
  for (auto& [name, entry] : params.entries()) {
    if (!entry.trainable) continue;
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double analytic = entry.grad[i];
      if (!std::isfinite(analytic)) {
        throw NumericalError("gradient_check: non-finite gradient for '" + name + "'[" +
                             std::to_string(i) + "]");
      }
      const double saved = entry.value[i];
      entry.value[i] = saved + h;
      const double up = evaluate(f, params, name, i);
      entry.value[i] = saved - h;
      const double down = evaluate(f, params, name, i);
      entry.value[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      ++r.checked;
      if (err > r.max_rel_error || r.worst_param.empty()) {
        r.max_rel_error = err;
        r.worst_param = name;
        r.worst_index = i;
        r.worst_analytic = analytic;
        r.worst_numeric = numeric;
      }
    }
  }
  return r;
}

GradCheckResult model_gradient_check(const ModelConfig& config, std::size_t samples,
                                     std::uint64_t seed, double h) {
  const Model model(config);
  ParamStore<double> params = model.init<double>(seed);
  const Example ex = synth_dataset(seed, 1, config.C, samples, config.sample_rate).front();
  const NdArray<double> mixture = ex.mixture.reshaped({1, samples});
  return gradient_check(
      [&](Tape<double>& tape, ParamStore<double>& ps) {
        ForwardContext<double> ctx{tape, ps};
        return pit_loss(model.forward(ctx, tape.constant(mixture)).estimates, ex.sources);
      },
      params, h);
}

}  // namespace mossformer
