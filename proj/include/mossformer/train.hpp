// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mossformer/checkpoint.hpp"
#include "mossformer/model.hpp"
#include "mossformer/synth.hpp"

namespace mossformer {

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// `epoch=<e> lr=<v> train_loss=<v> val_loss=<v>`
std::string format_epoch_log(const EpochLog& log);

template <typename T>
struct TrainResult {
  Checkpoint<T> best;  // state after the epoch with the lowest validation loss
  Checkpoint<T> last;  // state when training stopped
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;  // loss of every optimizer step, before the update
  std::size_t steps = 0;
  double best_val_loss = 0.0;
};

/// Number of trailing examples held out for validation.
std::size_t validation_count(std::size_t examples, double fraction);

/// PIT SI-SDR training with Adam, global gradient-norm clipping and a
/// hold-then-plateau learning-rate schedule. Examples after the training
/// split form the validation set; without one, the training loss stands in.
/// Writes one format_epoch_log() line per epoch to `log` when given.
/// `resume` continues from a saved state. Throws NumericalError (with epoch,
/// batch and parameter norms) on a non-finite loss or gradient.
template <typename T>
TrainResult<T> train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                     const std::vector<Example>& data, std::ostream* log = nullptr,
                     const Checkpoint<T>* resume = nullptr);

/// Mean PIT loss over `data` in eval mode.
template <typename T>
double evaluate_loss(const Model& model, ParamStore<T>& params, const std::vector<Example>& data);

/// Mean SI-SDRi over `data` in eval mode, each estimate scored against the
/// reference PIT assigns it to.
template <typename T>
double evaluate_si_sdri(const Model& model, ParamStore<T>& params,
                        const std::vector<Example>& data);

}  // namespace mossformer
