// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>

#include "mossformer/autodiff.hpp"

namespace mossformer {

struct AdamConfig {
  double lr = 15e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments:
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Moments are kept per parameter name and created on first use.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return t_; }

  /// One update of every trainable parameter from its gradient slot.
  void step(ParamStore<T>& params);

  ParamStore<T>& first_moment() { return m_; }
  ParamStore<T>& second_moment() { return v_; }
  const ParamStore<T>& first_moment() const { return m_; }
  const ParamStore<T>& second_moment() const { return v_; }
  void restore(std::uint64_t steps, ParamStore<T> m, ParamStore<T> v);

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  ParamStore<T> m_, v_;
};

/// L2 norm over every trainable gradient.
template <typename T>
double grad_norm(const ParamStore<T>& params);

/// Rescales all trainable gradients so their global L2 norm is at most
/// `max_norm`; returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm);

/// Holds the learning rate for `hold` epochs, then multiplies it by `decay`
/// each time the monitored loss has not improved for `patience` epochs.
class PlateauSchedule {
 public:
  PlateauSchedule(std::size_t hold, std::size_t patience, double decay)
      : hold_(hold), patience_(patience), decay_(decay) {}

  /// Learning rate to use after epoch `epoch` (1-based) ended with `loss`.
  double update(std::size_t epoch, double loss, double lr);

 private:
  std::size_t hold_, patience_;
  double decay_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
};

}  // namespace mossformer
