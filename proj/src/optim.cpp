// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/optim.hpp"

#include <cmath>

namespace mossformer {

template <typename T>
void Adam<T>::step(ParamStore<T>& params) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    if (!m_.contains(name)) {
      m_.add(name, NdArray<T>(e.value.shape()));
      v_.add(name, NdArray<T>(e.value.shape()));
    }
    NdArray<T>& m = m_.at(name).value;
    NdArray<T>& v = v_.at(name).value;
    if (m.shape() != e.value.shape()) {
      throw DimensionError("adam: moment shape for '" + name + "' does not match the parameter");
    }
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
      e.value[i] = static_cast<T>(e.value[i] - update);
    }
  }
}

template <typename T>
void Adam<T>::restore(std::uint64_t steps, ParamStore<T> m, ParamStore<T> v) {
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template <typename T>
double grad_norm(const ParamStore<T>& params) {
  double sq = 0.0;
  for (const auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.grad.size(); ++i) {
      const double g = e.grad[i];
      sq += g * g;
    }
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_grad_norm: max_norm must be > 0");
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, e] : params.entries()) {
      if (!e.trainable) continue;
      for (std::size_t i = 0; i < e.grad.size(); ++i) e.grad[i] = static_cast<T>(e.grad[i] * f);
    }
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double grad_norm(const ParamStore<float>&);
template double grad_norm(const ParamStore<double>&);
template double clip_grad_norm(ParamStore<float>&, double);
template double clip_grad_norm(ParamStore<double>&, double);

double PlateauSchedule::update(std::size_t epoch, double loss, double lr) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
  } else if (epoch > hold_ && ++bad_epochs_ >= patience_) {
    bad_epochs_ = 0;
    return lr * decay_;
  }
  return lr;
}

}  // namespace mossformer
