// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace mossformer {

namespace {

constexpr double kDbPerNeper = 4.342944819032518277;  // 10 / ln 10

template <typename T>
std::vector<double> centred(const T* x, std::size_t n, bool zero_mean) {
  std::vector<double> out(x, x + n);
  if (zero_mean) {
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
    for (double& v : out) v -= mean;
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

template <typename T>
double si_sdr(const T* est, const T* ref, std::size_t n, const SiSdrOptions& opt, T* grad) {
  if (n == 0) throw DimensionError("si_sdr: empty signals");
  const std::vector<double> e = centred(est, n, opt.zero_mean);
  const std::vector<double> r = centred(ref, n, opt.zero_mean);
  const double rr = dot(r, r);
  if (!(rr > 0.0)) throw InvalidReferenceError("si_sdr: reference has zero energy");
  if (!std::isfinite(rr)) throw NumericalError("si_sdr: reference energy is not finite");

  const double denom = rr + opt.eps;
  const double alpha = dot(e, r) / denom;
  std::vector<double> noise(n);
  for (std::size_t i = 0; i < n; ++i) noise[i] = e[i] - alpha * r[i];
  const double target_energy = alpha * alpha * rr;
  const double noise_energy = dot(noise, noise);
  const double value = kDbPerNeper * (std::log(target_energy + opt.eps) -
                                      std::log(noise_energy + opt.eps));

  if (grad) {
    // d|t|^2/de = 2 a |r|^2 / (|r|^2 + eps) r
    // d|e - t|^2/de = 2 n - 2 <n, r> / (|r|^2 + eps) r
    const double ct = kDbPerNeper / (target_energy + opt.eps);
    const double cn = kDbPerNeper / (noise_energy + opt.eps);
    const double nr = dot(noise, r) / denom;
    const double t_coef = 2.0 * alpha * rr / denom;
    std::vector<double> g(n);
    double gmean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = ct * t_coef * r[i] - cn * (2.0 * noise[i] - 2.0 * nr * r[i]);
      gmean += g[i];
    }
    gmean = opt.zero_mean ? gmean / static_cast<double>(n) : 0.0;
    for (std::size_t i = 0; i < n; ++i) grad[i] = static_cast<T>(g[i] - gmean);
  }
  return value;
}

template <typename T>
double si_sdr(const NdArray<T>& est, const NdArray<T>& ref, const SiSdrOptions& opt) {
  if (est.size() != ref.size()) {
    throw DimensionError("si_sdr: estimate has " + std::to_string(est.size()) +
                         " samples, reference " + std::to_string(ref.size()));
  }
  return si_sdr(est.raw(), ref.raw(), est.size(), opt);
}

template <typename T>
double si_sdri(const NdArray<T>& est, const NdArray<T>& mix, const NdArray<T>& ref,
               const SiSdrOptions& opt) {
  return si_sdr(est, ref, opt) - si_sdr(mix, ref, opt);
}

template <typename T>
PitResult pit_assign(const std::vector<const T*>& ests, const std::vector<const T*>& refs,
                     std::size_t n, const SiSdrOptions& opt) {
  const std::size_t c = refs.size();
  if (c == 0 || ests.size() != c) {
    throw DimensionError("pit: " + std::to_string(ests.size()) + " estimates for " +
                         std::to_string(c) + " references");
  }
  if (c > 4) {
    throw UnsupportedError("pit: exhaustive assignment supports at most 4 speakers, got " +
                           std::to_string(c));
  }
  // score[i][j]: estimate j against reference i.
  std::vector<double> score(c * c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) score[i * c + j] = si_sdr(ests[j], refs[i], n, opt);

  std::vector<std::size_t> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best;
  double best_mean = -std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) total += score[i * c + perm[i]];
    const double mean = total / static_cast<double>(c);
    if (mean > best_mean || best.perm.empty()) {
      best_mean = mean;
      best.perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.loss = -best_mean;
  return best;
}

template <typename T>
PitResult pit_loss(const NdArray<T>& ests, const NdArray<T>& refs, const SiSdrOptions& opt) {
  require_rank(ests, 2, "pit estimates");
  require_rank(refs, 2, "pit references");
  if (ests.shape() != refs.shape()) {
    throw DimensionError("pit: estimates " + shape_string(ests.shape()) + " vs references " +
                         shape_string(refs.shape()));
  }
  const std::size_t n = refs.dim(1);
  std::vector<const T*> e, r;
  for (std::size_t i = 0; i < refs.dim(0); ++i) {
    e.push_back(ests.raw() + i * n);
    r.push_back(refs.raw() + i * n);
  }
  return pit_assign(e, r, n, opt);
}

template <typename T>
Var<T> si_sdr(const Var<T>& est, const NdArray<T>& ref, const SiSdrOptions& opt) {
  if (est.value().size() != ref.size()) {
    throw DimensionError("si_sdr: estimate " + shape_string(est.shape()) + " vs reference " +
                         shape_string(ref.shape()));
  }
  const std::size_t n = ref.size();
  auto grad = std::make_shared<NdArray<T>>(est.shape());
  const double value = si_sdr(est.value().raw(), ref.raw(), n, opt, grad->raw());
  if (!std::isfinite(value)) throw NumericalError("si_sdr: non-finite value");
  return est.tape()->record("si_sdr", NdArray<T>({1}, T(value)), {est},
                            [est, grad](const NdArray<T>& g) {
                              if (!est.requires_grad()) return;
                              auto& dx = est.grad_buffer();
                              const T s = g[0];
                              for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += s * (*grad)[i];
                            });
}

template <typename T>
Var<T> pit_loss(const std::vector<Var<T>>& ests, const NdArray<T>& refs, const SiSdrOptions& opt,
                PitResult* assignment) {
  require_rank(refs, 2, "pit references");
  const std::size_t c = refs.dim(0), n = refs.dim(1);
  if (ests.size() != c) {
    throw DimensionError("pit: " + std::to_string(ests.size()) + " estimates for " +
                         std::to_string(c) + " references");
  }
  std::vector<const T*> e, r;
  for (std::size_t i = 0; i < c; ++i) {
    if (ests[i].value().size() != n) {
      throw DimensionError("pit: estimate " + std::to_string(i) + " has " +
                           std::to_string(ests[i].value().size()) + " samples, expected " +
                           std::to_string(n));
    }
    e.push_back(ests[i].value().raw());
    r.push_back(refs.raw() + i * n);
  }
  const PitResult best = pit_assign(e, r, n, opt);
  if (assignment) *assignment = best;

  Var<T> total;
  for (std::size_t i = 0; i < c; ++i) {
    NdArray<T> ref({n}, std::vector<T>(r[i], r[i] + n));
    Var<T> term = si_sdr(ests[best.perm[i]], ref, opt);
    total = i == 0 ? term : add(total, term);
  }
  return scale(total, -1.0 / static_cast<double>(c));
}

#define MOSSFORMER_LOSS(T)                                                                        \
  template double si_sdr(const T*, const T*, std::size_t, const SiSdrOptions&, T*);               \
  template double si_sdr(const NdArray<T>&, const NdArray<T>&, const SiSdrOptions&);              \
  template double si_sdri(const NdArray<T>&, const NdArray<T>&, const NdArray<T>&,                \
                          const SiSdrOptions&);                                                   \
  template PitResult pit_assign(const std::vector<const T*>&, const std::vector<const T*>&,       \
                                std::size_t, const SiSdrOptions&);                                \
  template PitResult pit_loss(const NdArray<T>&, const NdArray<T>&, const SiSdrOptions&);         \
  template Var<T> si_sdr(const Var<T>&, const NdArray<T>&, const SiSdrOptions&);                  \
  template Var<T> pit_loss(const std::vector<Var<T>>&, const NdArray<T>&, const SiSdrOptions&,    \
                           PitResult*);

MOSSFORMER_LOSS(float)
MOSSFORMER_LOSS(double)

}  // namespace mossformer
