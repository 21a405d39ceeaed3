// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// SI-SDR, SI-SDR improvement and permutation-invariant assignment.

#pragma once

#include <vector>

#include "mossformer/ops.hpp"

namespace mossformer {

struct SiSdrOptions {
  double eps = 1e-8;
  bool zero_mean = true;  // remove the mean of both signals first
};

/// 10 log10((|t|^2 + eps) / (|e|^2 + eps)) with t = a ref, a = <est, ref>/(|ref|^2 + eps),
/// e = est - t. Throws InvalidReferenceError for a zero (or, when centring, constant)
/// reference. When `grad` is non-null it receives d(si_sdr)/d(est).
template <typename T>
double si_sdr(const T* est, const T* ref, std::size_t n, const SiSdrOptions& opt = {},
              T* grad = nullptr);

template <typename T>
double si_sdr(const NdArray<T>& est, const NdArray<T>& ref, const SiSdrOptions& opt = {});

/// si_sdr(est, ref) - si_sdr(mix, ref).
template <typename T>
double si_sdri(const NdArray<T>& est, const NdArray<T>& mix, const NdArray<T>& ref,
               const SiSdrOptions& opt = {});

struct PitResult {
  double loss = 0.0;          // -mean SI-SDR of the best assignment
  std::vector<std::size_t> perm;  // perm[i]: estimate assigned to reference i
};

/// Exhaustive search over assignments (C <= 4). Ties go to the
/// lexicographically smallest permutation.
template <typename T>
PitResult pit_assign(const std::vector<const T*>& ests, const std::vector<const T*>& refs,
                     std::size_t n, const SiSdrOptions& opt = {});

/// Rows of [C x T] arrays as estimates and references.
template <typename T>
PitResult pit_loss(const NdArray<T>& ests, const NdArray<T>& refs, const SiSdrOptions& opt = {});

/// Recorded SI-SDR of est [1 x T] against a fixed reference; a scalar Var.
template <typename T>
Var<T> si_sdr(const Var<T>& est, const NdArray<T>& ref, const SiSdrOptions& opt = {});

/// Differentiable PIT loss: -mean_i si_sdr(ests[perm[i]], refs[i]) for the best perm.
/// `refs` is [C x T]; `assignment` (optional) receives the chosen permutation.
template <typename T>
Var<T> pit_loss(const std::vector<Var<T>>& ests, const NdArray<T>& refs,
                const SiSdrOptions& opt = {}, PitResult* assignment = nullptr);

}  // namespace mossformer
