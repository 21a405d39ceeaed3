// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/synth.hpp"

#include <cmath>
#include <numbers>

#include "mossformer/autodiff.hpp"

namespace mossformer {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

// Box-Muller on our own uniforms keeps the data identical across standard libraries.
double gaussian(Rng& rng) {
  const double u1 = 1.0 - uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double rms(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(n));
}

}  // namespace

std::vector<Example> synth_dataset(std::uint64_t seed, std::size_t count, std::size_t C,
                                   std::size_t T, std::uint32_t sample_rate) {
  if (C < 1 || C > 4) throw ConfigError("synth_dataset: C must be in [1, 4]");
  if (T < 2) throw ConfigError("synth_dataset: T must be >= 2");
  Rng rng(seed);
  const double nyquist = 0.5 * sample_rate;
  const double slice = 0.95 * nyquist / static_cast<double>(C);
  const double noise_gain = std::pow(10.0, -30.0 / 20.0);

  std::vector<Example> data;
  data.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    Example ex;
    ex.sources = NdArray<double>({C, T});
    ex.mixture = NdArray<double>({T});
    for (std::size_t c = 0; c < C; ++c) {
      const double lo = slice * static_cast<double>(c);
      const double hi = lo + slice;
      // Partials sit at lo + k * f0 inside the speaker's slice of the spectrum
      // (a plain harmonic series for the lowest slice). Each speaker draws f0
      // from its own band.
      const double band = 0.15 * slice / static_cast<double>(C);
      const double f0 = uniform(rng, 0.05 * slice + band * c, 0.05 * slice + band * (c + 1));
      ex.fundamentals.push_back(f0);
      const double env_rate = uniform(rng, 0.5, 3.0);
      const double env_phase = uniform(rng, 0.0, kTwoPi);
      const double gain = uniform(rng, 0.05, 0.2);

      double* s = ex.sources.raw() + c * T;
      for (std::size_t k = 1; lo + k * f0 < hi && k <= 12; ++k) {
        const double amp = uniform(rng, 0.3, 1.0) / static_cast<double>(k);
        const double phase = uniform(rng, 0.0, kTwoPi);
        const double w = kTwoPi * (lo + static_cast<double>(k) * f0) / sample_rate;
        for (std::size_t t = 0; t < T; ++t) s[t] += amp * std::sin(w * static_cast<double>(t) + phase);
      }
      for (std::size_t t = 0; t < T; ++t) {
        const double env = 0.6 + 0.4 * std::sin(kTwoPi * env_rate * t / sample_rate + env_phase);
        s[t] *= env;
      }
      const double tonal = rms(s, T);
      const double scale = tonal > 0.0 ? gain / tonal : 0.0;
      for (std::size_t t = 0; t < T; ++t) s[t] = s[t] * scale + gain * noise_gain * gaussian(rng);
    }
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t) ex.mixture[t] += ex.sources(c, t);
    data.push_back(std::move(ex));
  }
  return data;
}

}  // namespace mossformer
