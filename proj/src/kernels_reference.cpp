// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels. Each loop nest follows its defining formula
// directly; these are the ground truth the parallel kernels are tested against.

#include <algorithm>
#include <atomic>
#include <vector>

#include "kernels_instantiate.inc"
#include "mossformer/kernels.hpp"

namespace mossformer::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::kParallel};
}  // namespace

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

std::size_t local_attention_score_size(const LocalAttentionShape& s) {
  const std::size_t full = s.rows / s.chunk;
  const std::size_t tail = s.rows % s.chunk;
  return full * s.chunk * s.chunk + tail * tail;
}

namespace reference {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void conv1d(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
            std::size_t stride, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t lout = (len - kernel) / stride + 1;
  for (std::size_t c = 0; c < cout; ++c) {
    for (std::size_t t = 0; t < lout; ++t) {
      T acc = bias ? bias[c] : T{0};
      for (std::size_t i = 0; i < cin; ++i)
        for (std::size_t q = 0; q < kernel; ++q)
          acc += w[(c * cin + i) * kernel + q] * x[i * len + t * stride + q];
      y[c * lout + t] = acc;
    }
  }
}

template <typename T>
void conv1d_weight_grad(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
                        std::size_t stride, const T* g, const T* x, T* dw) {
  const std::size_t lout = (len - kernel) / stride + 1;
  for (std::size_t c = 0; c < cout; ++c)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t q = 0; q < kernel; ++q) {
        T acc = dw[(c * cin + i) * kernel + q];
        for (std::size_t t = 0; t < lout; ++t) acc += g[c * lout + t] * x[i * len + t * stride + q];
        dw[(c * cin + i) * kernel + q] = acc;
      }
}

template <typename T>
void transposed_conv1d(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
                       std::size_t stride, const T* x, const T* w, T* y) {
  const std::size_t lout = (len - 1) * stride + kernel;
  for (std::size_t i = 0; i < cin; ++i)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t q = 0; q < kernel; ++q)
          y[o * lout + t * stride + q] += x[i * len + t] * w[(i * cout + o) * kernel + q];
}

template <typename T>
void depthwise_conv1d(std::size_t channels, std::size_t len, std::size_t kernel, const T* x,
                      const T* w, T* y) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel - 1) / 2;
  const auto L = static_cast<std::ptrdiff_t>(len);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::ptrdiff_t t = 0; t < L; ++t) {
      T acc{0};
      for (std::size_t q = 0; q < kernel; ++q) {
        const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(q) - pad;
        if (src >= 0 && src < L) acc += w[c * kernel + q] * x[c * len + src];
      }
      y[c * len + t] = acc;
    }
}

template <typename T>
void depthwise_conv1d_backward(std::size_t channels, std::size_t len, std::size_t kernel,
                               const T* x, const T* w, const T* g, T* dx, T* dw) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel - 1) / 2;
  const auto L = static_cast<std::ptrdiff_t>(len);
  std::fill(dx, dx + channels * len, T{0});
  std::fill(dw, dw + channels * kernel, T{0});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::ptrdiff_t t = 0; t < L; ++t)
      for (std::size_t q = 0; q < kernel; ++q) {
        const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(q) - pad;
        if (src < 0 || src >= L) continue;
        dx[c * len + src] += w[c * kernel + q] * g[c * len + t];
        dw[c * kernel + q] += x[c * len + src] * g[c * len + t];
      }
}

template <typename T>
std::size_t local_attention(const LocalAttentionShape& s, const T* q, const T* k, const T* values,
                            T* out, T* scores) {
  const T scale = static_cast<T>(s.scale);
  std::size_t blocks = 0;
  std::size_t score_offset = 0;
  std::vector<T> a;
  for (std::size_t begin = 0; begin < s.rows; begin += s.chunk, ++blocks) {
    const std::size_t n = std::min(s.chunk, s.rows - begin);
    a.assign(n * n, T{0});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        T dot{0};
        for (std::size_t d = 0; d < s.dim; ++d)
          dot += q[(begin + i) * s.dim + d] * k[(begin + j) * s.dim + d];
        const T pre = scale * dot;
        if (scores) scores[score_offset + i * n + j] = pre;
        const T r = pre > T{0} ? pre : T{0};
        a[i * n + j] = r * r;
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t w = 0; w < s.width; ++w) {
        T acc{0};
        for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * values[(begin + j) * s.width + w];
        out[(begin + i) * s.width + w] = acc;
      }
    score_offset += n * n;
  }
  return blocks;
}

template <typename T>
void local_attention_backward(const LocalAttentionShape& s, const T* q, const T* k,
                              const T* values, const T* scores, const T* dout, T* dq, T* dk,
                              T* dvalues) {
  const T scale = static_cast<T>(s.scale);
  std::fill(dq, dq + s.rows * s.dim, T{0});
  std::fill(dk, dk + s.rows * s.dim, T{0});
  std::fill(dvalues, dvalues + s.rows * s.width, T{0});
  std::size_t score_offset = 0;
  for (std::size_t begin = 0; begin < s.rows; begin += s.chunk) {
    const std::size_t n = std::min(s.chunk, s.rows - begin);
    const T* pre = scores + score_offset;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const T r = pre[i * n + j] > T{0} ? pre[i * n + j] : T{0};
        // d out_i / d values_j = a_ij
        T da{0};
        for (std::size_t w = 0; w < s.width; ++w) {
          dvalues[(begin + j) * s.width + w] += r * r * dout[(begin + i) * s.width + w];
          da += dout[(begin + i) * s.width + w] * values[(begin + j) * s.width + w];
        }
        const T ds = da * T{2} * r * scale;
        for (std::size_t d = 0; d < s.dim; ++d) {
          dq[(begin + i) * s.dim + d] += ds * k[(begin + j) * s.dim + d];
          dk[(begin + j) * s.dim + d] += ds * q[(begin + i) * s.dim + d];
        }
      }
    score_offset += n * n;
  }
}

MOSSFORMER_INSTANTIATE(float)
MOSSFORMER_INSTANTIATE(double)

}  // namespace reference
}  // namespace mossformer::kernels
