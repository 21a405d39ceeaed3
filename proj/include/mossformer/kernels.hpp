// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Compute kernels on contiguous row-major buffers.
//
// Every kernel exists twice: `reference::` holds the plain loop nest that
// reads like the defining formula, `parallel::` holds the blocked, OpenMP
// version used by default. Parallel kernels split work only across
// independent outputs, so their results do not depend on the thread count.
// The two namespaces agree up to floating-point reassociation; the unit tests
// and the benchmark target compare them directly.

#pragma once

#include <cstddef>

namespace mossformer::kernels {

enum class Backend { kReference, kParallel };

void set_backend(Backend b);
Backend backend();

/// Selects a backend for the lifetime of the object.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : saved_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(saved_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend saved_;
};

/// Shape of one chunked squared-ReLU attention problem.
///
/// q, k are [rows x dim]; values and out are [rows x width]. Rows are cut into
/// consecutive chunks of `chunk` rows (the last one may be short, which is the
/// same as zero padding it). Scores inside a chunk are relu(scale * q k^T)^2.
struct LocalAttentionShape {
  std::size_t rows;
  std::size_t dim;
  std::size_t width;
  std::size_t chunk;
  double scale;
};

#define MOSSFORMER_KERNEL_DECLS                                                                   \
  /* c[m x n] (+)= a[m x k] * b[k x n] */                                                         \
  template <typename T>                                                                           \
  void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,         \
               bool accumulate);                                                                  \
  /* c[m x n] (+)= a[m x k] * b[n x k]^T */                                                       \
  template <typename T>                                                                           \
  void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,         \
               bool accumulate);                                                                  \
  /* c[m x n] (+)= a[k x m]^T * b[k x n] */                                                       \
  template <typename T>                                                                           \
  void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,         \
               bool accumulate);                                                                  \
  /* y[cout x lout] = bias + sum_{i,k} w[c,i,k] x[i, t*stride + k]; bias may be null */           \
  template <typename T>                                                                           \
  void conv1d(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,             \
              std::size_t stride, const T* x, const T* w, const T* bias, T* y);                   \
  /* dw[c,i,k] (+)= sum_t g[c,t] x[i, t*stride + k]; g is [cout x lout] */                        \
  template <typename T>                                                                           \
  void conv1d_weight_grad(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel, \
                          std::size_t stride, const T* g, const T* x, T* dw);                     \
  /* y[cout x (len-1)*stride+kernel] += x[i,t] w[i,o,k] at t*stride + k; y is accumulated */      \
  template <typename T>                                                                           \
  void transposed_conv1d(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel, \
                         std::size_t stride, const T* x, const T* w, T* y);                       \
  /* same-length depthwise correlation, zero padding (kernel-1)/2 on both sides */                \
  template <typename T>                                                                           \
  void depthwise_conv1d(std::size_t channels, std::size_t len, std::size_t kernel, const T* x,    \
                        const T* w, T* y);                                                        \
  template <typename T>                                                                           \
  void depthwise_conv1d_backward(std::size_t channels, std::size_t len, std::size_t kernel,       \
                                 const T* x, const T* w, const T* g, T* dx, T* dw);               \
  /* Chunked squared-ReLU attention. When `scores` is non-null it receives the pre-activation   \
     scale*q k^T of every chunk, packed chunk after chunk as [chunk_rows x chunk_rows]. Returns   \
     the number of chunk score blocks evaluated. */                                               \
  template <typename T>                                                                           \
  std::size_t local_attention(const LocalAttentionShape& s, const T* q, const T* k,               \
                              const T* values, T* out, T* scores);                                \
  /* Gradients of local_attention given the saved scores; dq, dk, dvalues are overwritten. */     \
  template <typename T>                                                                           \
  void local_attention_backward(const LocalAttentionShape& s, const T* q, const T* k,             \
                                const T* values, const T* scores, const T* dout, T* dq, T* dk,    \
                                T* dvalues);

namespace reference {
MOSSFORMER_KERNEL_DECLS
}  // namespace reference

namespace parallel {
MOSSFORMER_KERNEL_DECLS
}  // namespace parallel

#undef MOSSFORMER_KERNEL_DECLS

/// Number of elements in the packed score buffer of local_attention.
std::size_t local_attention_score_size(const LocalAttentionShape& s);

// Backend dispatch.

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  backend() == Backend::kReference ? reference::gemm_nn(m, n, k, a, b, c, accumulate)
                                   : parallel::gemm_nn(m, n, k, a, b, c, accumulate);
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  backend() == Backend::kReference ? reference::gemm_nt(m, n, k, a, b, c, accumulate)
                                   : parallel::gemm_nt(m, n, k, a, b, c, accumulate);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  backend() == Backend::kReference ? reference::gemm_tn(m, n, k, a, b, c, accumulate)
                                   : parallel::gemm_tn(m, n, k, a, b, c, accumulate);
}

template <typename T>
void conv1d(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
            std::size_t stride, const T* x, const T* w, const T* bias, T* y) {
  backend() == Backend::kReference
      ? reference::conv1d(cin, len, cout, kernel, stride, x, w, bias, y)
      : parallel::conv1d(cin, len, cout, kernel, stride, x, w, bias, y);
}

template <typename T>
void conv1d_weight_grad(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
                        std::size_t stride, const T* g, const T* x, T* dw) {
  backend() == Backend::kReference
      ? reference::conv1d_weight_grad(cin, len, cout, kernel, stride, g, x, dw)
      : parallel::conv1d_weight_grad(cin, len, cout, kernel, stride, g, x, dw);
}

template <typename T>
void transposed_conv1d(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
                       std::size_t stride, const T* x, const T* w, T* y) {
  backend() == Backend::kReference
      ? reference::transposed_conv1d(cin, len, cout, kernel, stride, x, w, y)
      : parallel::transposed_conv1d(cin, len, cout, kernel, stride, x, w, y);
}

template <typename T>
void depthwise_conv1d(std::size_t channels, std::size_t len, std::size_t kernel, const T* x,
                      const T* w, T* y) {
  backend() == Backend::kReference ? reference::depthwise_conv1d(channels, len, kernel, x, w, y)
                                   : parallel::depthwise_conv1d(channels, len, kernel, x, w, y);
}

template <typename T>
void depthwise_conv1d_backward(std::size_t channels, std::size_t len, std::size_t kernel,
                               const T* x, const T* w, const T* g, T* dx, T* dw) {
  backend() == Backend::kReference
      ? reference::depthwise_conv1d_backward(channels, len, kernel, x, w, g, dx, dw)
      : parallel::depthwise_conv1d_backward(channels, len, kernel, x, w, g, dx, dw);
}

template <typename T>
std::size_t local_attention(const LocalAttentionShape& s, const T* q, const T* k, const T* values,
                            T* out, T* scores) {
  return backend() == Backend::kReference
             ? reference::local_attention(s, q, k, values, out, scores)
             : parallel::local_attention(s, q, k, values, out, scores);
}

template <typename T>
void local_attention_backward(const LocalAttentionShape& s, const T* q, const T* k,
                              const T* values, const T* scores, const T* dout, T* dq, T* dk,
                              T* dvalues) {
  backend() == Backend::kReference
      ? reference::local_attention_backward(s, q, k, values, scores, dout, dq, dk, dvalues)
      : parallel::local_attention_backward(s, q, k, values, scores, dout, dq, dk, dvalues);
}

}  // namespace mossformer::kernels
