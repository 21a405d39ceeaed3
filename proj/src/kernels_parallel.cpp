// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "kernels_instantiate.inc"
#include "mossformer/kernels.hpp"

namespace mossformer::kernels::parallel {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using In = Eigen::Map<const Matrix<T>>;
template <typename T>
using Out = Eigen::Map<Matrix<T>>;

template <typename T, typename Product>
void store(Out<T> c, const Product& p, bool accumulate) {
  if (accumulate) {
    c.noalias() += p;
  } else {
    c.noalias() = p;
  }
}

}  // namespace

// Products go through Eigen's packed kernels, which parallelise over output
// blocks with OpenMP. Results are reproducible for a fixed thread count.

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
             K = static_cast<Eigen::Index>(k);
  store<T>(Out<T>(c, M, N), In<T>(a, M, K) * In<T>(b, K, N), accumulate);
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
             K = static_cast<Eigen::Index>(k);
  store<T>(Out<T>(c, M, N), In<T>(a, M, K) * In<T>(b, N, K).transpose(), accumulate);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
             K = static_cast<Eigen::Index>(k);
  store<T>(Out<T>(c, M, N), In<T>(a, K, M).transpose() * In<T>(b, K, N), accumulate);
}

template <typename T>
void conv1d(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
            std::size_t stride, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t lout = (len - kernel) / stride + 1;
#pragma omp parallel for schedule(static) if (cout * lout * cin * kernel > kParallelWork)
  for (std::int64_t cc = 0; cc < static_cast<std::int64_t>(cout); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    T* __restrict yc = y + c * lout;
    std::fill(yc, yc + lout, bias ? bias[c] : T{0});
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t q = 0; q < kernel; ++q) {
        const T wv = w[(c * cin + i) * kernel + q];
        const T* xi = x + i * len + q;
        for (std::size_t t = 0; t < lout; ++t) yc[t] += wv * xi[t * stride];
      }
  }
}

template <typename T>
void conv1d_weight_grad(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
                        std::size_t stride, const T* g, const T* x, T* dw) {
  const std::size_t lout = (len - kernel) / stride + 1;
#pragma omp parallel for schedule(static) if (cout * lout * cin * kernel > kParallelWork)
  for (std::int64_t cc = 0; cc < static_cast<std::int64_t>(cout); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const T* gc = g + c * lout;
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t q = 0; q < kernel; ++q) {
        const T* xi = x + i * len + q;
        T acc{0};
        for (std::size_t t = 0; t < lout; ++t) acc += gc[t] * xi[t * stride];
        dw[(c * cin + i) * kernel + q] += acc;
      }
  }
}

template <typename T>
void transposed_conv1d(std::size_t cin, std::size_t len, std::size_t cout, std::size_t kernel,
                       std::size_t stride, const T* x, const T* w, T* y) {
  // Gather form: each output sample sums the (frame, tap) pairs landing on it.
  const std::size_t lout = (len - 1) * stride + kernel;
  const auto total = static_cast<std::int64_t>(cout * lout);
#pragma omp parallel for schedule(static) if (cout * lout * cin * kernel > kParallelWork)
  for (std::int64_t idx = 0; idx < total; ++idx) {
    const std::size_t o = static_cast<std::size_t>(idx) / lout;
    const std::size_t tau = static_cast<std::size_t>(idx) % lout;
    T acc{0};
    const std::size_t q0 = tau % stride;
    for (std::size_t q = q0; q < kernel && q <= tau; q += stride) {
      const std::size_t t = (tau - q) / stride;
      if (t >= len) continue;
      for (std::size_t i = 0; i < cin; ++i) acc += x[i * len + t] * w[(i * cout + o) * kernel + q];
    }
    y[idx] += acc;
  }
}

template <typename T>
void depthwise_conv1d(std::size_t channels, std::size_t len, std::size_t kernel, const T* x,
                      const T* w, T* y) {
  const std::size_t pad = (kernel - 1) / 2;
#pragma omp parallel for schedule(static) if (channels * len * kernel > kParallelWork)
  for (std::int64_t cc = 0; cc < static_cast<std::int64_t>(channels); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const T* xc = x + c * len;
    T* __restrict yc = y + c * len;
    std::fill(yc, yc + len, T{0});
    for (std::size_t q = 0; q < kernel; ++q) {
      const T wv = w[c * kernel + q];
      // y[t] += w[q] * x[t + q - pad] for the t keeping the source in range.
      const std::size_t t0 = q < pad ? pad - q : 0;
      const std::size_t t1 = std::min(len, len + pad - q);
      for (std::size_t t = t0; t < t1; ++t) yc[t] += wv * xc[t + q - pad];
    }
  }
}

template <typename T>
void depthwise_conv1d_backward(std::size_t channels, std::size_t len, std::size_t kernel,
                               const T* x, const T* w, const T* g, T* dx, T* dw) {
  const std::size_t pad = (kernel - 1) / 2;
#pragma omp parallel for schedule(static) if (channels * len * kernel > kParallelWork)
  for (std::int64_t cc = 0; cc < static_cast<std::int64_t>(channels); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const T* xc = x + c * len;
    const T* gc = g + c * len;
    T* __restrict dxc = dx + c * len;
    std::fill(dxc, dxc + len, T{0});
    for (std::size_t q = 0; q < kernel; ++q) {
      const T wv = w[c * kernel + q];
      const std::size_t t0 = q < pad ? pad - q : 0;
      const std::size_t t1 = std::min(len, len + pad - q);
      T acc{0};
      for (std::size_t t = t0; t < t1; ++t) {
        dxc[t + q - pad] += wv * gc[t];
        acc += xc[t + q - pad] * gc[t];
      }
      dw[c * kernel + q] = acc;
    }
  }
}

template <typename T>
std::size_t local_attention(const LocalAttentionShape& s, const T* q, const T* k, const T* values,
                            T* out, T* scores) {
  const std::size_t chunks = (s.rows + s.chunk - 1) / s.chunk;
  const T scale = static_cast<T>(s.scale);
  const auto D = static_cast<Eigen::Index>(s.dim), W = static_cast<Eigen::Index>(s.width);
#pragma omp parallel
  {
    Matrix<T> a;
#pragma omp for schedule(static)
    for (std::int64_t hh = 0; hh < static_cast<std::int64_t>(chunks); ++hh) {
      const auto h = static_cast<std::size_t>(hh);
      const std::size_t begin = h * s.chunk;
      const auto n = static_cast<Eigen::Index>(std::min(s.chunk, s.rows - begin));
      a.noalias() = In<T>(q + begin * s.dim, n, D) * In<T>(k + begin * s.dim, n, D).transpose();
      // Full chunks precede chunk h, so its packed score offset is h * chunk^2.
      T* pre = scores ? scores + h * s.chunk * s.chunk : nullptr;
      T* e = a.data();
      for (Eigen::Index i = 0; i < n * n; ++i) {
        const T v = scale * e[i];
        if (pre) pre[i] = v;
        const T r = v > T{0} ? v : T{0};
        e[i] = r * r;
      }
      Out<T>(out + begin * s.width, n, W).noalias() = a * In<T>(values + begin * s.width, n, W);
    }
  }
  return chunks;
}

template <typename T>
void local_attention_backward(const LocalAttentionShape& s, const T* q, const T* k,
                              const T* values, const T* scores, const T* dout, T* dq, T* dk,
                              T* dvalues) {
  const std::size_t chunks = (s.rows + s.chunk - 1) / s.chunk;
  const T scale = static_cast<T>(s.scale);
  const auto D = static_cast<Eigen::Index>(s.dim), W = static_cast<Eigen::Index>(s.width);
#pragma omp parallel
  {
    Matrix<T> a, ds;
#pragma omp for schedule(static)
    for (std::int64_t hh = 0; hh < static_cast<std::int64_t>(chunks); ++hh) {
      const auto h = static_cast<std::size_t>(hh);
      const std::size_t begin = h * s.chunk;
      const auto n = static_cast<Eigen::Index>(std::min(s.chunk, s.rows - begin));
      const In<T> pre(scores + h * s.chunk * s.chunk, n, n);
      const In<T> vh(values + begin * s.width, n, W), gh(dout + begin * s.width, n, W);
      a = pre.cwiseMax(T{0}).cwiseAbs2();
      Out<T>(dvalues + begin * s.width, n, W).noalias() = a.transpose() * gh;
      ds.noalias() = gh * vh.transpose();
      // d(relu(x)^2)/dx = 2 relu(x), times the score scale.
      ds = ds.cwiseProduct(pre.cwiseMax(T{0})) * (T{2} * scale);
      Out<T>(dq + begin * s.dim, n, D).noalias() = ds * In<T>(k + begin * s.dim, n, D);
      Out<T>(dk + begin * s.dim, n, D).noalias() = ds.transpose() * In<T>(q + begin * s.dim, n, D);
    }
  }
}

MOSSFORMER_INSTANTIATE(float)
MOSSFORMER_INSTANTIATE(double)

}  // namespace mossformer::kernels::parallel
