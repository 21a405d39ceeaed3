// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#include "mossformer/ops.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "mossformer/kernels.hpp"

namespace mossformer {

namespace {

std::string dims(const Shape& s) { return shape_string(s); }

template <typename T>
void require_matrix(const NdArray<T>& a, const char* what) {
  require_rank(a, 2, what);
}

template <typename T>
void add_into(NdArray<T>& dst, const NdArray<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

// 53 random bits -> [0, 1); independent of the standard library's distributions.
double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
T activation_grad(Activation kind, T x) {
  switch (kind) {
    case Activation::kRelu:
      return x > T{0} ? T{1} : T{0};
    case Activation::kReluSquared:
      return x > T{0} ? T{2} * x : T{0};
    case Activation::kSilu:
    case Activation::kSwish: {
      const T s = sigmoid(x);
      return s * (T{1} + x * (T{1} - s));
    }
    case Activation::kSigmoid: {
      const T s = sigmoid(x);
      return s * (T{1} - s);
    }
    case Activation::kGelu: {
      const T cdf = T{0.5} * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
      const T pdf = std::exp(T{-0.5} * x * x) / std::sqrt(T{2} * std::numbers::pi_v<T>);
      return cdf + x * pdf;
    }
    case Activation::kIdentity:
      return T{1};
  }
  return T{0};
}

}  // namespace

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": shapes " + dims(a) + " and " + dims(b));
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "relu_squared") return Activation::kReluSquared;
  if (name == "silu") return Activation::kSilu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "gelu") return Activation::kGelu;
  if (name == "swish") return Activation::kSwish;
  if (name == "identity" || name == "bilinear") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kReluSquared: return "relu_squared";
    case Activation::kSilu: return "silu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kGelu: return "gelu";
    case Activation::kSwish: return "swish";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

// ---- plain ------------------------------------------------------------------

template <typename T>
NdArray<T> conv1d(const NdArray<T>& x, const NdArray<T>& weight, const NdArray<T>& bias,
                  std::size_t stride) {
  require_matrix(x, "conv1d input");
  require_rank(weight, 3, "conv1d weight");
  require_rank(bias, 1, "conv1d bias");
  if (stride < 1) throw ConfigError("conv1d: stride must be >= 1");
  const std::size_t cin = x.dim(0), len = x.dim(1);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw DimensionError("conv1d: weight axis 1 (in-channels) is " +
                         std::to_string(weight.dim(1)) + " but input axis 0 (channels) is " +
                         std::to_string(cin));
  }
  if (bias.dim(0) != cout) {
    throw DimensionError("conv1d: bias axis 0 is " + std::to_string(bias.dim(0)) +
                         " but weight axis 0 (out-channels) is " + std::to_string(cout));
  }
  if (len < k) {
    throw DimensionError("conv1d: input axis 1 (length " + std::to_string(len) +
                         ") shorter than weight axis 2 (kernel " + std::to_string(k) + ")");
  }
  auto y = NdArray<T>::uninitialized({cout, (len - k) / stride + 1});
  kernels::conv1d(cin, len, cout, k, stride, x.raw(), weight.raw(), bias.raw(), y.raw());
  return y;
}

template <typename T>
NdArray<T> transposed_conv1d(const NdArray<T>& x, const NdArray<T>& weight, std::size_t stride) {
  require_matrix(x, "transposed_conv1d input");
  require_rank(weight, 3, "transposed_conv1d weight");
  if (stride < 1) throw ConfigError("transposed_conv1d: stride must be >= 1");
  const std::size_t cin = x.dim(0), len = x.dim(1);
  if (weight.dim(0) != cin) {
    throw DimensionError("transposed_conv1d: weight axis 0 (in-channels) is " +
                         std::to_string(weight.dim(0)) + " but input axis 0 is " +
                         std::to_string(cin));
  }
  const std::size_t cout = weight.dim(1), k = weight.dim(2);
  NdArray<T> y({cout, (len - 1) * stride + k});
  kernels::transposed_conv1d(cin, len, cout, k, stride, x.raw(), weight.raw(), y.raw());
  return y;
}

template <typename T>
NdArray<T> depthwise_conv1d(const NdArray<T>& x, const NdArray<T>& weight) {
  require_matrix(x, "depthwise_conv1d input");
  require_matrix(weight, "depthwise_conv1d weight");
  if (weight.dim(1) % 2 == 0) {
    throw ConfigError("depthwise_conv1d: kernel size " + std::to_string(weight.dim(1)) +
                      " must be odd");
  }
  if (weight.dim(0) != x.dim(0)) {
    throw DimensionError("depthwise_conv1d: weight axis 0 is " + std::to_string(weight.dim(0)) +
                         " but input axis 0 (channels) is " + std::to_string(x.dim(0)));
  }
  auto y = NdArray<T>::uninitialized(x.shape());
  kernels::depthwise_conv1d(x.dim(0), x.dim(1), weight.dim(1), x.raw(), weight.raw(), y.raw());
  return y;
}

namespace {

template <typename T>
struct NormStats {
  std::vector<T> mean, rstd;
};

template <typename T>
NdArray<T> layer_norm_impl(const NdArray<T>& x, const NdArray<T>& gain, const NdArray<T>& bias,
                           double eps, NormStats<T>* stats) {
  require_matrix(x, "layer_norm input");
  const std::size_t rows = x.dim(0), n = x.dim(1);
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: gain/bias length " + std::to_string(gain.size()) + "/" +
                         std::to_string(bias.size()) + " but input axis 1 is " +
                         std::to_string(n));
  }
  auto y = NdArray<T>::uninitialized(x.shape());
  if (stats) {
    stats->mean.resize(rows);
    stats->rstd.resize(rows);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.row(r);
    T mean{0};
    for (std::size_t i = 0; i < n; ++i) mean += xr[i];
    mean /= static_cast<T>(n);
    T var{0};
    for (std::size_t i = 0; i < n; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<T>(n);
    const T rstd = T{1} / std::sqrt(var + static_cast<T>(eps));
    T* yr = y.row(r);
    for (std::size_t i = 0; i < n; ++i) yr[i] = gain[i] * ((xr[i] - mean) * rstd) + bias[i];
    if (stats) {
      stats->mean[r] = mean;
      stats->rstd[r] = rstd;
    }
  }
  return y;
}

}  // namespace

template <typename T>
NdArray<T> layer_norm(const NdArray<T>& x, const NdArray<T>& gain, const NdArray<T>& bias,
                      double eps) {
  return layer_norm_impl<T>(x, gain, bias, eps, nullptr);
}

template <typename T>
T activation(Activation kind, T x) {
  switch (kind) {
    case Activation::kRelu:
      return x > T{0} ? x : T{0};
    case Activation::kReluSquared:
      return x > T{0} ? x * x : T{0};
    case Activation::kSilu:
    case Activation::kSwish:
      return x * sigmoid(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kGelu:
      return T{0.5} * x * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
    case Activation::kIdentity:
      return x;
  }
  throw ConfigError("activation: unknown kind");
}

template <typename T>
NdArray<T> activation(Activation kind, const NdArray<T>& x) {
  auto y = NdArray<T>::uninitialized(x.shape());
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Map<const Array> in(x.raw(), n);
  Eigen::Map<Array> out(y.raw(), n);
  switch (kind) {
    case Activation::kRelu:
      out = in.max(T{0});
      break;
    case Activation::kReluSquared:
      out = in.max(T{0}).square();
      break;
    case Activation::kSilu:
    case Activation::kSwish:
      out = in * in.logistic();
      break;
    case Activation::kSigmoid:
      out = in.logistic();
      break;
    case Activation::kIdentity:
      out = in;
      break;
    default:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = activation(kind, x[i]);
  }
  return y;
}

template <typename T>
NdArray<T> matmul(const NdArray<T>& a, const NdArray<T>& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: lhs axis 1 is " + std::to_string(a.dim(1)) +
                         " but rhs axis 0 is " + std::to_string(b.dim(0)));
  }
  auto c = NdArray<T>::uninitialized({a.dim(0), b.dim(1)});
  kernels::gemm_nn(a.dim(0), b.dim(1), a.dim(1), a.raw(), b.raw(), c.raw(), false);
  return c;
}

template <typename T>
NdArray<T> transpose(const NdArray<T>& a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto out = NdArray<T>::uninitialized({c, r});
  constexpr std::size_t kBlock = 32;
  const T* src = a.raw();
  T* dst = out.raw();
  for (std::size_t i0 = 0; i0 < r; i0 += kBlock)
    for (std::size_t j0 = 0; j0 < c; j0 += kBlock) {
      const std::size_t i1 = std::min(r, i0 + kBlock), j1 = std::min(c, j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) dst[j * r + i] = src[i * c + j];
    }
  return out;
}

namespace {

// cos/sin of m * theta_j for m < rows, reused while dim and base stay the same.
struct RopeTable {
  std::size_t rows = 0, dim = 0;
  double base = 0.0;
  std::vector<double> cos, sin;  // [rows x dim/2]

  void ensure(std::size_t r, std::size_t d, double b) {
    if (d == dim && b == base && r <= rows) return;
    rows = std::max(r, d == dim && b == base ? rows : 0);
    dim = d;
    base = b;
    const std::size_t half = d / 2;
    cos.resize(rows * half);
    sin.resize(rows * half);
    for (std::size_t j = 0; j < half; ++j) {
      const double theta =
          std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(d));
      for (std::size_t m = 0; m < rows; ++m) {
        const double angle = static_cast<double>(m) * theta;
        cos[m * half + j] = std::cos(angle);
        sin[m * half + j] = std::sin(angle);
      }
    }
  }
};

template <typename T>
void rope_rotate(const NdArray<T>& x, NdArray<T>& y, double base, bool inverse) {
  const std::size_t rows = x.dim(0), d = x.dim(1), half = d / 2;
  thread_local RopeTable table;
  table.ensure(rows, d, base);
  for (std::size_t m = 0; m < rows; ++m) {
    const T* xr = x.row(m);
    T* yr = y.row(m);
    const double* cr = table.cos.data() + m * half;
    const double* sr = table.sin.data() + m * half;
    for (std::size_t j = 0; j < half; ++j) {
      const T c = static_cast<T>(cr[j]);
      const T s = static_cast<T>(inverse ? -sr[j] : sr[j]);
      const T a = xr[2 * j], b = xr[2 * j + 1];
      yr[2 * j] = a * c - b * s;
      yr[2 * j + 1] = a * s + b * c;
    }
  }
}

}  // namespace

template <typename T>
NdArray<T> rope(const NdArray<T>& x, double base) {
  require_matrix(x, "rope");
  if (x.dim(1) % 2 != 0) {
    throw ConfigError("rope: feature dimension " + std::to_string(x.dim(1)) + " must be even");
  }
  auto y = NdArray<T>::uninitialized(x.shape());
  rope_rotate(x, y, base, false);
  return y;
}

// ---- recorded ---------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  NdArray<T> y = a.value();
  add_into(y, b.value());
  return a.tape()->record("add", std::move(y), {a, b}, [a, b](const NdArray<T>& g) {
    if (a.requires_grad()) add_into(a.grad_buffer(), g);
    if (b.requires_grad()) add_into(b.grad_buffer(), g);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  NdArray<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return a.tape()->record("sub", std::move(y), {a, b}, [a, b](const NdArray<T>& g) {
    if (a.requires_grad()) add_into(a.grad_buffer(), g);
    if (b.requires_grad()) {
      auto& db = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  auto y = NdArray<T>::uninitialized(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return a.tape()->record("mul", std::move(y), {a, b}, [a, b](const NdArray<T>& g) {
    if (a.requires_grad()) {
      auto& da = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      auto& db = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a.value()[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, double s) {
  const T f = static_cast<T>(s);
  auto y = NdArray<T>::uninitialized(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * f;
  return a.tape()->record("scale", std::move(y), {a}, [a, f](const NdArray<T>& g) {
    auto& da = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * f;
  });
}

template <typename T>
Var<T> add_row(const Var<T>& x, const Var<T>& row) {
  require_matrix(x.value(), "add_row input");
  const std::size_t rows = x.dim(0), n = x.dim(1);
  if (row.value().size() != n) {
    throw DimensionError("add_row: row length " + std::to_string(row.value().size()) +
                         " but input axis 1 is " + std::to_string(n));
  }
  NdArray<T> y = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) y[r * n + i] += row.value()[i];
  return x.tape()->record("add_row", std::move(y), {x, row}, [x, row, rows, n](const NdArray<T>& g) {
    if (x.requires_grad()) add_into(x.grad_buffer(), g);
    if (row.requires_grad()) {
      auto& dr = row.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < n; ++i) dr[i] += g[r * n + i];
    }
  });
}

template <typename T>
Var<T> mul_row(const Var<T>& x, const Var<T>& row) {
  require_matrix(x.value(), "mul_row input");
  const std::size_t rows = x.dim(0), n = x.dim(1);
  if (row.value().size() != n) {
    throw DimensionError("mul_row: row length " + std::to_string(row.value().size()) +
                         " but input axis 1 is " + std::to_string(n));
  }
  NdArray<T> y = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) y[r * n + i] *= row.value()[i];
  return x.tape()->record("mul_row", std::move(y), {x, row}, [x, row, rows, n](const NdArray<T>& g) {
    if (x.requires_grad()) {
      auto& dx = x.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < n; ++i) dx[r * n + i] += g[r * n + i] * row.value()[i];
    }
    if (row.requires_grad()) {
      auto& dr = row.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < n; ++i) dr[i] += g[r * n + i] * x.value()[r * n + i];
    }
  });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  NdArray<T> c = matmul(a.value(), b.value());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  return a.tape()->record("matmul", std::move(c), {a, b}, [a, b, m, k, n](const NdArray<T>& g) {
    if (a.requires_grad()) kernels::gemm_nt(m, k, n, g.raw(), b.value().raw(), a.grad_buffer().raw(), true);
    if (b.requires_grad()) kernels::gemm_tn(k, n, m, a.value().raw(), g.raw(), b.grad_buffer().raw(), true);
  });
}

template <typename T>
Var<T> matmul_tn(const Var<T>& a, const Var<T>& b) {
  require_matrix(a.value(), "matmul_tn lhs");
  require_matrix(b.value(), "matmul_tn rhs");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("matmul_tn: lhs axis 0 is " + std::to_string(a.dim(0)) +
                         " but rhs axis 0 is " + std::to_string(b.dim(0)));
  }
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  auto c = NdArray<T>::uninitialized({m, n});
  kernels::gemm_tn(m, n, k, a.value().raw(), b.value().raw(), c.raw(), false);
  return a.tape()->record("matmul_tn", std::move(c), {a, b}, [a, b, m, k, n](const NdArray<T>& g) {
    if (a.requires_grad()) kernels::gemm_nt(k, m, n, b.value().raw(), g.raw(), a.grad_buffer().raw(), true);
    if (b.requires_grad()) kernels::gemm_nn(k, n, m, a.value().raw(), g.raw(), b.grad_buffer().raw(), true);
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require_matrix(x.value(), "linear input");
  require_matrix(weight.value(), "linear weight");
  const std::size_t rows = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.dim(1) != in) {
    throw DimensionError("linear: weight axis 1 is " + std::to_string(weight.dim(1)) +
                         " but input axis 1 (features) is " + std::to_string(in));
  }
  if (bias.value().size() != out) {
    throw DimensionError("linear: bias length " + std::to_string(bias.value().size()) +
                         " but weight axis 0 is " + std::to_string(out));
  }
  auto y = NdArray<T>::uninitialized({rows, out});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias.value().raw(), out, y.row(r));
  kernels::gemm_nt(rows, out, in, x.value().raw(), weight.value().raw(), y.raw(), true);
  return x.tape()->record(
      "linear", std::move(y), {x, weight, bias}, [x, weight, bias, rows, in, out](const NdArray<T>& g) {
        if (x.requires_grad())
          kernels::gemm_nn(rows, in, out, g.raw(), weight.value().raw(), x.grad_buffer().raw(), true);
        if (weight.requires_grad())
          kernels::gemm_tn(out, in, rows, g.raw(), x.value().raw(), weight.grad_buffer().raw(), true);
        if (bias.requires_grad()) {
          auto& db = bias.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < out; ++o) db[o] += g[r * out + o];
        }
      });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  return a.tape()->record("transpose", transpose(a.value()), {a}, [a](const NdArray<T>& g) {
    add_into(a.grad_buffer(), transpose(g));
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  return a.tape()->record("reshape", a.value().reshaped(std::move(shape)), {a},
                          [a](const NdArray<T>& g) { add_into(a.grad_buffer(), g); });
}

template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  require_matrix(a.value(), "concat_cols lhs");
  require_matrix(b.value(), "concat_cols rhs");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_cols: axis 0 differs (" + std::to_string(a.dim(0)) + " vs " +
                         std::to_string(b.dim(0)) + ")");
  }
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  auto y = NdArray<T>::uninitialized({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().row(r), ca, y.row(r));
    std::copy_n(b.value().row(r), cb, y.row(r) + ca);
  }
  return a.tape()->record("concat_cols", std::move(y), {a, b}, [a, b, rows, ca, cb](const NdArray<T>& g) {
    const std::size_t w = ca + cb;
    if (a.requires_grad()) {
      auto& da = a.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < ca; ++i) da[r * ca + i] += g[r * w + i];
    }
    if (b.requires_grad()) {
      auto& db = b.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < cb; ++i) db[r * cb + i] += g[r * w + ca + i];
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t end) {
  require_matrix(a.value(), "slice_cols");
  if (begin >= end || end > a.dim(1)) {
    throw IndexError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside axis 1 of size " + std::to_string(a.dim(1)));
  }
  const std::size_t rows = a.dim(0), w = a.dim(1), n = end - begin;
  auto y = NdArray<T>::uninitialized({rows, n});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(a.value().row(r) + begin, n, y.row(r));
  return a.tape()->record("slice_cols", std::move(y), {a}, [a, rows, w, n, begin](const NdArray<T>& g) {
    auto& da = a.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < n; ++i) da[r * w + begin + i] += g[r * n + i];
  });
}

template <typename T>
Var<T> pad_cols(const Var<T>& a, std::size_t extra) {
  require_matrix(a.value(), "pad_cols");
  if (extra == 0) return a;
  const std::size_t rows = a.dim(0), w = a.dim(1);
  NdArray<T> y({rows, w + extra});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(a.value().row(r), w, y.row(r));
  return a.tape()->record("pad_cols", std::move(y), {a}, [a, rows, w, extra](const NdArray<T>& g) {
    auto& da = a.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < w; ++i) da[r * w + i] += g[r * (w + extra) + i];
  });
}

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, std::size_t stride) {
  NdArray<T> y = conv1d(x.value(), weight.value(), bias.value(), stride);
  return x.tape()->record("conv1d", std::move(y), {x, weight, bias}, [x, weight, bias, stride](const NdArray<T>& g) {
    const std::size_t cin = x.dim(0), len = x.dim(1), cout = weight.dim(0), k = weight.dim(2);
    const std::size_t lout = g.dim(1);
    if (x.requires_grad()) {
      // Backward-data of a convolution is the transposed convolution with the same weight.
      const std::size_t covered = (lout - 1) * stride + k;
      NdArray<T> tmp({cin, covered});
      kernels::transposed_conv1d(cout, lout, cin, k, stride, g.raw(), weight.value().raw(), tmp.raw());
      auto& dx = x.grad_buffer();
      for (std::size_t i = 0; i < cin; ++i)
        for (std::size_t t = 0; t < covered; ++t) dx[i * len + t] += tmp[i * covered + t];
    }
    if (weight.requires_grad())
      kernels::conv1d_weight_grad(cin, len, cout, k, stride, g.raw(), x.value().raw(),
                                  weight.grad_buffer().raw());
    if (bias.requires_grad()) {
      auto& db = bias.grad_buffer();
      for (std::size_t c = 0; c < cout; ++c)
        for (std::size_t t = 0; t < lout; ++t) db[c] += g[c * lout + t];
    }
  });
}

template <typename T>
Var<T> transposed_conv1d(const Var<T>& x, const Var<T>& weight, std::size_t stride) {
  NdArray<T> y = transposed_conv1d(x.value(), weight.value(), stride);
  return x.tape()->record("transposed_conv1d", std::move(y), {x, weight}, [x, weight, stride](const NdArray<T>& g) {
    const std::size_t cin = x.dim(0), len = x.dim(1), cout = weight.dim(1), k = weight.dim(2);
    const std::size_t lout = g.dim(1);
    if (x.requires_grad()) {
      NdArray<T> tmp({cin, len});
      kernels::conv1d<T>(cout, lout, cin, k, stride, g.raw(), weight.value().raw(), nullptr, tmp.raw());
      add_into(x.grad_buffer(), tmp);
    }
    if (weight.requires_grad())
      kernels::conv1d_weight_grad(cout, lout, cin, k, stride, x.value().raw(), g.raw(),
                                  weight.grad_buffer().raw());
  });
}

template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& weight) {
  NdArray<T> y = depthwise_conv1d(x.value(), weight.value());
  return x.tape()->record("depthwise_conv1d", std::move(y), {x, weight}, [x, weight](const NdArray<T>& g) {
    const std::size_t c = x.dim(0), len = x.dim(1), k = weight.dim(1);
    NdArray<T> dx(x.shape());
    NdArray<T> dw(weight.shape());
    kernels::depthwise_conv1d_backward(c, len, k, x.value().raw(), weight.value().raw(), g.raw(),
                                       dx.raw(), dw.raw());
    if (x.requires_grad()) add_into(x.grad_buffer(), dx);
    if (weight.requires_grad()) add_into(weight.grad_buffer(), dw);
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps) {
  auto stats = std::make_shared<NormStats<T>>();
  NdArray<T> y = layer_norm_impl(x.value(), gain.value(), bias.value(), eps, stats.get());
  return x.tape()->record("layer_norm", std::move(y), {x, gain, bias}, [x, gain, bias, stats](const NdArray<T>& g) {
    const std::size_t rows = x.dim(0), n = x.dim(1);
    const T inv_n = T{1} / static_cast<T>(n);
    std::vector<T> xhat(n), dxhat(n);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* xr = x.value().row(r);
      const T* gr = g.row(r);
      const T mean = stats->mean[r], rstd = stats->rstd[r];
      T sum_d{0}, sum_dx{0};
      for (std::size_t i = 0; i < n; ++i) {
        xhat[i] = (xr[i] - mean) * rstd;
        dxhat[i] = gr[i] * gain.value()[i];
        sum_d += dxhat[i];
        sum_dx += dxhat[i] * xhat[i];
      }
      if (x.requires_grad()) {
        T* dx = x.grad_buffer().row(r);
        for (std::size_t i = 0; i < n; ++i)
          dx[i] += rstd * (dxhat[i] - sum_d * inv_n - xhat[i] * sum_dx * inv_n);
      }
      if (gain.requires_grad()) {
        auto& dg = gain.grad_buffer();
        for (std::size_t i = 0; i < n; ++i) dg[i] += gr[i] * xhat[i];
      }
      if (bias.requires_grad()) {
        auto& db = bias.grad_buffer();
        for (std::size_t i = 0; i < n; ++i) db[i] += gr[i];
      }
    }
  });
}

template <typename T>
Var<T> activation(Activation kind, const Var<T>& x) {
  return x.tape()->record("activation", activation(kind, x.value()), {x}, [x, kind](const NdArray<T>& g) {
    auto& dx = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * activation_grad(kind, x.value()[i]);
  });
}

template <typename T>
Var<T> dropout(const Var<T>& x, double p, Rng* rng, bool train) {
  if (!train || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout: p must be < 1");
  if (!rng) throw ConfigError("dropout: training mode needs an RNG");
  auto mask = std::make_shared<NdArray<T>>(NdArray<T>::uninitialized(x.shape()));
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto y = NdArray<T>::uninitialized(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    (*mask)[i] = uniform01(*rng) >= p ? keep_scale : T{0};
    y[i] = x.value()[i] * (*mask)[i];
  }
  return x.tape()->record("dropout", std::move(y), {x}, [x, mask](const NdArray<T>& g) {
    auto& dx = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (*mask)[i];
  });
}

template <typename T>
Var<T> rope(const Var<T>& x, double base) {
  return x.tape()->record("rope", rope(x.value(), base), {x}, [x, base](const NdArray<T>& g) {
    auto back = NdArray<T>::uninitialized(g.shape());
    rope_rotate(g, back, base, true);
    add_into(x.grad_buffer(), back);
  });
}

template <typename T>
Var<T> local_attention(const Var<T>& q, const Var<T>& k, const Var<T>& values, std::size_t chunk,
                       double scale, ForwardStats* stats) {
  require_matrix(q.value(), "local_attention q");
  require_matrix(k.value(), "local_attention k");
  require_matrix(values.value(), "local_attention values");
  require_same_shape(q.shape(), k.shape(), "local_attention q/k");
  if (values.dim(0) != q.dim(0)) {
    throw DimensionError("local_attention: values axis 0 is " + std::to_string(values.dim(0)) +
                         " but q axis 0 is " + std::to_string(q.dim(0)));
  }
  if (chunk < 1) throw ConfigError("local_attention: chunk size must be >= 1");
  const kernels::LocalAttentionShape s{q.dim(0), q.dim(1), values.dim(1), chunk, scale};
  auto out = NdArray<T>::uninitialized({s.rows, s.width});
  Tape<T>* tape = q.tape();
  const bool keep = tape->recording() &&
                    (q.requires_grad() || k.requires_grad() || values.requires_grad());
  auto scores = std::make_shared<std::vector<T>>();
  if (keep) scores->resize(kernels::local_attention_score_size(s));
  const std::size_t blocks = kernels::local_attention(s, q.value().raw(), k.value().raw(),
                                                      values.value().raw(), out.raw(),
                                                      keep ? scores->data() : nullptr);
  if (stats) stats->chunk_score_blocks += blocks;
  return tape->record("local_attention", std::move(out), {q, k, values}, [q, k, values, s, scores](const NdArray<T>& g) {
    auto dq = NdArray<T>::uninitialized(q.shape());
    auto dk = NdArray<T>::uninitialized(k.shape());
    auto dv = NdArray<T>::uninitialized(values.shape());
    kernels::local_attention_backward(s, q.value().raw(), k.value().raw(), values.value().raw(),
                                      scores->data(), g.raw(), dq.raw(), dk.raw(), dv.raw());
    if (q.requires_grad()) add_into(q.grad_buffer(), dq);
    if (k.requires_grad()) add_into(k.grad_buffer(), dk);
    if (values.requires_grad()) add_into(values.grad_buffer(), dv);
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc{0};
  for (std::size_t i = 0; i < x.value().size(); ++i) acc += x.value()[i];
  return x.tape()->record("sum", NdArray<T>({1}, acc), {x}, [x](const NdArray<T>& g) {
    auto& dx = x.grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[0];
  });
}

#define MOSSFORMER_OPS(T)                                                                        \
  template NdArray<T> conv1d(const NdArray<T>&, const NdArray<T>&, const NdArray<T>&,           \
                             std::size_t);                                                      \
  template NdArray<T> transposed_conv1d(const NdArray<T>&, const NdArray<T>&, std::size_t);     \
  template NdArray<T> depthwise_conv1d(const NdArray<T>&, const NdArray<T>&);                   \
  template NdArray<T> layer_norm(const NdArray<T>&, const NdArray<T>&, const NdArray<T>&,       \
                                 double);                                                       \
  template NdArray<T> activation(Activation, const NdArray<T>&);                                \
  template T activation(Activation, T);                                                         \
  template NdArray<T> matmul(const NdArray<T>&, const NdArray<T>&);                             \
  template NdArray<T> transpose(const NdArray<T>&);                                             \
  template NdArray<T> rope(const NdArray<T>&, double);                                          \
  template Var<T> add(const Var<T>&, const Var<T>&);                                            \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                            \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                            \
  template Var<T> scale(const Var<T>&, double);                                                 \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                        \
  template Var<T> mul_row(const Var<T>&, const Var<T>&);                                        \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> matmul_tn(const Var<T>&, const Var<T>&);                                      \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                          \
  template Var<T> transpose(const Var<T>&);                                                     \
  template Var<T> reshape(const Var<T>&, Shape);                                                \
  template Var<T> concat_cols(const Var<T>&, const Var<T>&);                                    \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);                          \
  template Var<T> pad_cols(const Var<T>&, std::size_t);                                         \
  template Var<T> conv1d(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t);             \
  template Var<T> transposed_conv1d(const Var<T>&, const Var<T>&, std::size_t);                 \
  template Var<T> depthwise_conv1d(const Var<T>&, const Var<T>&);                               \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);              \
  template Var<T> activation(Activation, const Var<T>&);                                        \
  template Var<T> dropout(const Var<T>&, double, Rng*, bool);                                   \
  template Var<T> rope(const Var<T>&, double);                                                  \
  template Var<T> local_attention(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t,     \
                                  double, ForwardStats*);                                       \
  template Var<T> sum(const Var<T>&);

MOSSFORMER_OPS(float)
MOSSFORMER_OPS(double)

}  // namespace mossformer
