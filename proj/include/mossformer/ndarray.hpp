// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mossformer/errors.hpp"

namespace mossformer {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Allocator whose value-less construct() leaves scalars uninitialised, so
/// buffers that are about to be overwritten skip the zero fill. Storage is
/// 64-byte aligned: vectorised loops peel a scalar head that depends on the
/// start address, and a fixed alignment keeps results bitwise repeatable.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  static constexpr std::align_val_t kAlignment{64};

  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  DefaultInitAllocator() = default;
  template <typename U>
  DefaultInitAllocator(const DefaultInitAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t n) noexcept { ::operator delete(p, n * sizeof(T), kAlignment); }

  template <typename U>
  void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

/// Dense row-major n-dimensional array.
///
/// A default-constructed array is "unallocated" (rank 0, no storage); every
/// constructed array has all dimensions >= 1 and exactly product(shape)
/// elements.
template <typename T>
class NdArray {
 public:
  using value_type = T;
  using Buffer = std::vector<T, DefaultInitAllocator<T>>;

  NdArray() = default;

  /// Array whose contents are unspecified; for outputs that are fully written.
  static NdArray uninitialized(Shape shape) {
    NdArray a;
    a.shape_ = std::move(shape);
    a.validate_shape();
    a.data_.resize(shape_size(a.shape_));
    return a;
  }

  explicit NdArray(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), fill);
  }

  NdArray(Shape shape, const std::vector<T>& data)
      : NdArray(std::move(shape), Buffer(data.begin(), data.end())) {}

  NdArray(Shape shape, std::initializer_list<T> data)
      : NdArray(std::move(shape), Buffer(data.begin(), data.end())) {}

  NdArray(Shape shape, Buffer data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("NdArray: shape " + shape_string(shape_) + " needs " +
                           std::to_string(shape_size(shape_)) + " elements, got " +
                           std::to_string(data_.size()));
    }
  }

  /// Rank-2 array from nested rows; handy in tests.
  static NdArray matrix(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    Buffer data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("NdArray::matrix: ragged rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return NdArray({r, c}, std::move(data));
  }

  bool empty() const { return data_.empty(); }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }
  Buffer& storage() { return data_; }
  const Buffer& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  T* row(std::size_t i) { return data_.data() + i * shape_[1]; }
  const T* row(std::size_t i) const { return data_.data() + i * shape_[1]; }

  NdArray reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
      throw DimensionError("reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
    }
    return NdArray(std::move(shape), data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  NdArray<U> cast() const {
    return NdArray<U>(shape_, typename NdArray<U>::Buffer(data_.begin(), data_.end()));
  }

  bool operator==(const NdArray&) const = default;

 private:
  void validate_shape() const {
    if (shape_.empty()) throw DimensionError("NdArray: rank must be >= 1");
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (shape_[i] == 0) {
        throw DimensionError("NdArray: axis " + std::to_string(i) + " has size 0 in " +
                             shape_string(shape_));
      }
    }
  }

  Shape shape_;
  Buffer data_;
};

/// Throws DimensionError unless `a` has rank `r`.
template <typename T>
void require_rank(const NdArray<T>& a, std::size_t r, const char* what) {
  if (a.rank() != r) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(r) + ", got " +
                         shape_string(a.shape()));
  }
}

}  // namespace mossformer
