// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tcnimu/error.hpp"

namespace tcnimu {

using Shape = std::vector<std::size_t>;

// Vectorized kernels peel a different number of leading elements depending on
// the buffer address, which changes the summation order. A fixed 64-byte
// alignment keeps results bit-identical from run to run.
template <class T> struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};
  AlignedAllocator() = default;
  template <class U> AlignedAllocator(const AlignedAllocator<U> &) noexcept {}
  T *allocate(std::size_t n) { return static_cast<T *>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T *p, std::size_t) noexcept { ::operator delete(p, alignment); }
  friend bool operator==(const AlignedAllocator &, const AlignedAllocator &) { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape &shape);
std::string shape_str(const Shape &shape);

// Dense row-major array of doubles. At most four axes are used by the
// library (batch, time, feature, gate) but the type does not limit rank.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor zeros_like(const Tensor &t) { return Tensor(t.shape_, 0.0); }

  const Shape &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double *data() noexcept { return data_.data(); }
  const double *data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  Buffer &storage() noexcept { return data_; }
  const Buffer &storage() const noexcept { return data_; }

  double &operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double &at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
  double &at(std::size_t i, std::size_t j, std::size_t k);
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  // Same data, new shape. The element count must match.
  Tensor reshaped(Shape shape) const;
  void reshape(Shape shape);
  void fill(double v);

  bool same_shape(const Tensor &other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor &a, const Tensor &b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

private:
  Shape shape_;
  Buffer data_;
};

// Throws NumericError naming `where` when any element is NaN or infinite.
void require_finite(const Tensor &t, std::string_view where);

// Throws ConfigError when the shape differs from `expected`.
void require_shape(const Tensor &t, const Shape &expected, std::string_view where);

// A trainable tensor with its gradient and the optimizer's per-element state.
struct ParamTensor {
  ParamTensor() = default;
  ParamTensor(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor rms_cache;
  Tensor momentum_buf;

  const Shape &shape() const noexcept { return value.shape(); }
  void zero_grad();
};

} // namespace tcnimu
