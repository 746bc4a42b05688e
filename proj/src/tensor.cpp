// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tcnimu Authors

#include "tcnimu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace tcnimu {

const char *category_name(ErrorCategory c) {
  switch (c) {
  case ErrorCategory::config: return "config";
  case ErrorCategory::numeric: return "numeric";
  case ErrorCategory::data: return "data";
  case ErrorCategory::io: return "io";
  case ErrorCategory::schema: return "schema";
  case ErrorCategory::state: return "state";
  }
  return "unknown";
}

std::size_t shape_size(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_size(shape_) != data_.size())
    throw ConfigError("tensor shape " + shape_str(shape_) + " does not hold " +
                      std::to_string(data_.size()) + " values");
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ConfigError("axis " + std::to_string(axis) + " out of range for shape " +
                      shape_str(shape_));
  return shape_[axis];
}

double &Tensor::at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
double Tensor::at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

double &Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size())
    throw ConfigError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  shape_ = std::move(shape);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor &t, std::string_view where) {
  const auto it = std::find_if(t.storage().begin(), t.storage().end(),
                               [](double v) { return !std::isfinite(v); });
  if (it != t.storage().end())
    throw NumericError("non-finite value at flat index " +
                       std::to_string(it - t.storage().begin()) + " in " + std::string(where));
}

void require_shape(const Tensor &t, const Shape &expected, std::string_view where) {
  if (t.shape() != expected)
    throw ConfigError(std::string(where) + ": expected shape " + shape_str(expected) +
                      ", got " + shape_str(t.shape()));
}

ParamTensor::ParamTensor(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)),
      rms_cache(Tensor::zeros_like(value)), momentum_buf(Tensor::zeros_like(value)) {}

void ParamTensor::zero_grad() { grad.fill(0.0); }

} // namespace tcnimu
