// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace latdir {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major array of doubles. All network state and activations live in
/// these; the leading dimension is the batch dimension wherever one exists.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Element access for rank-2 tensors.
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  /// Contiguous slice for leading index `i` (one sample of a batch).
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;
  std::size_t row_size() const;

  void fill(double value);
  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  // Bitwise-style equality of shape and values.
  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws ShapeError naming `what` when `t` does not have exactly `expected`.
void require_shape(const Tensor& t, const Shape& expected, const std::string& what);

/// Concatenates tensors along axis 0; trailing extents must agree.
Tensor concat_batch(std::initializer_list<const Tensor*> parts);
Tensor slice_batch(const Tensor& t, std::size_t begin, std::size_t end);

/// Concatenates two NCHW batches along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& t, std::size_t first_channels, Tensor& a, Tensor& b);

}  // namespace latdir
