// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "latdir/error.hpp"

namespace latdir {

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_volume(shape_)) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(data_.size()) +
                     " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::row_size() const { return shape_.empty() || shape_[0] == 0 ? 0 : data_.size() / shape_[0]; }

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t n = row_size();
  return std::span<double>(data_).subspan(i * n, n);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t n = row_size();
  return std::span<const double>(data_).subspan(i * n, n);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_volume(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_shape(const Tensor& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw ShapeError(what + ": expected shape " + shape_string(expected) + ", got " + shape_string(t.shape()));
  }
}

Tensor concat_batch(std::initializer_list<const Tensor*> parts) {
  if (parts.size() == 0) return {};
  const Tensor& first = **parts.begin();
  Shape shape = first.shape();
  std::size_t rows = 0;
  std::vector<double> values;
  for (const Tensor* p : parts) {
    if (p->rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p->shape().begin() + 1)) {
      throw ShapeError("concat_batch: incompatible shapes " + shape_string(shape) + " and " +
                       shape_string(p->shape()));
    }
    rows += p->dim(0);
    values.insert(values.end(), p->values().begin(), p->values().end());
  }
  shape[0] = rows;
  return Tensor(std::move(shape), std::move(values));
}

Tensor slice_batch(const Tensor& t, std::size_t begin, std::size_t end) {
  if (begin > end || end > t.dim(0)) {
    throw IndexError("slice_batch: [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                     shape_string(t.shape()));
  }
  Shape shape = t.shape();
  shape[0] = end - begin;
  const std::size_t stride = t.row_size();
  std::vector<double> values(t.values().begin() + begin * stride, t.values().begin() + end * stride);
  return Tensor(std::move(shape), std::move(values));
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t n = a.dim(0);
  const std::size_t sa = a.row_size();
  const std::size_t sb = b.row_size();
  Tensor out({n, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.data() + i * (sa + sb);
    std::copy_n(a.data() + i * sa, sa, dst);
    std::copy_n(b.data() + i * sb, sb, dst + sa);
  }
  return out;
}

void split_channels(const Tensor& t, std::size_t first_channels, Tensor& a, Tensor& b) {
  if (t.rank() != 4 || first_channels > t.dim(1)) {
    throw ShapeError("split_channels: cannot split " + shape_string(t.shape()));
  }
  const std::size_t n = t.dim(0);
  const std::size_t plane = t.dim(2) * t.dim(3);
  const std::size_t sa = first_channels * plane;
  const std::size_t sb = (t.dim(1) - first_channels) * plane;
  a = Tensor({n, first_channels, t.dim(2), t.dim(3)});
  b = Tensor({n, t.dim(1) - first_channels, t.dim(2), t.dim(3)});
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = t.data() + i * (sa + sb);
    std::copy_n(src, sa, a.data() + i * sa);
    std::copy_n(src + sa, sb, b.data() + i * sb);
  }
}

}  // namespace latdir
