// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "latdir/error.hpp"
#include "latdir/kernels.hpp"

namespace latdir::kernels {
namespace {

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor y(x.shape());
  const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) y[i] = f(x[i]);
  return y;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  if (a.shape() != b.shape()) {
    throw ShapeError("elementwise: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
  Tensor y(a.shape());
  const long n = static_cast<long>(a.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
  return y;
}

}  // namespace

Tensor elu_forward(const Tensor& x) {
  return map(x, [](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Tensor elu_backward(const Tensor& x, const Tensor& grad_y) {
  return zip(x, grad_y, [](double v, double g) { return v > 0.0 ? g : g * std::exp(v); });
}

Tensor leaky_relu_forward(const Tensor& x, double slope) {
  return map(x, [slope](double v) { return v > 0.0 ? v : slope * v; });
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_y, double slope) {
  return zip(x, grad_y, [slope](double v, double g) { return v > 0.0 ? g : slope * g; });
}

Tensor tanh_forward(const Tensor& x) {
  return map(x, [](double v) { return std::tanh(v); });
}

Tensor tanh_backward(const Tensor& y, const Tensor& grad_y) {
  return zip(y, grad_y, [](double t, double g) { return g * (1.0 - t * t); });
}

Tensor upsample2x_forward(const Tensor& x) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({n, c, 2 * h, 2 * w});
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n * c); ++i) {
    const double* src = x.data() + i * h * w;
    double* dst = y.data() + i * 4 * h * w;
    for (std::size_t yy = 0; yy < 2 * h; ++yy)
      for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[yy * 2 * w + xx] = src[(yy / 2) * w + xx / 2];
  }
  return y;
}

Tensor upsample2x_backward(const Tensor& grad_y) {
  const std::size_t n = grad_y.dim(0), c = grad_y.dim(1), h = grad_y.dim(2) / 2, w = grad_y.dim(3) / 2;
  Tensor gx({n, c, h, w});
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n * c); ++i) {
    const double* src = grad_y.data() + i * 4 * h * w;
    double* dst = gx.data() + i * h * w;
    for (std::size_t yy = 0; yy < h; ++yy)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const double* s = src + 2 * yy * 2 * w + 2 * xx;
        dst[yy * w + xx] = s[0] + s[1] + s[2 * w] + s[2 * w + 1];
      }
  }
  return gx;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape()) {
    throw ShapeError("add_inplace: shapes " + shape_string(dst.shape()) + " and " + shape_string(src.shape()));
  }
  const long n = static_cast<long>(dst.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace latdir::kernels
