// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Core>
#include <algorithm>

#include "latdir/error.hpp"
#include "latdir/kernels.hpp"

namespace latdir::kernels::parallel {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

long as_long(std::size_t v) { return static_cast<long>(v); }

struct ConvDims {
  std::size_t n, c, h, w, o, kh, kw, ho, wo;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t plane() const { return ho * wo; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& weight, ConvGeometry g) {
  if (x.rank() != 4 || weight.rank() != 4) throw ShapeError("conv2d: expected rank-4 input and weight");
  if (weight.dim(1) != x.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels, weight expects " +
                     std::to_string(weight.dim(1)));
  }
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), weight.dim(3), 0, 0};
  d.ho = conv_output_extent(d.h, d.kh, g);
  d.wo = conv_output_extent(d.w, d.kw, g);
  return d;
}

// Column matrix of shape (c*kh*kw, n*ho*wo); column index = sample * plane + pixel.
RowMat im2col(const Tensor& x, const ConvDims& d, ConvGeometry g) {
  const std::size_t cols = d.n * d.plane();
  RowMat out(as_long(d.patch()), as_long(cols));
#pragma omp parallel for schedule(static)
  for (long b = 0; b < as_long(d.n); ++b) {
    for (std::size_t ic = 0; ic < d.c; ++ic)
      for (std::size_t ky = 0; ky < d.kh; ++ky)
        for (std::size_t kx = 0; kx < d.kw; ++kx) {
          double* dst = out.data() + ((ic * d.kh + ky) * d.kw + kx) * cols + b * d.plane();
          const double* src = x.data() + (b * d.c + ic) * d.h * d.w;
          for (std::size_t oy = 0; oy < d.ho; ++oy) {
            const long iy = as_long(oy * g.stride + ky) - as_long(g.pad);
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
              const long ix = as_long(ox * g.stride + kx) - as_long(g.pad);
              const bool inside = iy >= 0 && ix >= 0 && iy < as_long(d.h) && ix < as_long(d.w);
              dst[oy * d.wo + ox] = inside ? src[iy * as_long(d.w) + ix] : 0.0;
            }
          }
        }
  }
  return out;
}

void col2im(const RowMat& cols_grad, const ConvDims& d, ConvGeometry g, Tensor& gx) {
  const std::size_t cols = d.n * d.plane();
#pragma omp parallel for schedule(static)
  for (long b = 0; b < as_long(d.n); ++b) {
    for (std::size_t ic = 0; ic < d.c; ++ic)
      for (std::size_t ky = 0; ky < d.kh; ++ky)
        for (std::size_t kx = 0; kx < d.kw; ++kx) {
          const double* src = cols_grad.data() + ((ic * d.kh + ky) * d.kw + kx) * cols + b * d.plane();
          double* dst = gx.data() + (b * d.c + ic) * d.h * d.w;
          for (std::size_t oy = 0; oy < d.ho; ++oy) {
            const long iy = as_long(oy * g.stride + ky) - as_long(g.pad);
            if (iy < 0 || iy >= as_long(d.h)) continue;
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
              const long ix = as_long(ox * g.stride + kx) - as_long(g.pad);
              if (ix < 0 || ix >= as_long(d.w)) continue;
              dst[iy * as_long(d.w) + ix] += src[oy * d.wo + ox];
            }
          }
        }
  }
}

}  // namespace

Tensor linear_forward(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  if (x.rank() != 2 || weight.rank() != 2 || weight.dim(1) != x.dim(1)) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                     shape_string(weight.shape()));
  }
  const long n = as_long(x.dim(0)), in = as_long(x.dim(1)), out = as_long(weight.dim(0));
  Tensor y({x.dim(0), weight.dim(0)});
  MatMap ym(y.data(), n, out);
  ym.noalias() = ConstMatMap(x.data(), n, in) * ConstMatMap(weight.data(), out, in).transpose();
  if (bias) ym.rowwise() += ConstVecMap(bias->data(), out).transpose();
  return y;
}

void linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor& grad_weight, Tensor* grad_bias) {
  const long n = as_long(x.dim(0)), in = as_long(x.dim(1)), out = as_long(weight.dim(0));
  ConstMatMap gy(grad_y.data(), n, out);
  ConstMatMap xm(x.data(), n, in);
  ConstMatMap wm(weight.data(), out, in);
  MatMap(grad_weight.data(), out, in).noalias() += gy.transpose() * xm;
  if (grad_bias) {
    // Plain loop: Eigen's packet reduction over a Map depends on the pointer's
    // alignment, which would make results vary run to run.
    for (long i = 0; i < n; ++i)
      for (long o = 0; o < out; ++o) (*grad_bias)[o] += grad_y[i * out + o];
  }
  if (grad_x) {
    *grad_x = Tensor(x.shape());
    MatMap(grad_x->data(), n, in).noalias() = gy * wm;
  }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g) {
  const ConvDims d = conv_dims(x, weight, g);
  const RowMat cols = im2col(x, d, g);
  RowMat y_all(as_long(d.o), as_long(d.n * d.plane()));
  y_all.noalias() = ConstMatMap(weight.data(), as_long(d.o), as_long(d.patch())) * cols;
  Tensor y({d.n, d.o, d.ho, d.wo});
#pragma omp parallel for schedule(static)
  for (long b = 0; b < as_long(d.n); ++b) {
    for (std::size_t oc = 0; oc < d.o; ++oc) {
      const double add = bias ? (*bias)[oc] : 0.0;
      const double* src = y_all.data() + oc * d.n * d.plane() + b * d.plane();
      double* dst = y.data() + (b * d.o + oc) * d.plane();
      for (std::size_t p = 0; p < d.plane(); ++p) dst[p] = src[p] + add;
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, ConvGeometry g, Tensor* grad_x,
                     Tensor& grad_weight, Tensor* grad_bias) {
  const ConvDims d = conv_dims(x, weight, g);
  require_shape(grad_y, {d.n, d.o, d.ho, d.wo}, "conv2d_backward grad");
  const std::size_t cols = d.n * d.plane();
  RowMat gy_all(as_long(d.o), as_long(cols));
#pragma omp parallel for schedule(static)
  for (long oc = 0; oc < as_long(d.o); ++oc) {
    for (std::size_t b = 0; b < d.n; ++b) {
      std::copy_n(grad_y.data() + (b * d.o + oc) * d.plane(), d.plane(), gy_all.data() + oc * cols + b * d.plane());
    }
  }
  if (grad_bias) Eigen::Map<Eigen::VectorXd>(grad_bias->data(), as_long(d.o)) += gy_all.rowwise().sum();
  const RowMat x_cols = im2col(x, d, g);
  MatMap(grad_weight.data(), as_long(d.o), as_long(d.patch())).noalias() += gy_all * x_cols.transpose();
  if (grad_x) {
    RowMat g_cols(as_long(d.patch()), as_long(cols));
    g_cols.noalias() = ConstMatMap(weight.data(), as_long(d.o), as_long(d.patch())).transpose() * gy_all;
    *grad_x = Tensor(x.shape());
    col2im(g_cols, d, g, *grad_x);
  }
}

Tensor global_avg_pool_forward(const Tensor& x) {
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor y({n, c});
#pragma omp parallel for schedule(static)
  for (long i = 0; i < as_long(n * c); ++i) {
    const double* src = x.data() + i * plane;
    double acc = 0.0;
    for (std::size_t p = 0; p < plane; ++p) acc += src[p];
    y[i] = acc / static_cast<double>(plane);
  }
  return y;
}

Tensor global_avg_pool_backward(const Tensor& grad_y, const Shape& input_shape) {
  Tensor gx(input_shape);
  const std::size_t nc = input_shape[0] * input_shape[1], plane = input_shape[2] * input_shape[3];
  const double scale = 1.0 / static_cast<double>(plane);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < as_long(nc); ++i) {
    std::fill_n(gx.data() + i * plane, plane, grad_y[i] * scale);
  }
  return gx;
}

}  // namespace latdir::kernels::parallel
