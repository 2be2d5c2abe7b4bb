// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

// Reference loop nests. Kept deliberately plain; the parallel kernels are
// tested against these.

#include "latdir/error.hpp"
#include "latdir/kernels.hpp"

namespace latdir::kernels {

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, ConvGeometry g) {
  if (input + 2 * g.pad < kernel || g.stride == 0) {
    throw ShapeError("convolution window " + std::to_string(kernel) + " does not fit input extent " +
                     std::to_string(input));
  }
  return (input + 2 * g.pad - kernel) / g.stride + 1;
}

namespace serial {

Tensor linear_forward(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  const std::size_t n = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.dim(1) != in) throw ShapeError("linear: input width does not match weight " + shape_string(weight.shape()));
  Tensor y({n, out});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias ? (*bias)[o] : 0.0;
      for (std::size_t j = 0; j < in; ++j) acc += weight.at(o, j) * x.at(i, j);
      y.at(i, o) = acc;
    }
  }
  return y;
}

void linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor& grad_weight, Tensor* grad_bias) {
  const std::size_t n = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (grad_x) *grad_x = Tensor({n, in});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out; ++o) {
      const double g = grad_y.at(i, o);
      if (grad_bias) (*grad_bias)[o] += g;
      for (std::size_t j = 0; j < in; ++j) {
        grad_weight.at(o, j) += g * x.at(i, j);
        if (grad_x) grad_x->at(i, j) += g * weight.at(o, j);
      }
    }
  }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t o = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != c) throw ShapeError("conv2d: input has " + std::to_string(c) + " channels, weight expects " + std::to_string(weight.dim(1)));
  const std::size_t ho = conv_output_extent(h, kh, g), wo = conv_output_extent(w, kw, g);
  Tensor y({n, o, ho, wo});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = bias ? (*bias)[oc] : 0.0;
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                acc += weight[((oc * c + ic) * kh + ky) * kw + kx] * x[((b * c + ic) * h + iy) * w + ix];
              }
          y[((b * o + oc) * ho + oy) * wo + ox] = acc;
        }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, ConvGeometry g, Tensor* grad_x,
                     Tensor& grad_weight, Tensor* grad_bias) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t o = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const std::size_t ho = grad_y.dim(2), wo = grad_y.dim(3);
  if (grad_x) *grad_x = Tensor(x.shape());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double gy = grad_y[((b * o + oc) * ho + oy) * wo + ox];
          if (grad_bias) (*grad_bias)[oc] += gy;
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                const std::size_t wi = ((oc * c + ic) * kh + ky) * kw + kx;
                const std::size_t xi = ((b * c + ic) * h + iy) * w + ix;
                grad_weight[wi] += gy * x[xi];
                if (grad_x) (*grad_x)[xi] += gy * weight[wi];
              }
        }
}

Tensor global_avg_pool_forward(const Tensor& x) {
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor y({n, c});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) acc += x[(b * c + ch) * plane + p];
      y.at(b, ch) = acc / static_cast<double>(plane);
    }
  return y;
}

Tensor global_avg_pool_backward(const Tensor& grad_y, const Shape& input_shape) {
  Tensor gx(input_shape);
  const std::size_t n = input_shape[0], c = input_shape[1], plane = input_shape[2] * input_shape[3];
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < plane; ++p) gx[(b * c + ch) * plane + p] = grad_y.at(b, ch) / static_cast<double>(plane);
  return gx;
}

}  // namespace serial
}  // namespace latdir::kernels
