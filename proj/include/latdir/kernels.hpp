// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "latdir/tensor.hpp"

// Dense network kernels. Every heavy kernel exists twice: `serial` holds the
// straightforward loop nests used as the reference in tests, `parallel` holds
// the OpenMP + blocked-GEMM versions used by the networks. Both produce the
// same values up to floating-point reassociation, and the parallel versions
// are deterministic for any thread count (no cross-thread reductions).
//
// Conventions: activations are NCHW (images) or NF (vectors); linear weights
// are (out, in); conv weights are (out, in, kh, kw). Backward kernels
// ACCUMULATE into parameter gradients and OVERWRITE input gradients.

namespace latdir::kernels {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, ConvGeometry g);

namespace serial {

Tensor linear_forward(const Tensor& x, const Tensor& weight, const Tensor* bias);
void linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor& grad_weight, Tensor* grad_bias);

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g);
void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, ConvGeometry g, Tensor* grad_x,
                     Tensor& grad_weight, Tensor* grad_bias);

Tensor global_avg_pool_forward(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& grad_y, const Shape& input_shape);

}  // namespace serial

namespace parallel {

Tensor linear_forward(const Tensor& x, const Tensor& weight, const Tensor* bias);
void linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor& grad_weight, Tensor* grad_bias);

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor* bias, ConvGeometry g);
void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, ConvGeometry g, Tensor* grad_x,
                     Tensor& grad_weight, Tensor* grad_bias);

Tensor global_avg_pool_forward(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& grad_y, const Shape& input_shape);

}  // namespace parallel

// Elementwise maps. These have no serial twin; the loops are trivially
// independent and share one implementation.
Tensor elu_forward(const Tensor& x);
Tensor elu_backward(const Tensor& x, const Tensor& grad_y);

Tensor leaky_relu_forward(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_y, double slope);

Tensor tanh_forward(const Tensor& x);
// Takes the forward OUTPUT, not the input.
Tensor tanh_backward(const Tensor& y, const Tensor& grad_y);

Tensor upsample2x_forward(const Tensor& x);
Tensor upsample2x_backward(const Tensor& grad_y);

void add_inplace(Tensor& dst, const Tensor& src);

}  // namespace latdir::kernels
