// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "latdir/error.hpp"
#include "latdir/kernels.hpp"
#include "support.hpp"

using namespace latdir;
namespace ks = latdir::kernels::serial;
namespace kp = latdir::kernels::parallel;
using latdir::testing::max_abs_diff;
using latdir::testing::random_tensor;

TEST_CASE("conv output extent") {
  CHECK(kernels::conv_output_extent(32, 3, {2, 1}) == 16);
  CHECK(kernels::conv_output_extent(8, 3, {1, 1}) == 8);
  CHECK(kernels::conv_output_extent(5, 3, {2, 0}) == 2);
}

TEST_CASE("serial linear layer on a hand example") {
  const Tensor x({1, 2}, {1, 2});
  const Tensor w({2, 2}, {1, 1, 0, -1});
  const Tensor b({2}, {0.5, 0});
  CHECK(ks::linear_forward(x, w, &b).storage() == std::vector<double>{3.5, -2});
}

TEST_CASE("serial conv on a hand example") {
  // 1x1x3x3 input, 1x1x2x2 kernel of ones, no padding.
  const Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor w({1, 1, 2, 2}, 1.0);
  const Tensor y = ks::conv2d_forward(x, w, nullptr, {1, 0});
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.storage() == std::vector<double>{12, 16, 24, 28});
}

TEST_CASE("parallel kernels agree with the serial reference") {
  const Tensor x = random_tensor({5, 3, 9, 7}, 1);
  const Tensor w = random_tensor({4, 3, 3, 3}, 2);
  const Tensor b = random_tensor({4}, 3);
  for (kernels::ConvGeometry g : {kernels::ConvGeometry{1, 1}, kernels::ConvGeometry{2, 1}, kernels::ConvGeometry{2, 0}}) {
    const Tensor ys = ks::conv2d_forward(x, w, &b, g);
    const Tensor yp = kp::conv2d_forward(x, w, &b, g);
    REQUIRE(ys.shape() == yp.shape());
    CHECK(max_abs_diff(ys, yp) < 1e-12);

    const Tensor gy = random_tensor(ys.shape(), 4);
    Tensor gxs, gxp, gws(w.shape()), gwp(w.shape()), gbs(b.shape()), gbp(b.shape());
    ks::conv2d_backward(x, w, gy, g, &gxs, gws, &gbs);
    kp::conv2d_backward(x, w, gy, g, &gxp, gwp, &gbp);
    CHECK(max_abs_diff(gxs, gxp) < 1e-11);
    CHECK(max_abs_diff(gws, gwp) < 1e-11);
    CHECK(max_abs_diff(gbs, gbp) < 1e-11);
  }

  const Tensor xl = random_tensor({6, 10}, 5);
  const Tensor wl = random_tensor({7, 10}, 6);
  const Tensor bl = random_tensor({7}, 7);
  CHECK(max_abs_diff(ks::linear_forward(xl, wl, &bl), kp::linear_forward(xl, wl, &bl)) < 1e-12);
  const Tensor gyl = random_tensor({6, 7}, 8);
  Tensor gxs, gxp, gws(wl.shape()), gwp(wl.shape()), gbs(bl.shape()), gbp(bl.shape());
  ks::linear_backward(xl, wl, gyl, &gxs, gws, &gbs);
  kp::linear_backward(xl, wl, gyl, &gxp, gwp, &gbp);
  CHECK(max_abs_diff(gxs, gxp) < 1e-12);
  CHECK(max_abs_diff(gws, gwp) < 1e-12);
  CHECK(max_abs_diff(gbs, gbp) < 1e-12);

  CHECK(max_abs_diff(ks::global_avg_pool_forward(x), kp::global_avg_pool_forward(x)) < 1e-14);
}

TEST_CASE("weight gradients accumulate") {
  const Tensor x = random_tensor({2, 3}, 1);
  const Tensor w = random_tensor({2, 3}, 2);
  const Tensor gy = random_tensor({2, 2}, 3);
  Tensor once(w.shape()), twice(w.shape());
  kp::linear_backward(x, w, gy, nullptr, once, nullptr);
  kp::linear_backward(x, w, gy, nullptr, twice, nullptr);
  kp::linear_backward(x, w, gy, nullptr, twice, nullptr);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]));
}

TEST_CASE("conv backward matches finite differences") {
  Tensor x = random_tensor({2, 2, 6, 6}, 11);
  Tensor w = random_tensor({3, 2, 3, 3}, 12);
  const kernels::ConvGeometry g{2, 1};
  const Tensor gy = random_tensor(kp::conv2d_forward(x, w, nullptr, g).shape(), 13);
  Tensor gx, gw(w.shape());
  kp::conv2d_backward(x, w, gy, g, &gx, gw, nullptr);
  auto objective = [&] {
    const Tensor y = kp::conv2d_forward(x, w, nullptr, g);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * gy[i];
    return s;
  };
  for (Tensor* t : {&x, &w}) {
    const Tensor& analytic = t == &x ? gx : gw;
    for (std::size_t i = 0; i < t->size(); i += 5) {
      const double keep = (*t)[i];
      (*t)[i] = keep + 1e-5;
      const double up = objective();
      (*t)[i] = keep - 1e-5;
      const double down = objective();
      (*t)[i] = keep;
      CHECK(analytic[i] == doctest::Approx((up - down) / 2e-5).epsilon(1e-7));
    }
  }
}

TEST_CASE("elementwise maps") {
  const Tensor x({4}, {-2.0, -0.5, 0.0, 1.5});
  const Tensor e = kernels::elu_forward(x);
  CHECK(e[0] == doctest::Approx(std::exp(-2.0) - 1.0));
  CHECK(e[3] == 1.5);
  const Tensor l = kernels::leaky_relu_forward(x, 0.2);
  CHECK(l[0] == doctest::Approx(-0.4));
  CHECK(l[3] == 1.5);
  const Tensor t = kernels::tanh_forward(x);
  const Tensor gt = kernels::tanh_backward(t, Tensor({4}, 1.0));
  for (std::size_t i = 0; i < 4; ++i) CHECK(gt[i] == doctest::Approx(1.0 - std::tanh(x[i]) * std::tanh(x[i])));

  const Tensor img({1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor up = kernels::upsample2x_forward(img);
  CHECK(up.shape() == Shape{1, 1, 4, 4});
  CHECK(up.storage() == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});
  const Tensor back = kernels::upsample2x_backward(Tensor({1, 1, 4, 4}, 1.0));
  CHECK(back.storage() == std::vector<double>{4, 4, 4, 4});
}

TEST_CASE("kernels reject mismatched shapes") {
  CHECK_THROWS_AS(kp::linear_forward(Tensor({2, 3}), Tensor({2, 4}), nullptr), ShapeError);
  CHECK_THROWS_AS(kp::conv2d_forward(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), nullptr, {1, 1}), ShapeError);
  Tensor a({3});
  CHECK_THROWS_AS(kernels::add_inplace(a, Tensor({4})), ShapeError);
}
