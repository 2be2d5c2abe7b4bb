// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels against their OpenMP/Eigen counterparts on the
// shapes the trainer actually uses (batch 64 = two pairs of 32).

#include <benchmark/benchmark.h>

#include <random>

#include "latdir/kernels.hpp"
#include "latdir/rng.hpp"

namespace {

using latdir::Shape;
using latdir::Tensor;
namespace k = latdir::kernels;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  latdir::Rng rng = latdir::make_rng(seed, "bench");
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = normal(rng);
  return t;
}

// Args: batch, channels in, channels out, spatial extent.
template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), c = static_cast<std::size_t>(state.range(1)),
             o = static_cast<std::size_t>(state.range(2)), hw = static_cast<std::size_t>(state.range(3));
  const Tensor x = random_tensor({n, c, hw, hw}, 1), w = random_tensor({o, c, 3, 3}, 2), b = random_tensor({o}, 3);
  const k::ConvGeometry g{2, 1};
  for (auto _ : state) {
    Tensor y = Parallel ? k::parallel::conv2d_forward(x, w, &b, g) : k::serial::conv2d_forward(x, w, &b, g);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), c = static_cast<std::size_t>(state.range(1)),
             o = static_cast<std::size_t>(state.range(2)), hw = static_cast<std::size_t>(state.range(3));
  const Tensor x = random_tensor({n, c, hw, hw}, 1), w = random_tensor({o, c, 3, 3}, 2);
  const k::ConvGeometry g{2, 1};
  const std::size_t ho = k::conv_output_extent(hw, 3, g);
  const Tensor gy = random_tensor({n, o, ho, ho}, 4);
  Tensor gw(w.shape()), gb({o}), gx;
  for (auto _ : state) {
    if (Parallel) {
      k::parallel::conv2d_backward(x, w, gy, g, &gx, gw, &gb);
    } else {
      k::serial::conv2d_backward(x, w, gy, g, &gx, gw, &gb);
    }
    benchmark::DoNotOptimize(gx.data());
  }
}

// Args: batch, in, out.
template <bool Parallel>
void BM_Linear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), in = static_cast<std::size_t>(state.range(1)),
             out = static_cast<std::size_t>(state.range(2));
  const Tensor x = random_tensor({n, in}, 1), w = random_tensor({out, in}, 2);
  const Tensor gy = random_tensor({n, out}, 3);
  Tensor gw(w.shape()), gx;
  for (auto _ : state) {
    Tensor y = Parallel ? k::parallel::linear_forward(x, w, nullptr) : k::serial::linear_forward(x, w, nullptr);
    if (Parallel) {
      k::parallel::linear_backward(x, w, gy, &gx, gw, nullptr);
    } else {
      k::serial::linear_backward(x, w, gy, &gx, gw, nullptr);
    }
    benchmark::DoNotOptimize(y.data());
    benchmark::DoNotOptimize(gx.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({64, 2, 64, 32})->Args({64, 64, 64, 16})->Args({64, 64, 64, 4})->Unit(benchmark::kMillisecond);
}

void linear_args(benchmark::internal::Benchmark* b) {
  // Deformator hidden layer and the reconstructor head.
  b->Args({64, 1024, 1024})->Args({64, 256, 512})->Unit(benchmark::kMillisecond);
}

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Apply(conv_args);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(BM_Linear<false>)->Name("linear_fwd_bwd/serial")->Apply(linear_args);
BENCHMARK(BM_Linear<true>)->Name("linear_fwd_bwd/parallel")->Apply(linear_args);

}  // namespace

BENCHMARK_MAIN();
