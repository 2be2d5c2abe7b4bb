// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/deformator.hpp"

#include <cmath>

#include "latdir/error.hpp"
#include "latdir/kernels.hpp"
#include "latdir/rng.hpp"

namespace latdir {
namespace {

namespace k = kernels;

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

std::string to_string(DeformatorMode mode) { return mode == DeformatorMode::linear ? "linear" : "nonlinear"; }

DeformatorMode parse_deformator_mode(const std::string& text) {
  if (text == "linear") return DeformatorMode::linear;
  if (text == "nonlinear") return DeformatorMode::nonlinear;
  throw ConfigError("unknown deformator mode '" + text + "' (expected linear or nonlinear)");
}

Deformator::Deformator(DirectionSpec spec, DeformatorMode mode, std::size_t hidden, std::uint64_t seed)
    : spec_(spec), mode_(mode), hidden_(mode == DeformatorMode::linear ? 0 : hidden) {
  spec_.validate();
  Rng rng = make_rng(seed, "deformator");
  const std::size_t kk = spec.num_directions, d = spec.latent_dim;
  if (mode == DeformatorMode::linear) {
    params_.add("matrix", uniform_tensor({d, kk}, 1.0 / std::sqrt(static_cast<double>(kk)), rng));
  } else {
    if (hidden == 0) throw ConfigError("deformator hidden width must be positive");
    params_.add("fc0.weight", uniform_tensor({hidden, kk}, 1.0 / std::sqrt(static_cast<double>(kk)), rng));
    params_.add("fc1.weight", uniform_tensor({hidden, hidden}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng));
    params_.add("fc2.weight", uniform_tensor({d, hidden}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng));
  }

  // Rescale the output layer so unit-magnitude shifts have mean norm 1.
  Tensor eye({kk, kk});
  for (std::size_t i = 0; i < kk; ++i) eye.at(i, i) = 1.0;
  const Tensor out = forward(eye);
  double mean_norm = 0.0;
  for (std::size_t i = 0; i < kk; ++i) {
    double sq = 0.0;
    for (double v : out.row(i)) sq += v * v;
    mean_norm += std::sqrt(sq) / static_cast<double>(kk);
  }
  if (mean_norm > 0.0) {
    Tensor& last = params_.get(mode == DeformatorMode::linear ? "matrix" : "fc2.weight");
    for (double& v : last.values()) v /= mean_norm;
  }
}

Deformator Deformator::from_params(DirectionSpec spec, DeformatorMode mode, ParamSet params) {
  spec.validate();
  Deformator a;
  a.spec_ = spec;
  a.mode_ = mode;
  const std::size_t kk = spec.num_directions, d = spec.latent_dim;
  if (mode == DeformatorMode::linear) {
    require_shape(params.get("matrix"), {d, kk}, "deformator matrix");
    a.hidden_ = 0;
  } else {
    const Tensor& fc0 = params.get("fc0.weight");
    if (fc0.rank() != 2) throw ShapeError("deformator fc0.weight must be rank 2");
    a.hidden_ = fc0.dim(0);
    require_shape(fc0, {a.hidden_, kk}, "deformator fc0.weight");
    require_shape(params.get("fc1.weight"), {a.hidden_, a.hidden_}, "deformator fc1.weight");
    require_shape(params.get("fc2.weight"), {d, a.hidden_}, "deformator fc2.weight");
  }
  a.params_ = std::move(params);
  return a;
}

void Deformator::check_input(const Tensor& encoded) const {
  if (encoded.rank() != 2 || encoded.dim(1) != spec_.num_directions) {
    throw ShapeError("deformator expects (N, " + std::to_string(spec_.num_directions) + ") input, got " +
                     shape_string(encoded.shape()));
  }
}

Tensor Deformator::forward(const Tensor& encoded) const {
  DeformatorTrace unused;
  return forward(encoded, unused);
}

Tensor Deformator::forward(const Tensor& encoded, DeformatorTrace& trace) const {
  check_input(encoded);
  trace.input = encoded;
  if (mode_ == DeformatorMode::linear) return k::parallel::linear_forward(encoded, params_.get("matrix"), nullptr);
  trace.pre0 = k::parallel::linear_forward(encoded, params_.get("fc0.weight"), nullptr);
  trace.act0 = k::elu_forward(trace.pre0);
  trace.pre1 = k::parallel::linear_forward(trace.act0, params_.get("fc1.weight"), nullptr);
  trace.act1 = k::elu_forward(trace.pre1);
  return k::parallel::linear_forward(trace.act1, params_.get("fc2.weight"), nullptr);
}

void Deformator::backward(const DeformatorTrace& trace, const Tensor& grad_shift, ParamSet& grads) const {
  require_shape(grad_shift, {trace.input.dim(0), spec_.latent_dim}, "deformator grad");
  if (mode_ == DeformatorMode::linear) {
    k::parallel::linear_backward(trace.input, params_.get("matrix"), grad_shift, nullptr, grads.get("matrix"), nullptr);
    return;
  }
  Tensor g_act1, g_act0;
  k::parallel::linear_backward(trace.act1, params_.get("fc2.weight"), grad_shift, &g_act1, grads.get("fc2.weight"),
                               nullptr);
  const Tensor g_pre1 = k::elu_backward(trace.pre1, g_act1);
  k::parallel::linear_backward(trace.act0, params_.get("fc1.weight"), g_pre1, &g_act0, grads.get("fc1.weight"),
                               nullptr);
  const Tensor g_pre0 = k::elu_backward(trace.pre0, g_act0);
  k::parallel::linear_backward(trace.input, params_.get("fc0.weight"), g_pre0, nullptr, grads.get("fc0.weight"),
                               nullptr);
}

std::vector<double> Deformator::shift(const ShiftRequest& request) const {
  const Tensor enc = encode_shifts(std::span(&request, 1), spec_.num_directions);
  const Tensor out = forward(enc);
  return out.storage();
}

}  // namespace latdir
