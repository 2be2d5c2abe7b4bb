// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/reconstructor.hpp"

#include <cmath>

#include "latdir/error.hpp"
#include "latdir/kernels.hpp"
#include "latdir/rng.hpp"

namespace latdir {
namespace {

namespace kp = kernels::parallel;
constexpr double kLeak = 0.2;
constexpr kernels::ConvGeometry kSame{1, 1};
constexpr kernels::ConvGeometry kDown{2, 1};

Tensor uniform(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : t.values()) v = u(rng);
  return t;
}

double he_bound(std::size_t fan_in) {
  return std::sqrt(6.0 / ((1.0 + kLeak * kLeak) * static_cast<double>(fan_in)));
}

}  // namespace

std::string to_string(Backbone backbone) { return backbone == Backbone::resnet18 ? "resnet18" : "small"; }

Backbone parse_backbone(const std::string& text) {
  if (text == "small") return Backbone::small;
  if (text == "resnet18") return Backbone::resnet18;
  throw ConfigError("unknown backbone '" + text + "' (expected small or resnet18)");
}

void Reconstructor::build_layout() {
  const std::size_t in = input_channels();
  small_widths_.clear();
  blocks_.clear();
  if (backbone_ == Backbone::small) {
    small_widths_ = {in, 16, 32, 64, 64};
    // The final map is flattened rather than pooled so blob position survives.
    std::size_t h = image_.height, w = image_.width;
    for (std::size_t i = 0; i + 1 < small_widths_.size(); ++i) {
      h = kernels::conv_output_extent(h, 3, {2, 1});
      w = kernels::conv_output_extent(w, 3, {2, 1});
    }
    feature_width_ = small_widths_.back() * h * w;
  } else {
    const std::size_t widths[] = {16, 32, 64, 128};
    std::size_t prev = 16;
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t b = 0; b < 2; ++b) {
        const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
        blocks_.push_back({"stage" + std::to_string(s) + ".block" + std::to_string(b), prev, widths[s], stride,
                           stride != 1 || prev != widths[s]});
        prev = widths[s];
      }
    }
    feature_width_ = prev;
  }
  hidden_width_ = 128;
}

Reconstructor::Reconstructor(DirectionSpec spec, ImageShape image, Backbone backbone, std::uint64_t seed)
    : spec_(spec), image_(image), backbone_(backbone) {
  spec_.validate();
  if (image_.channels == 0 || image_.height == 0 || image_.width == 0) throw ConfigError("empty image shape");
  const std::size_t min_res = backbone_ == Backbone::small ? 8 : 32;
  if (image_.height < min_res || image_.width < min_res) {
    throw ConfigError("backbone " + to_string(backbone_) + " needs images of at least " + std::to_string(min_res) +
                      "x" + std::to_string(min_res) + ", got " + std::to_string(image_.height) + "x" +
                      std::to_string(image_.width));
  }
  build_layout();
  Rng rng = make_rng(seed, "reconstructor");
  if (backbone_ == Backbone::small) {
    for (std::size_t i = 0; i + 1 < small_widths_.size(); ++i) {
      const std::size_t fan_in = small_widths_[i] * 9;
      params_.add("conv" + std::to_string(i) + ".weight",
                  uniform({small_widths_[i + 1], small_widths_[i], 3, 3}, he_bound(fan_in), rng));
      params_.add("conv" + std::to_string(i) + ".bias", Tensor({small_widths_[i + 1]}));
    }
  } else {
    params_.add("stem.weight", uniform({16, input_channels(), 3, 3}, he_bound(input_channels() * 9), rng));
    params_.add("stem.bias", Tensor({16}));
    for (const auto& b : blocks_) {
      params_.add(b.name + ".conv1.weight", uniform({b.out, b.in, 3, 3}, he_bound(b.in * 9), rng));
      params_.add(b.name + ".conv1.bias", Tensor({b.out}));
      // Residual branches start small so the identity path dominates at init.
      params_.add(b.name + ".conv2.weight", uniform({b.out, b.out, 3, 3}, 0.5 * he_bound(b.out * 9), rng));
      params_.add(b.name + ".conv2.bias", Tensor({b.out}));
      if (b.projection) {
        params_.add(b.name + ".proj.weight", uniform({b.out, b.in, 1, 1}, he_bound(b.in), rng));
        params_.add(b.name + ".proj.bias", Tensor({b.out}));
      }
    }
  }
  params_.add("hidden.weight", uniform({hidden_width_, feature_width_}, he_bound(feature_width_), rng));
  params_.add("hidden.bias", Tensor({hidden_width_}));
  const double head = 1.0 / std::sqrt(static_cast<double>(hidden_width_));
  params_.add("direction.weight", uniform({spec_.num_directions, hidden_width_}, head, rng));
  params_.add("direction.bias", Tensor({spec_.num_directions}));
  params_.add("magnitude.weight", uniform({1, hidden_width_}, head, rng));
  params_.add("magnitude.bias", Tensor({1}));
}

Reconstructor Reconstructor::from_params(DirectionSpec spec, ImageShape image, Backbone backbone, ParamSet params) {
  Reconstructor fresh(spec, image, backbone, 0);
  if (fresh.params_.entries().size() != params.entries().size()) {
    throw ShapeError("reconstructor parameter count mismatch: expected " +
                     std::to_string(fresh.params_.entries().size()) + ", got " +
                     std::to_string(params.entries().size()));
  }
  for (const auto& e : fresh.params_.entries()) {
    require_shape(params.get(e.name), e.value.shape(), "reconstructor " + e.name);
  }
  // Keep the canonical order.
  ParamSet ordered;
  for (const auto& e : fresh.params_.entries()) ordered.add(e.name, params.get(e.name));
  fresh.params_ = std::move(ordered);
  return fresh;
}

Tensor Reconstructor::backbone_forward(const Tensor& x, ReconstructorTrace& t) const {
  t.conv_in.clear();
  t.conv_pre.clear();
  t.blocks.clear();
  Tensor h = x;
  if (backbone_ == Backbone::small) {
    for (std::size_t i = 0; i + 1 < small_widths_.size(); ++i) {
      const std::string n = "conv" + std::to_string(i);
      t.conv_in.push_back(h);
      t.conv_pre.push_back(kp::conv2d_forward(h, params_.get(n + ".weight"), &params_.get(n + ".bias"), kDown));
      h = kernels::leaky_relu_forward(t.conv_pre.back(), kLeak);
    }
    return h;
  }
  t.conv_in.push_back(h);
  t.conv_pre.push_back(kp::conv2d_forward(h, params_.get("stem.weight"), &params_.get("stem.bias"), kSame));
  h = kernels::leaky_relu_forward(t.conv_pre.back(), kLeak);
  for (const auto& b : blocks_) {
    ReconstructorTrace::Block bt;
    bt.in = h;
    const kernels::ConvGeometry g1{b.stride, 1};
    bt.pre1 = kp::conv2d_forward(h, params_.get(b.name + ".conv1.weight"), &params_.get(b.name + ".conv1.bias"), g1);
    bt.act1 = kernels::leaky_relu_forward(bt.pre1, kLeak);
    bt.pre2 =
        kp::conv2d_forward(bt.act1, params_.get(b.name + ".conv2.weight"), &params_.get(b.name + ".conv2.bias"), kSame);
    bt.sum = bt.pre2;
    if (b.projection) {
      kernels::add_inplace(bt.sum, kp::conv2d_forward(h, params_.get(b.name + ".proj.weight"),
                                                      &params_.get(b.name + ".proj.bias"), {b.stride, 0}));
    } else {
      kernels::add_inplace(bt.sum, h);
    }
    h = kernels::leaky_relu_forward(bt.sum, kLeak);
    t.blocks.push_back(std::move(bt));
  }
  return h;
}

Tensor Reconstructor::backbone_backward(const ReconstructorTrace& t, const Tensor& grad_features,
                                        ParamSet& grads) const {
  Tensor g = grad_features;
  if (backbone_ == Backbone::small) {
    for (std::size_t i = small_widths_.size() - 1; i-- > 0;) {
      const std::string n = "conv" + std::to_string(i);
      const Tensor g_pre = kernels::leaky_relu_backward(t.conv_pre[i], g, kLeak);
      kp::conv2d_backward(t.conv_in[i], params_.get(n + ".weight"), g_pre, kDown, &g, grads.get(n + ".weight"),
                          &grads.get(n + ".bias"));
    }
    return g;
  }
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    const auto& b = blocks_[i];
    const auto& bt = t.blocks[i];
    const Tensor g_sum = kernels::leaky_relu_backward(bt.sum, g, kLeak);
    Tensor g_act1, g_in, g_skip;
    kp::conv2d_backward(bt.act1, params_.get(b.name + ".conv2.weight"), g_sum, kSame, &g_act1,
                        grads.get(b.name + ".conv2.weight"), &grads.get(b.name + ".conv2.bias"));
    const Tensor g_pre1 = kernels::leaky_relu_backward(bt.pre1, g_act1, kLeak);
    kp::conv2d_backward(bt.in, params_.get(b.name + ".conv1.weight"), g_pre1, {b.stride, 1}, &g_in,
                        grads.get(b.name + ".conv1.weight"), &grads.get(b.name + ".conv1.bias"));
    if (b.projection) {
      kp::conv2d_backward(bt.in, params_.get(b.name + ".proj.weight"), g_sum, {b.stride, 0}, &g_skip,
                          grads.get(b.name + ".proj.weight"), &grads.get(b.name + ".proj.bias"));
      kernels::add_inplace(g_in, g_skip);
    } else {
      kernels::add_inplace(g_in, g_sum);
    }
    g = std::move(g_in);
  }
  const Tensor g_pre = kernels::leaky_relu_backward(t.conv_pre[0], g, kLeak);
  kp::conv2d_backward(t.conv_in[0], params_.get("stem.weight"), g_pre, kSame, &g, grads.get("stem.weight"),
                      &grads.get("stem.bias"));
  return g;
}

PairPredictions Reconstructor::forward(const Tensor& before, const Tensor& after) const {
  ReconstructorTrace unused;
  return forward(before, after, unused);
}

PairPredictions Reconstructor::forward(const Tensor& before, const Tensor& after, ReconstructorTrace& t) const {
  if (before.shape() != after.shape()) {
    throw ShapeError("reconstructor: pair shapes differ, " + shape_string(before.shape()) + " vs " +
                     shape_string(after.shape()));
  }
  require_shape(before, image_.batch(before.rank() == 4 ? before.dim(0) : 0), "reconstructor input");
  const std::size_t n = before.dim(0);
  t.input = concat_channels(before, after);
  t.features = backbone_forward(t.input, t);
  t.pooled = backbone_ == Backbone::small ? t.features.reshaped({n, feature_width_})
                                          : kp::global_avg_pool_forward(t.features);
  t.hidden_pre = kp::linear_forward(t.pooled, params_.get("hidden.weight"), &params_.get("hidden.bias"));
  t.hidden = kernels::leaky_relu_forward(t.hidden_pre, kLeak);
  PairPredictions p;
  p.logits = kp::linear_forward(t.hidden, params_.get("direction.weight"), &params_.get("direction.bias"));
  p.epsilon = kp::linear_forward(t.hidden, params_.get("magnitude.weight"), &params_.get("magnitude.bias"))
                  .reshaped({n});
  return p;
}

std::pair<Tensor, Tensor> Reconstructor::backward(const ReconstructorTrace& t, const Tensor& grad_logits,
                                                  const Tensor& grad_epsilon, ParamSet& grads) const {
  const std::size_t n = t.input.dim(0);
  require_shape(grad_logits, {n, spec_.num_directions}, "reconstructor logit gradient");
  require_shape(grad_epsilon, {n}, "reconstructor magnitude gradient");
  Tensor g_hidden, g_hidden_eps;
  kp::linear_backward(t.hidden, params_.get("direction.weight"), grad_logits, &g_hidden,
                      grads.get("direction.weight"), &grads.get("direction.bias"));
  kp::linear_backward(t.hidden, params_.get("magnitude.weight"), grad_epsilon.reshaped({n, 1}), &g_hidden_eps,
                      grads.get("magnitude.weight"), &grads.get("magnitude.bias"));
  kernels::add_inplace(g_hidden, g_hidden_eps);
  const Tensor g_hidden_pre = kernels::leaky_relu_backward(t.hidden_pre, g_hidden, kLeak);
  Tensor g_pooled;
  kp::linear_backward(t.pooled, params_.get("hidden.weight"), g_hidden_pre, &g_pooled, grads.get("hidden.weight"),
                      &grads.get("hidden.bias"));
  const Tensor g_features = backbone_ == Backbone::small ? g_pooled.reshaped(t.features.shape())
                                                         : kp::global_avg_pool_backward(g_pooled, t.features.shape());
  const Tensor g_input = backbone_backward(t, g_features, grads);
  Tensor g_before, g_after;
  split_channels(g_input, image_.channels, g_before, g_after);
  return {std::move(g_before), std::move(g_after)};
}

Reconstructor init_reconstructor(const DirectionSpec& spec, const ImageShape& image, Backbone backbone,
                                 std::uint64_t seed) {
  return Reconstructor(spec, image, backbone, seed);
}

}  // namespace latdir
