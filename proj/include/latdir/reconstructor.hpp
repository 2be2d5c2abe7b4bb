// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "latdir/generator.hpp"
#include "latdir/latent.hpp"
#include "latdir/params.hpp"

namespace latdir {

enum class Backbone { small, resnet18 };

std::string to_string(Backbone backbone);
Backbone parse_backbone(const std::string& text);

/// Reconstructor output for a batch of image pairs.
struct PairPredictions {
  Tensor logits;   // (N, K), unnormalized
  Tensor epsilon;  // (N)
};

struct ReconstructorTrace {
  struct Block {
    Tensor in, pre1, act1, pre2, sum;
  };
  Tensor input;
  std::vector<Tensor> conv_in;
  std::vector<Tensor> conv_pre;
  std::vector<Block> blocks;
  Tensor features, pooled, hidden_pre, hidden;
};

/// Pair network R: (before, after) images concatenated along channels
/// (2C input channels, before first) -> direction logits and one signed
/// magnitude per pair.
///
/// small:    4 stride-2 3x3 conv blocks, final map flattened.
/// resnet18: 3x3 stem + 4 stages of 2 residual basic blocks, global pool.
/// Both end in a shared hidden layer feeding the two heads.
class Reconstructor {
 public:
  Reconstructor() = default;
  Reconstructor(DirectionSpec spec, ImageShape image, Backbone backbone, std::uint64_t seed);

  static Reconstructor from_params(DirectionSpec spec, ImageShape image, Backbone backbone, ParamSet params);

  PairPredictions forward(const Tensor& before, const Tensor& after) const;
  PairPredictions forward(const Tensor& before, const Tensor& after, ReconstructorTrace& trace) const;

  /// Accumulates parameter gradients; returns gradients w.r.t. (before, after).
  std::pair<Tensor, Tensor> backward(const ReconstructorTrace& trace, const Tensor& grad_logits,
                                     const Tensor& grad_epsilon, ParamSet& grads) const;

  const DirectionSpec& spec() const { return spec_; }
  const ImageShape& image_shape() const { return image_; }
  Backbone backbone() const { return backbone_; }
  std::size_t input_channels() const { return 2 * image_.channels; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }

 private:
  struct BlockSpec {
    std::string name;
    std::size_t in, out, stride;
    bool projection;
  };

  void build_layout();
  Tensor backbone_forward(const Tensor& x, ReconstructorTrace& trace) const;
  Tensor backbone_backward(const ReconstructorTrace& trace, const Tensor& grad_features, ParamSet& grads) const;

  DirectionSpec spec_;
  ImageShape image_;
  Backbone backbone_ = Backbone::small;
  std::vector<std::size_t> small_widths_;
  std::vector<BlockSpec> blocks_;
  std::size_t feature_width_ = 0;
  std::size_t hidden_width_ = 0;
  ParamSet params_;
};

/// Fresh reconstructor; ConfigError when the resolution is too small for the
/// chosen backbone.
Reconstructor init_reconstructor(const DirectionSpec& spec, const ImageShape& image, Backbone backbone,
                                 std::uint64_t seed);

}  // namespace latdir
