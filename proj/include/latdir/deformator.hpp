// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latdir/latent.hpp"
#include "latdir/params.hpp"

namespace latdir {

enum class DeformatorMode { nonlinear, linear };

std::string to_string(DeformatorMode mode);
DeformatorMode parse_deformator_mode(const std::string& text);

/// Activations kept from a training forward pass.
struct DeformatorTrace {
  Tensor input;
  Tensor pre0, act0, pre1, act1;
};

/// Maps encoded shifts eps * e_k (rows of an (N, K) tensor) to latent shifts
/// (N, d).
///
/// nonlinear: K -> hidden -> hidden -> d fully connected, ELU between layers,
///            no activation on the output. Layers carry no bias so that a zero
///            magnitude always yields a zero shift.
/// linear:    a single (d, K) matrix; A(eps e_k) = eps * column k exactly.
class Deformator {
 public:
  static constexpr std::size_t kDefaultHidden = 1024;

  Deformator() = default;
  Deformator(DirectionSpec spec, DeformatorMode mode, std::size_t hidden, std::uint64_t seed);

  /// Wraps existing parameters; validates names and shapes.
  static Deformator from_params(DirectionSpec spec, DeformatorMode mode, ParamSet params);

  Tensor forward(const Tensor& encoded) const;
  Tensor forward(const Tensor& encoded, DeformatorTrace& trace) const;

  /// Accumulates parameter gradients for d(loss)/d(shift) = grad_shift.
  void backward(const DeformatorTrace& trace, const Tensor& grad_shift, ParamSet& grads) const;

  /// A(eps * e_k) for one request.
  std::vector<double> shift(const ShiftRequest& request) const;

  const DirectionSpec& spec() const { return spec_; }
  DeformatorMode mode() const { return mode_; }
  std::size_t hidden() const { return hidden_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }

 private:
  void check_input(const Tensor& encoded) const;

  DirectionSpec spec_;
  DeformatorMode mode_ = DeformatorMode::nonlinear;
  std::size_t hidden_ = 0;
  ParamSet params_;
};

}  // namespace latdir
