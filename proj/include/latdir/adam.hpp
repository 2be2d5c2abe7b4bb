// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "latdir/params.hpp"

namespace latdir {

struct AdamSettings {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamSettings&) const = default;
};

/// Adam with bias correction and a constant learning rate. Moments are kept
/// per parameter name so the state round-trips through checkpoints.
class Adam {
 public:
  Adam() = default;
  Adam(AdamSettings settings, const ParamSet& params);

  void step(ParamSet& params, const ParamSet& grads);

  const AdamSettings& settings() const { return settings_; }
  std::uint64_t steps_taken() const { return t_; }
  const ParamSet& first_moment() const { return m_; }
  const ParamSet& second_moment() const { return v_; }

  static Adam restore(AdamSettings settings, ParamSet m, ParamSet v, std::uint64_t t);

  bool operator==(const Adam&) const = default;

 private:
  AdamSettings settings_;
  ParamSet m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace latdir
