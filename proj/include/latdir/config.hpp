// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "latdir/generator.hpp"
#include "latdir/latent.hpp"

namespace latdir {

/// Everything a training run depends on. The JSON form uses these field
/// names verbatim; unknown keys are rejected.
struct TrainConfig {
  // Objective weights: total = classification + lambda * regression + gamma * centroid.
  double lambda = 0.5;
  double gamma = 0.25;

  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  std::uint64_t steps = 5000;
  std::size_t batch_size = 32;

  // Magnitudes are drawn from U[eps_low, eps_high], rejecting |eps| < eps_deadzone.
  double eps_low = -6.0;
  double eps_high = 6.0;
  double eps_deadzone = 0.5;

  std::size_t num_directions = 8;
  std::size_t latent_dim = 8;
  std::uint64_t seed = 0;
  bool allow_equal_directions = true;
  // false drops the second (composed) shift: single-pair objective.
  bool two_step = true;

  std::string deformator_mode = "nonlinear";
  std::size_t deformator_hidden = 1024;
  std::string backbone = "small";

  std::string generator = "blob";
  std::uint64_t generator_seed = 1234;
  std::size_t resolution = 32;
  std::string generator_checkpoint;
  std::string injection_site = "input_latent";
  std::size_t style_layers = 1;
  std::size_t num_classes = 0;
  std::size_t fixed_class = 0;

  // Periodic evaluation / checkpointing; 0 disables.
  std::uint64_t eval_interval = 500;
  std::size_t eval_samples = 1000;
  double ppl_delta = 0.1;
  std::uint64_t checkpoint_interval = 0;

  DirectionSpec direction_spec() const { return {num_directions, latent_dim}; }
  GeneratorOptions generator_options() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Starts from defaults and overrides the keys present in `j`.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);

std::shared_ptr<const Generator> make_generator(const TrainConfig& cfg);

}  // namespace latdir
