// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/config.hpp"

#include <cmath>
#include <fstream>

#include "latdir/deformator.hpp"
#include "latdir/error.hpp"
#include "latdir/reconstructor.hpp"

namespace latdir {
namespace {

// One table drives both directions of the JSON mapping.
template <typename Visitor>
void visit_fields(TrainConfig& c, Visitor&& v) {
  v("lambda", c.lambda);
  v("gamma", c.gamma);
  v("learning_rate", c.learning_rate);
  v("adam_beta1", c.adam_beta1);
  v("adam_beta2", c.adam_beta2);
  v("adam_epsilon", c.adam_epsilon);
  v("steps", c.steps);
  v("batch_size", c.batch_size);
  v("eps_low", c.eps_low);
  v("eps_high", c.eps_high);
  v("eps_deadzone", c.eps_deadzone);
  v("num_directions", c.num_directions);
  v("latent_dim", c.latent_dim);
  v("seed", c.seed);
  v("allow_equal_directions", c.allow_equal_directions);
  v("two_step", c.two_step);
  v("deformator_mode", c.deformator_mode);
  v("deformator_hidden", c.deformator_hidden);
  v("backbone", c.backbone);
  v("generator", c.generator);
  v("generator_seed", c.generator_seed);
  v("resolution", c.resolution);
  v("generator_checkpoint", c.generator_checkpoint);
  v("injection_site", c.injection_site);
  v("style_layers", c.style_layers);
  v("num_classes", c.num_classes);
  v("fixed_class", c.fixed_class);
  v("eval_interval", c.eval_interval);
  v("eval_samples", c.eval_samples);
  v("ppl_delta", c.ppl_delta);
  v("checkpoint_interval", c.checkpoint_interval);
}

template <typename T>
void read_field(const nlohmann::json& j, const std::string& key, T& out) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) throw ConfigError("");
    } else {
      if (!j.is_number()) throw ConfigError("");
    }
    out = j.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has an invalid value: " + j.dump());
  }
}

}  // namespace

GeneratorOptions TrainConfig::generator_options() const {
  GeneratorOptions o;
  o.name = generator;
  o.latent_dim = latent_dim;
  o.resolution = resolution;
  o.seed = generator_seed;
  o.checkpoint = generator_checkpoint;
  o.style_layers = style_layers;
  o.site = parse_injection_site(injection_site);
  o.num_classes = num_classes;
  o.fixed_class = fixed_class;
  return o;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw ConfigError("config key '" + key + "' " + why); };
  if (!(lambda >= 0.0)) fail("lambda", "must be >= 0");
  if (!(gamma >= 0.0)) fail("gamma", "must be >= 0");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1", "must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2", "must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon", "must be > 0");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(eps_deadzone >= 0.0)) fail("eps_deadzone", "must be >= 0");
  if (!(eps_low < -eps_deadzone && eps_deadzone < eps_high)) {
    fail("eps_low", "and eps_high must satisfy eps_low < -eps_deadzone < eps_deadzone < eps_high");
  }
  if (!std::isfinite(eps_low) || !std::isfinite(eps_high)) fail("eps_low", "and eps_high must be finite");
  if (num_directions < 1) fail("num_directions", "must be >= 1");
  if (latent_dim < 1) fail("latent_dim", "must be >= 1");
  if (!allow_equal_directions && num_directions < 2) {
    fail("allow_equal_directions", "can only be false when num_directions >= 2");
  }
  try {
    parse_deformator_mode(deformator_mode);
  } catch (const ConfigError& e) {
    fail("deformator_mode", e.what());
  }
  if (deformator_mode == "nonlinear" && deformator_hidden < 1) fail("deformator_hidden", "must be >= 1");
  try {
    parse_backbone(backbone);
  } catch (const ConfigError& e) {
    fail("backbone", e.what());
  }
  try {
    parse_injection_site(injection_site);
  } catch (const ConfigError& e) {
    fail("injection_site", e.what());
  }
  if (!(ppl_delta > 0.0)) fail("ppl_delta", "must be > 0");
  if (eval_interval > 0 && eval_samples < 1) fail("eval_samples", "must be >= 1 when eval_interval > 0");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  TrainConfig copy = cfg;
  visit_fields(copy, [&](const char* key, auto& field) { j[key] = field; });
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig cfg;
  std::size_t known = 0;
  visit_fields(cfg, [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) {
      read_field(*it, key, field);
      ++known;
    }
  });
  if (known != j.size()) {
    TrainConfig probe;
    for (const auto& [key, _] : j.items()) {
      bool found = false;
      visit_fields(probe, [&](const char* name, auto&) { found = found || key == name; });
      if (!found) throw ConfigError("unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::shared_ptr<const Generator> make_generator(const TrainConfig& cfg) {
  auto gen = GeneratorRegistry::instance().create(cfg.generator_options());
  if (gen->latent_dim() != cfg.latent_dim) {
    throw ConfigError("generator latent_dim " + std::to_string(gen->latent_dim()) + " does not match config " +
                      std::to_string(cfg.latent_dim));
  }
  return gen;
}

}  // namespace latdir
