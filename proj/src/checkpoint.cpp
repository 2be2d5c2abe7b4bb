// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/checkpoint.hpp"

#include "latdir/container.hpp"
#include "latdir/error.hpp"

namespace latdir {
namespace {

constexpr const char* kFormat = "latdir-training-state";

void add_adam(Container& c, const std::string& prefix, const Adam& adam) {
  c.add_all(prefix + ".m.", adam.first_moment());
  c.add_all(prefix + ".v.", adam.second_moment());
}

template <typename T>
void check_field(const std::string& key, const T& stored, const T& expected, const std::string& path) {
  if (stored != expected) {
    nlohmann::json a = stored, b = expected;
    throw IncompatibleCheckpointError(path + ": checkpoint has " + key + " = " + a.dump() + " but config has " +
                                      key + " = " + b.dump());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state) {
  Container c;
  c.header = {{"format", kFormat},
              {"config", to_json(state.config)},
              {"step", state.step},
              {"image",
               {state.reconstructor.image_shape().channels, state.reconstructor.image_shape().height,
                state.reconstructor.image_shape().width}},
              {"adam_deformator_steps", state.deformator_optimizer.steps_taken()},
              {"adam_reconstructor_steps", state.reconstructor_optimizer.steps_taken()}};
  c.add_all("deformator.", state.deformator.params());
  c.add_all("reconstructor.", state.reconstructor.params());
  c.add("bank.centroids", state.bank.centroids());
  Tensor counts({state.bank.counts().size()});
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] = static_cast<double>(state.bank.counts()[k]);
  c.add("bank.counts", counts);
  add_adam(c, "adam.deformator", state.deformator_optimizer);
  add_adam(c, "adam.reconstructor", state.reconstructor_optimizer);
  write_container(path, c);
}

TrainingState load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path);
  if (c.header.value("format", "") != kFormat) {
    throw IncompatibleCheckpointError(path.string() + " is not a training checkpoint");
  }
  TrainingState s;
  try {
    s.config = config_from_json(c.header.at("config"));
    s.step = c.header.at("step").get<std::uint64_t>();
    const DirectionSpec spec = s.config.direction_spec();
    s.deformator = Deformator::from_params(spec, parse_deformator_mode(s.config.deformator_mode),
                                           c.extract("deformator."));
    const auto& im = c.header.at("image");
    const ImageShape image{im.at(0).get<std::size_t>(), im.at(1).get<std::size_t>(), im.at(2).get<std::size_t>()};
    s.reconstructor =
        Reconstructor::from_params(spec, image, parse_backbone(s.config.backbone), c.extract("reconstructor."));

    const Tensor& counts_t = c.tensor("bank.counts");
    std::vector<std::uint64_t> counts(counts_t.size());
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] = static_cast<std::uint64_t>(counts_t[k]);
    s.bank = CentroidBank::restore(spec, c.tensor("bank.centroids"), std::move(counts));

    const AdamSettings settings{s.config.learning_rate, s.config.adam_beta1, s.config.adam_beta2,
                                s.config.adam_epsilon};
    s.deformator_optimizer = Adam::restore(settings, c.extract("adam.deformator.m."), c.extract("adam.deformator.v."),
                                           c.header.at("adam_deformator_steps").get<std::uint64_t>());
    s.reconstructor_optimizer =
        Adam::restore(settings, c.extract("adam.reconstructor.m."), c.extract("adam.reconstructor.v."),
                      c.header.at("adam_reconstructor_steps").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpointError(path.string() + ": malformed header: " + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CorruptCheckpointError(path.string() + ": " + e.what());
  }
  return s;
}

TrainingState load_checkpoint(const std::filesystem::path& path, const TrainConfig& expected) {
  TrainingState s = load_checkpoint(path);
  const TrainConfig& got = s.config;
  const std::string p = path.string();
  check_field("num_directions", got.num_directions, expected.num_directions, p);
  check_field("latent_dim", got.latent_dim, expected.latent_dim, p);
  check_field("deformator_mode", got.deformator_mode, expected.deformator_mode, p);
  check_field("deformator_hidden", got.deformator_hidden, expected.deformator_hidden, p);
  check_field("backbone", got.backbone, expected.backbone, p);
  check_field("generator", got.generator, expected.generator, p);
  check_field("generator_seed", got.generator_seed, expected.generator_seed, p);
  check_field("resolution", got.resolution, expected.resolution, p);
  return s;
}

}  // namespace latdir
