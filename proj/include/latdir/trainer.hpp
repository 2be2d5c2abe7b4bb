// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "latdir/adam.hpp"
#include "latdir/config.hpp"
#include "latdir/deformator.hpp"
#include "latdir/generator.hpp"
#include "latdir/latent.hpp"
#include "latdir/reconstructor.hpp"
#include "latdir/rng.hpp"

namespace latdir {

/// Draws latent codes and shift requests under a TrainConfig's distributions:
/// z ~ N(0, I), k ~ U{0..K-1}, eps ~ U[eps_low, eps_high] with |eps| below
/// the dead zone rejected and redrawn.
class ShiftSampler {
 public:
  explicit ShiftSampler(const TrainConfig& cfg);

  LatentCode latent(Rng& rng) const;
  ShiftRequest request(Rng& rng) const;
  // Honors allow_equal_directions relative to `first`.
  ShiftRequest second_request(Rng& rng, const ShiftRequest& first) const;

 private:
  std::size_t num_directions_, latent_dim_;
  double eps_low_, eps_high_, deadzone_;
  bool allow_equal_;
};

/// One training example: a base code and the two consecutive shifts.
struct ShiftSample {
  LatentCode z;
  ShiftRequest first;
  ShiftRequest second;
};

std::vector<ShiftSample> sample_batch(const TrainConfig& cfg, Rng& rng);

struct LossBreakdown {
  double classification = 0.0;
  double regression = 0.0;
  double centroid = 0.0;
  double total = 0.0;
  std::size_t centroid_contributing = 0;
  std::size_t centroid_skipped = 0;

  std::map<std::string, double> as_map() const;
};

/// Everything that evolves during training.
struct TrainingState {
  TrainConfig config;
  Deformator deformator;
  Reconstructor reconstructor;
  CentroidBank bank;
  Adam deformator_optimizer;
  Adam reconstructor_optimizer;
  std::uint64_t step = 0;

  static TrainingState initialize(const TrainConfig& cfg, const Generator& gen);
};

/// Gradients of the total objective for one batch.
struct ObjectiveGradients {
  ParamSet deformator;
  ParamSet reconstructor;
};

/// Forward + backward of the objective on a fixed batch without touching any
/// state. `shifts_out`, when given, receives the (detached) shift vectors in
/// label order: all first shifts, then all second shifts.
LossBreakdown evaluate_objective(const TrainingState& state, const Generator& gen, std::span<const ShiftSample> batch,
                                 ObjectiveGradients* grads, Tensor* shifts_out = nullptr,
                                 std::vector<std::size_t>* labels_out = nullptr);

/// One joint Adam step on deformator and reconstructor, then folds the
/// batch's detached shifts into the centroid bank. Throws NumericalError on a
/// non-finite loss.
LossBreakdown train_step(TrainingState& state, const Generator& gen, Rng& rng);

struct HistoryRow {
  std::uint64_t step = 0;
  LossBreakdown losses;
  double rca = 0.0;
  double ppl = 0.0;
};

struct TrainOptions {
  // When set: checkpoint.ldc, history.csv and config.json are written here.
  std::filesystem::path out_dir;
  std::ostream* log = nullptr;
  std::function<void(const HistoryRow&)> on_eval;
};

struct TrainResult {
  TrainingState state;
  std::vector<HistoryRow> history;
};

/// Runs from a fresh initialization to cfg.steps.
TrainResult train_loop(const TrainConfig& cfg, const Generator& gen, const TrainOptions& options = {});
/// Continues `state` until state.config.steps.
TrainResult train_loop(TrainingState state, const Generator& gen, const TrainOptions& options = {});

/// Seed of the evaluation sample stream used during training.
std::uint64_t training_eval_seed(const TrainConfig& cfg);

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows);

}  // namespace latdir
