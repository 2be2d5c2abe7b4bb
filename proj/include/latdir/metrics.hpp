// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "latdir/config.hpp"
#include "latdir/deformator.hpp"
#include "latdir/generator.hpp"
#include "latdir/reconstructor.hpp"

namespace latdir {

/// Defaults shared by `latdir eval` and the explorer service so that both
/// report the same per-direction scores.
inline constexpr std::size_t kDefaultEvalSamples = 10000;
inline constexpr std::uint64_t kDefaultEvalSeed = 0;
inline constexpr double kDefaultPplDelta = 0.1;

struct EvalSample {
  LatentCode z;
  ShiftRequest request;
};

inline constexpr std::string_view kRcaStream = "eval-rca";
inline constexpr std::string_view kPplStream = "eval-ppl";

/// The seeded (z, k, eps) stream behind eval_rca / eval_ppl.
std::vector<EvalSample> draw_eval_samples(const TrainConfig& cfg, std::size_t n, std::uint64_t seed,
                                          std::string_view stream);

/// Frozen image embedding used by the path-length metric.
class Embedding {
 public:
  virtual ~Embedding() = default;
  /// (N, C, H, W) -> (N, F).
  virtual Tensor embed(const Tensor& images) const = 0;
};

/// Seeded random 4-block conv encoder (stride-2 3x3 convs, leaky ReLU); the
/// final feature map is flattened without pooling so spatial layout counts.
class RandomConvEmbedding : public Embedding {
 public:
  static constexpr std::uint64_t kDefaultSeed = 7;

  explicit RandomConvEmbedding(ImageShape image, std::uint64_t seed = kDefaultSeed);
  Tensor embed(const Tensor& images) const override;

 private:
  ImageShape image_;
  std::vector<Tensor> weights_;
};

struct MetricReport {
  double rca = 0.0;
  double ppl = 0.0;
  double delta = 0.1;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_direction;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

struct RcaResult {
  double rca = 0.0;
  std::vector<double> per_direction;      // accuracy per true direction
  std::vector<std::size_t> per_direction_count;
};

/// Maps (before, after) image batches to (N, K) logits.
using PairClassifier = std::function<Tensor(const Tensor& before, const Tensor& after)>;

/// Fraction of single-pair samples (z, k, eps with the dead-zone rule) whose
/// arg-max logit equals k. Reads but never modifies the networks.
RcaResult eval_rca(const Deformator& deformator, const PairClassifier& classifier, const Generator& gen,
                   const TrainConfig& cfg, std::size_t n_samples, std::uint64_t seed);
RcaResult eval_rca(const Deformator& deformator, const Reconstructor& reconstructor, const Generator& gen,
                   const TrainConfig& cfg, std::size_t n_samples, std::uint64_t seed);

/// Mean of |embed(G(z + A(eps e_k))) - embed(G(z + A((eps + delta) e_k)))|^2 / delta^2.
double eval_ppl(const Deformator& deformator, const Generator& gen, const Embedding& embedding,
                const TrainConfig& cfg, std::size_t n_samples, double delta, std::uint64_t seed);

MetricReport evaluate(const Deformator& deformator, const Reconstructor& reconstructor, const Generator& gen,
                      const TrainConfig& cfg, std::size_t n_samples, double delta, std::uint64_t seed);

/// Greedy one-to-one matching of unit directions (rows of `directions`) to
/// factor rows by |cos|; mean of the matched |cos| values.
double alignment_score(const Tensor& directions, const Tensor& factor_rows);

/// Unit direction per k: A(e_k) normalized (A(0) = 0 for both modes).
Tensor discovered_directions(const Deformator& deformator);

/// alignment_score of the deformator against the generator's factor rows.
/// CapabilityError if the generator exposes none.
double factor_alignment(const Deformator& deformator, const Generator& gen);

/// Monte-Carlo expectation of alignment_score for K uniformly random unit
/// directions in R^d against the given factor rows.
double random_alignment_baseline(const Tensor& factor_rows, std::size_t num_directions, std::size_t draws,
                                 std::uint64_t seed);

}  // namespace latdir
