// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "latdir/tensor.hpp"

namespace latdir {

/// Number of discoverable directions K and the generator's latent width d.
struct DirectionSpec {
  std::size_t num_directions = 8;
  std::size_t latent_dim = 8;

  void validate() const;
  bool operator==(const DirectionSpec&) const = default;
};

/// A point in the generator's latent space.
struct LatentCode {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const LatentCode&) const = default;
};

/// Direction index (0-based, in [0, K)) and signed magnitude.
struct ShiftRequest {
  std::size_t direction = 0;
  double magnitude = 0.0;

  bool operator==(const ShiftRequest&) const = default;
};

std::vector<double> one_hot(std::size_t k, std::size_t num_directions);

/// magnitude * one_hot(direction, K).
std::vector<double> encode_shift(const ShiftRequest& request, std::size_t num_directions);

/// Encodes a batch of requests as rows of an (N, K) tensor.
Tensor encode_shifts(std::span<const ShiftRequest> requests, std::size_t num_directions);

LatentCode apply_shift(const LatentCode& z, std::span<const double> shift);

/// a.b / (|a||b|). Throws DegenerateInputError when either vector is zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Standard-normal latent code drawn from a seed; shared by traversal grids
/// and the explorer service so the same seed shows the same base image.
LatentCode latent_from_seed(std::size_t latent_dim, std::uint64_t seed);

/// Per-direction running means of the shift vectors produced so far, with
/// their sample counts. A direction with count 0 has a zero centroid.
class CentroidBank {
 public:
  CentroidBank() = default;
  explicit CentroidBank(DirectionSpec spec);

  /// Folds one (detached) shift into direction k's running mean.
  void update(std::size_t k, std::span<const double> shift);

  std::span<const double> centroid(std::size_t k) const;
  std::uint64_t count(std::size_t k) const;
  const DirectionSpec& spec() const { return spec_; }

  const Tensor& centroids() const { return centroids_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  /// Rebuilds a bank from stored state (checkpoint load).
  static CentroidBank restore(DirectionSpec spec, Tensor centroids, std::vector<std::uint64_t> counts);

  bool operator==(const CentroidBank&) const = default;

 private:
  DirectionSpec spec_;
  Tensor centroids_;  // (K, d)
  std::vector<std::uint64_t> counts_;
};

}  // namespace latdir
