// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/latent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latdir/error.hpp"
#include "latdir/rng.hpp"

namespace latdir {

void DirectionSpec::validate() const {
  if (num_directions < 1) throw ConfigError("num_directions must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
}

std::vector<double> one_hot(std::size_t k, std::size_t num_directions) {
  if (k >= num_directions) {
    throw IndexError("direction index " + std::to_string(k) + " out of range for K = " +
                     std::to_string(num_directions));
  }
  std::vector<double> out(num_directions, 0.0);
  out[k] = 1.0;
  return out;
}

std::vector<double> encode_shift(const ShiftRequest& request, std::size_t num_directions) {
  if (!std::isfinite(request.magnitude)) throw InputError("shift magnitude is not finite");
  std::vector<double> out = one_hot(request.direction, num_directions);
  out[request.direction] = request.magnitude;
  return out;
}

Tensor encode_shifts(std::span<const ShiftRequest> requests, std::size_t num_directions) {
  Tensor out({requests.size(), num_directions});
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto row = encode_shift(requests[i], num_directions);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

LatentCode apply_shift(const LatentCode& z, std::span<const double> shift) {
  if (z.size() != shift.size()) {
    throw ShapeError("apply_shift: latent has " + std::to_string(z.size()) + " entries, shift has " +
                     std::to_string(shift.size()));
  }
  LatentCode out = z;
  for (std::size_t i = 0; i < shift.size(); ++i) out.values[i] += shift[i];
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine_similarity of a zero vector");
  const double s = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(s, -1.0, 1.0);
}

LatentCode latent_from_seed(std::size_t latent_dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, "latent");
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentCode z;
  z.values.resize(latent_dim);
  for (double& v : z.values) v = normal(rng);
  return z;
}

CentroidBank::CentroidBank(DirectionSpec spec)
    : spec_(spec), centroids_({spec.num_directions, spec.latent_dim}), counts_(spec.num_directions, 0) {
  spec_.validate();
}

void CentroidBank::update(std::size_t k, std::span<const double> shift) {
  if (k >= spec_.num_directions) {
    throw IndexError("direction index " + std::to_string(k) + " out of range for K = " +
                     std::to_string(spec_.num_directions));
  }
  if (shift.size() != spec_.latent_dim) {
    throw ShapeError("centroid update: shift has " + std::to_string(shift.size()) + " entries, expected " +
                     std::to_string(spec_.latent_dim));
  }
  const std::uint64_t m = ++counts_[k];
  auto c = centroids_.row(k);
  const double inv = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < shift.size(); ++i) c[i] += (shift[i] - c[i]) * inv;
}

std::span<const double> CentroidBank::centroid(std::size_t k) const {
  if (k >= spec_.num_directions) {
    throw IndexError("direction index " + std::to_string(k) + " out of range for K = " +
                     std::to_string(spec_.num_directions));
  }
  return centroids_.row(k);
}

std::uint64_t CentroidBank::count(std::size_t k) const {
  if (k >= spec_.num_directions) {
    throw IndexError("direction index " + std::to_string(k) + " out of range for K = " +
                     std::to_string(spec_.num_directions));
  }
  return counts_[k];
}

CentroidBank CentroidBank::restore(DirectionSpec spec, Tensor centroids, std::vector<std::uint64_t> counts) {
  require_shape(centroids, {spec.num_directions, spec.latent_dim}, "centroid bank");
  if (counts.size() != spec.num_directions) throw ShapeError("centroid bank: count vector has wrong length");
  CentroidBank bank(spec);
  bank.centroids_ = std::move(centroids);
  bank.counts_ = std::move(counts);
  return bank;
}

}  // namespace latdir
