// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "latdir/latent.hpp"
#include "latdir/tensor.hpp"

namespace latdir {

/// Mean softmax cross-entropy over the batch. When `grad` is non-null it
/// receives d(loss)/d(logits).
double classification_loss(const Tensor& logits, std::span<const std::size_t> labels, Tensor* grad = nullptr);

/// Mean absolute error. Subgradient 0 where prediction == target.
double regression_loss(std::span<const double> predicted, std::span<const double> target,
                       std::vector<double>* grad = nullptr);

struct CentroidLoss {
  double value = 0.0;
  std::size_t contributing = 0;
  // Samples whose direction has no centroid yet (first occurrence).
  std::size_t skipped_unseeded = 0;
  // Zero-norm shift or zero centroid: cosine undefined.
  std::size_t skipped_degenerate = 0;
  Tensor grad;  // d(value)/d(shifts), filled when requested
};

/// Mean of (1 - cos(shift_n, c_{k_n})) over the samples that have a usable
/// centroid. Centroids are constants here; only the shifts get gradient.
CentroidLoss centroid_loss(const CentroidBank& bank, const Tensor& shifts, std::span<const std::size_t> labels,
                           bool want_grad = false);

/// classification + lambda * regression + gamma * centroid.
double total_loss(double classification, double regression, double centroid, double lambda, double gamma);

}  // namespace latdir
