// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latdir/error.hpp"

namespace latdir {

double classification_loss(const Tensor& logits, std::span<const std::size_t> labels, Tensor* grad) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("classification_loss: logits " + shape_string(logits.shape()) + " with " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), kk = logits.dim(1);
  if (n == 0) return 0.0;
  if (grad) *grad = Tensor(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= kk) {
      throw IndexError("label " + std::to_string(labels[i]) + " out of range for K = " + std::to_string(kk));
    }
    const auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    total += lse - row[labels[i]];
    if (grad) {
      auto g = grad->row(i);
      for (std::size_t j = 0; j < kk; ++j) g[j] = std::exp(row[j] - lse) / static_cast<double>(n);
      g[labels[i]] -= 1.0 / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

double regression_loss(std::span<const double> predicted, std::span<const double> target, std::vector<double>* grad) {
  if (predicted.size() != target.size()) {
    throw ShapeError("regression_loss: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(target.size()) + " targets");
  }
  const std::size_t n = predicted.size();
  if (grad) grad->assign(n, 0.0);
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = predicted[i] - target[i];
    total += std::abs(diff);
    if (grad) (*grad)[i] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / static_cast<double>(n);
  }
  return total / static_cast<double>(n);
}

CentroidLoss centroid_loss(const CentroidBank& bank, const Tensor& shifts, std::span<const std::size_t> labels,
                           bool want_grad) {
  const std::size_t d = bank.spec().latent_dim;
  if (shifts.rank() != 2 || shifts.dim(1) != d || shifts.dim(0) != labels.size()) {
    throw ShapeError("centroid_loss: shifts " + shape_string(shifts.shape()) + " with " +
                     std::to_string(labels.size()) + " labels, latent_dim " + std::to_string(d));
  }
  CentroidLoss out;
  if (want_grad) out.grad = Tensor(shifts.shape());
  std::vector<std::size_t> used;
  std::vector<double> cosines;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (bank.count(labels[i]) == 0) {
      ++out.skipped_unseeded;
      continue;
    }
    const auto s = shifts.row(i);
    const auto c = bank.centroid(labels[i]);
    double ss = 0.0, cc = 0.0, sc = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      ss += s[t] * s[t];
      cc += c[t] * c[t];
      sc += s[t] * c[t];
    }
    if (ss == 0.0 || cc == 0.0) {
      ++out.skipped_degenerate;
      continue;
    }
    const double ns = std::sqrt(ss), nc = std::sqrt(cc);
    const double cosv = sc / (ns * nc);
    out.value += 1.0 - cosv;
    used.push_back(i);
    cosines.push_back(cosv);
  }
  out.contributing = used.size();
  if (out.contributing == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(out.contributing);
  out.value *= inv_n;
  if (want_grad) {
    for (std::size_t u = 0; u < used.size(); ++u) {
      const std::size_t i = used[u];
      const auto s = shifts.row(i);
      const auto c = bank.centroid(labels[i]);
      double ss = 0.0, cc = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        ss += s[t] * s[t];
        cc += c[t] * c[t];
      }
      const double ns = std::sqrt(ss), nc = std::sqrt(cc);
      auto g = out.grad.row(i);
      // d(1 - cos)/ds = -(c / (|s||c|) - cos * s / |s|^2)
      for (std::size_t t = 0; t < d; ++t) g[t] = -(c[t] / (ns * nc) - cosines[u] * s[t] / ss) * inv_n;
    }
  }
  return out;
}

double total_loss(double classification, double regression, double centroid, double lambda, double gamma) {
  return classification + lambda * regression + gamma * centroid;
}

}  // namespace latdir
