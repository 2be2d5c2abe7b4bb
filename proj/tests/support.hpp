// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "latdir/config.hpp"
#include "latdir/rng.hpp"
#include "latdir/tensor.hpp"

namespace latdir::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = normal(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// The small instance used for gradient checks: d=4, K=3, 8x8 blobs, batch 2.
inline TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.latent_dim = 4;
  cfg.num_directions = 3;
  cfg.resolution = 8;
  cfg.batch_size = 2;
  cfg.deformator_hidden = 16;
  cfg.eval_interval = 0;
  cfg.steps = 10;
  return cfg;
}

/// Fast configuration for loop/checkpoint tests.
inline TrainConfig small_config() {
  TrainConfig cfg;
  cfg.resolution = 16;
  cfg.batch_size = 4;
  cfg.deformator_hidden = 32;
  cfg.eval_interval = 0;
  cfg.eval_samples = 64;
  cfg.steps = 20;
  return cfg;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("latdir-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace latdir::testing
