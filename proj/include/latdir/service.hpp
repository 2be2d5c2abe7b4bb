// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latdir/checkpoint.hpp"
#include "latdir/error.hpp"
#include "latdir/generator.hpp"
#include "latdir/metrics.hpp"

namespace httplib {
class Server;
}

namespace latdir {

struct EditShift {
  std::size_t k = 0;
  double eps = 0.0;
};

/// A base seed plus an ordered list of shifts applied cumulatively.
struct EditStack {
  std::uint64_t seed = 0;
  std::vector<EditShift> shifts;
};

struct Sweep {
  std::size_t k = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 1;

  /// lo + (hi - lo) * j / (n - 1); lo when n == 1.
  double value(std::size_t j) const;
};

/// Immutable model view used for editing: deformator, generator and
/// per-direction scores.
class ExplorerModel {
 public:
  ExplorerModel(TrainingState state, std::shared_ptr<const Generator> generator);

  const TrainConfig& config() const { return config_; }
  const Deformator& deformator() const { return deformator_; }
  const Generator& generator() const { return *generator_; }
  const CentroidBank& bank() const { return bank_; }
  const Reconstructor& reconstructor() const { return reconstructor_; }

  /// z from the seed, then the sum of A(eps_i e_{k_i}) injected at the
  /// generator's site. Returns a (1, C, H, W) image; `latent_norm` receives
  /// |z + total shift|.
  Tensor render(const EditStack& stack, double* latent_norm = nullptr) const;

 private:
  TrainConfig config_;
  Deformator deformator_;
  Reconstructor reconstructor_;
  CentroidBank bank_;
  std::shared_ptr<const Generator> generator_;
};

struct ServiceOptions {
  std::size_t max_stack = 8;
  std::size_t max_strip = 32;
  double eps_limit = 8.0;
  std::size_t workers = 4;
  std::string cors_origin = "*";
  std::size_t rca_samples = kDefaultEvalSamples;
  std::uint64_t rca_seed = kDefaultEvalSeed;
  // When set, per-direction scores are read from this eval report instead of
  // being recomputed.
  std::optional<std::filesystem::path> report;
  std::optional<std::filesystem::path> static_dir;
};

/// Raised for requests that parse but violate a contract (HTTP 422).
class UnprocessableRequest : public InputError {
 public:
  using InputError::InputError;
};

/// Raised for malformed bodies (HTTP 400); `field` names the offending path.
class BadRequest : public InputError {
 public:
  BadRequest(std::string field, const std::string& message)
      : InputError(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct GenerateResult {
  std::string png;
  double latent_norm = 0.0;
  std::size_t clamped = 0;  // number of eps values clipped to the limit
};

class ExplorerService {
 public:
  ExplorerService(std::shared_ptr<const ExplorerModel> model, ServiceOptions options);
  ~ExplorerService();

  ExplorerService(const ExplorerService&) = delete;
  ExplorerService& operator=(const ExplorerService&) = delete;

  /// Entries {index, score, centroid_norm}, score descending (index breaks ties).
  nlohmann::json directions() const;
  nlohmann::json health() const;

  EditStack parse_stack(const nlohmann::json& body, std::size_t* clamped = nullptr) const;
  Sweep parse_sweep(const nlohmann::json& body, std::size_t* clamped = nullptr) const;

  GenerateResult generate(const EditStack& stack) const;
  std::vector<std::string> strip(const EditStack& stack, const Sweep& sweep) const;

  /// Blocks until stop(). Returns false if binding failed.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; call listen_after_bind() next.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

  const std::vector<double>& scores() const { return scores_; }

 private:
  void install_routes();
  double clamp_eps(double eps, std::size_t* clamped) const;

  std::shared_ptr<const ExplorerModel> model_;
  ServiceOptions options_;
  std::vector<double> scores_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace latdir
