// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latdir/image_io.hpp"
#include "latdir/metrics.hpp"
#include "latdir/trainer.hpp"

namespace latdir {

struct TrainArgs {
  std::filesystem::path config;  // empty: built-in defaults
  std::optional<std::uint64_t> steps;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "run";
  std::optional<std::filesystem::path> resume;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::size_t samples = kDefaultEvalSamples;
  double delta = kDefaultPplDelta;
  std::uint64_t seed = kDefaultEvalSeed;
  std::optional<std::filesystem::path> out;
};

/// lo:hi:n
struct EpsRange {
  double lo = -6.0;
  double hi = 6.0;
  std::size_t n = 7;

  static EpsRange parse(const std::string& text);
  double value(std::size_t j) const;
};

struct TraverseArgs {
  std::filesystem::path checkpoint;
  std::size_t direction = 0;
  EpsRange range;
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::size_t> second_direction;
  std::filesystem::path out = "traverse.png";
};

struct ExportArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path out = "directions.json";
};

struct ServeArgs {
  std::filesystem::path checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t rca_samples = kDefaultEvalSamples;
  std::uint64_t seed = kDefaultEvalSeed;
  std::size_t workers = 4;
  std::optional<std::filesystem::path> report;
  std::optional<std::filesystem::path> static_dir;
};

TrainResult run_train(const TrainArgs& args, std::ostream& log);
MetricReport run_eval(const EvalArgs& args, std::ostream& out);
/// Returns the grid that was written to args.out.
Raster run_traverse(const TraverseArgs& args);
nlohmann::json run_export(const ExportArgs& args);
int run_serve(const ServeArgs& args, std::ostream& log);

/// Full command line entry point. Exit codes: 0 success, 1 runtime failure,
/// 2 usage or configuration error.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace latdir
