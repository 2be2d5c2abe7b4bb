// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "latdir/params.hpp"

namespace latdir {

/// Single-file tensor container shared by training checkpoints and
/// generator weights.
///
/// Layout (little-endian):
///   magic "LATDIRCK" | u32 version | u32 crc32(payload) | u64 payload size | payload
///   payload = u64 header length | header JSON | u64 tensor count |
///             per tensor: u64 name length | name | u64 rank | u64 dims[rank] | f64 values
struct Container {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  nlohmann::json header = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
  void add(std::string name, Tensor value);
  void add_all(const std::string& prefix, const ParamSet& params);
  /// Collects every tensor whose name starts with `prefix` (prefix stripped).
  ParamSet extract(const std::string& prefix) const;
};

std::string serialize_container(const Container& c);
Container parse_container(const std::string& bytes, const std::string& source = "<memory>");

/// Writes via a temporary file and rename; an existing file at `path` is left
/// untouched if writing fails.
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

}  // namespace latdir
