// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "latdir/tensor.hpp"

namespace latdir {

struct NamedTensor {
  std::string name;
  Tensor value;

  bool operator==(const NamedTensor&) const = default;
};

/// Ordered collection of named parameter tensors. Gradients and optimizer
/// moments are kept in ParamSets with the same names and shapes.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  ParamSet zeros_like() const;
  void zero();
  std::size_t scalar_count() const;
  bool all_finite() const;

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<NamedTensor> entries_;
};

}  // namespace latdir
