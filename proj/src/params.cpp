// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/params.hpp"

#include <algorithm>

#include "latdir/error.hpp"

namespace latdir {

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
}

Tensor& ParamSet::get(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw IndexError("no parameter named '" + name + "'");
}

const Tensor& ParamSet::get(const std::string& name) const { return const_cast<ParamSet*>(this)->get(name); }

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& e : entries_) out.entries_.push_back({e.name, Tensor(e.value.shape())});
  return out;
}

void ParamSet::zero() {
  for (auto& e : entries_) e.value.fill(0.0);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool ParamSet::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const NamedTensor& e) { return e.value.all_finite(); });
}

}  // namespace latdir
