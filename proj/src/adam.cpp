// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/adam.hpp"

#include <cmath>

#include "latdir/error.hpp"

namespace latdir {

Adam::Adam(AdamSettings settings, const ParamSet& params)
    : settings_(settings), m_(params.zeros_like()), v_(params.zeros_like()) {}

void Adam::step(ParamSet& params, const ParamSet& grads) {
  auto& pe = params.entries();
  const auto& ge = grads.entries();
  if (pe.size() != ge.size() || pe.size() != m_.entries().size()) {
    throw ShapeError("adam: parameter/gradient/state counts disagree");
  }
  ++t_;
  const double b1 = settings_.beta1, b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = settings_.learning_rate;
  for (std::size_t e = 0; e < pe.size(); ++e) {
    Tensor& p = pe[e].value;
    const Tensor& g = ge[e].value;
    Tensor& m = m_.entries()[e].value;
    Tensor& v = v_.entries()[e].value;
    if (g.shape() != p.shape() || m.shape() != p.shape()) {
      throw ShapeError("adam: shape mismatch for parameter '" + pe[e].name + "'");
    }
    const long n = static_cast<long>(p.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      p[i] -= lr * mh / (std::sqrt(vh) + settings_.epsilon);
    }
  }
}

Adam Adam::restore(AdamSettings settings, ParamSet m, ParamSet v, std::uint64_t t) {
  Adam a;
  a.settings_ = settings;
  a.m_ = std::move(m);
  a.v_ = std::move(v);
  a.t_ = t;
  return a;
}

}  // namespace latdir
