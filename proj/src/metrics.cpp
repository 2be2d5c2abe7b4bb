// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "latdir/error.hpp"
#include "latdir/kernels.hpp"
#include "latdir/rng.hpp"
#include "latdir/trainer.hpp"

namespace latdir {
namespace {

constexpr std::size_t kChunk = 256;

Tensor stack_codes(std::span<const EvalSample> samples) {
  const std::size_t d = samples.empty() ? 0 : samples[0].z.size();
  Tensor z({samples.size(), d});
  for (std::size_t i = 0; i < samples.size(); ++i) std::copy(samples[i].z.values.begin(), samples[i].z.values.end(), z.row(i).begin());
  return z;
}

}  // namespace

std::vector<EvalSample> draw_eval_samples(const TrainConfig& cfg, std::size_t n, std::uint64_t seed,
                                          std::string_view stream) {
  Rng rng = make_rng(seed, stream);
  ShiftSampler sampler(cfg);
  std::vector<EvalSample> out(n);
  for (auto& s : out) {
    s.z = sampler.latent(rng);
    s.request = sampler.request(rng);
  }
  return out;
}

RandomConvEmbedding::RandomConvEmbedding(ImageShape image, std::uint64_t seed) : image_(image) {
  Rng rng = make_rng(seed, "embedding");
  const std::size_t widths[] = {image.channels, 16, 32, 32, 32};
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor w({widths[i + 1], widths[i], 3, 3});
    const double bound = std::sqrt(6.0 / static_cast<double>(widths[i] * 9));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : w.values()) v = u(rng);
    weights_.push_back(std::move(w));
  }
}

Tensor RandomConvEmbedding::embed(const Tensor& images) const {
  require_shape(images, image_.batch(images.rank() == 4 ? images.dim(0) : 0), "embedding input");
  Tensor h = images;
  for (const auto& w : weights_) {
    h = kernels::leaky_relu_forward(kernels::parallel::conv2d_forward(h, w, nullptr, {2, 1}), 0.2);
  }
  return h.reshaped({h.dim(0), h.row_size()});
}

nlohmann::json MetricReport::to_json() const {
  return {{"rca", rca},
          {"ppl", ppl},
          {"delta", delta},
          {"n_samples", n_samples},
          {"seed", seed},
          {"ppl_normalization", "squared embedding distance divided by delta^2"},
          {"per_direction", per_direction}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    r.rca = j.at("rca").get<double>();
    r.ppl = j.at("ppl").get<double>();
    r.delta = j.at("delta").get<double>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.per_direction = j.at("per_direction").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed metric report: ") + e.what());
  }
  return r;
}

RcaResult eval_rca(const Deformator& deformator, const PairClassifier& classifier, const Generator& gen,
                   const TrainConfig& cfg, std::size_t n_samples, std::uint64_t seed) {
  const std::size_t kk = deformator.spec().num_directions;
  const auto samples = draw_eval_samples(cfg, n_samples, seed, kRcaStream);
  std::vector<std::size_t> correct(kk, 0), count(kk, 0);
  std::size_t hits = 0;
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const std::size_t end = std::min(samples.size(), begin + kChunk);
    const std::span<const EvalSample> chunk(samples.data() + begin, end - begin);
    std::vector<ShiftRequest> requests;
    for (const auto& s : chunk) requests.push_back(s.request);
    const Tensor z = stack_codes(chunk);
    const Tensor shift = deformator.forward(encode_shifts(requests, kk));
    const Tensor before = generate(gen, z);
    const Tensor after = inject_shift(gen, z, shift);
    const Tensor logits = classifier(before, after);
    require_shape(logits, {chunk.size(), kk}, "classifier logits");
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto row = logits.row(i);
      const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      const std::size_t k = chunk[i].request.direction;
      ++count[k];
      if (pred == k) {
        ++correct[k];
        ++hits;
      }
    }
  }
  RcaResult out;
  out.rca = n_samples ? static_cast<double>(hits) / static_cast<double>(n_samples) : 0.0;
  out.per_direction.resize(kk);
  out.per_direction_count = count;
  for (std::size_t k = 0; k < kk; ++k) {
    out.per_direction[k] = count[k] ? static_cast<double>(correct[k]) / static_cast<double>(count[k]) : 0.0;
  }
  return out;
}

RcaResult eval_rca(const Deformator& deformator, const Reconstructor& reconstructor, const Generator& gen,
                   const TrainConfig& cfg, std::size_t n_samples, std::uint64_t seed) {
  return eval_rca(
      deformator, [&](const Tensor& b, const Tensor& a) { return reconstructor.forward(b, a).logits; }, gen, cfg,
      n_samples, seed);
}

double eval_ppl(const Deformator& deformator, const Generator& gen, const Embedding& embedding,
                const TrainConfig& cfg, std::size_t n_samples, double delta, std::uint64_t seed) {
  if (!(delta > 0.0)) throw ConfigError("ppl delta must be > 0");
  const std::size_t kk = deformator.spec().num_directions;
  const auto samples = draw_eval_samples(cfg, n_samples, seed, kPplStream);
  double total = 0.0;
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const std::size_t end = std::min(samples.size(), begin + kChunk);
    const std::span<const EvalSample> chunk(samples.data() + begin, end - begin);
    std::vector<ShiftRequest> at, next;
    for (const auto& s : chunk) {
      at.push_back(s.request);
      next.push_back({s.request.direction, s.request.magnitude + delta});
    }
    const Tensor z = stack_codes(chunk);
    const Tensor e0 = embedding.embed(inject_shift(gen, z, deformator.forward(encode_shifts(at, kk))));
    const Tensor e1 = embedding.embed(inject_shift(gen, z, deformator.forward(encode_shifts(next, kk))));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto a = e0.row(i);
      const auto b = e1.row(i);
      double sq = 0.0;
      for (std::size_t t = 0; t < a.size(); ++t) sq += (a[t] - b[t]) * (a[t] - b[t]);
      total += sq / (delta * delta);
    }
  }
  return n_samples ? total / static_cast<double>(n_samples) : 0.0;
}

MetricReport evaluate(const Deformator& deformator, const Reconstructor& reconstructor, const Generator& gen,
                      const TrainConfig& cfg, std::size_t n_samples, double delta, std::uint64_t seed) {
  const RcaResult rca = eval_rca(deformator, reconstructor, gen, cfg, n_samples, seed);
  const RandomConvEmbedding embedding(gen.image_shape());
  MetricReport r;
  r.rca = rca.rca;
  r.per_direction = rca.per_direction;
  r.ppl = eval_ppl(deformator, gen, embedding, cfg, n_samples, delta, seed);
  r.delta = delta;
  r.n_samples = n_samples;
  r.seed = seed;
  return r;
}

double alignment_score(const Tensor& directions, const Tensor& factor_rows) {
  if (directions.rank() != 2 || factor_rows.rank() != 2 || directions.dim(1) != factor_rows.dim(1)) {
    throw ShapeError("alignment_score: directions " + shape_string(directions.shape()) + " vs factors " +
                     shape_string(factor_rows.shape()));
  }
  const std::size_t kk = directions.dim(0), nf = factor_rows.dim(0);
  std::vector<double> sim(kk * nf, 0.0);
  for (std::size_t k = 0; k < kk; ++k)
    for (std::size_t f = 0; f < nf; ++f) {
      try {
        sim[k * nf + f] = std::abs(cosine_similarity(directions.row(k), factor_rows.row(f)));
      } catch (const DegenerateInputError&) {
        sim[k * nf + f] = 0.0;
      }
    }
  std::vector<bool> used_k(kk, false), used_f(nf, false);
  const std::size_t matches = std::min(kk, nf);
  double total = 0.0;
  for (std::size_t m = 0; m < matches; ++m) {
    double best = -1.0;
    std::size_t bk = 0, bf = 0;
    for (std::size_t k = 0; k < kk; ++k) {
      if (used_k[k]) continue;
      for (std::size_t f = 0; f < nf; ++f) {
        if (!used_f[f] && sim[k * nf + f] > best) {
          best = sim[k * nf + f];
          bk = k;
          bf = f;
        }
      }
    }
    used_k[bk] = used_f[bf] = true;
    total += best;
  }
  return matches ? total / static_cast<double>(matches) : 0.0;
}

Tensor discovered_directions(const Deformator& deformator) {
  const std::size_t kk = deformator.spec().num_directions;
  Tensor eye({kk, kk});
  for (std::size_t k = 0; k < kk; ++k) eye.at(k, k) = 1.0;
  Tensor dirs = deformator.forward(eye);
  for (std::size_t k = 0; k < kk; ++k) {
    auto row = dirs.row(k);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& v : row) v /= norm;
    }
  }
  return dirs;
}

double factor_alignment(const Deformator& deformator, const Generator& gen) {
  const Tensor* rows = gen.factor_rows();
  if (!rows) throw CapabilityError(gen.kind() + " generator exposes no ground-truth factors");
  return alignment_score(discovered_directions(deformator), *rows);
}

double random_alignment_baseline(const Tensor& factor_rows, std::size_t num_directions, std::size_t draws,
                                 std::uint64_t seed) {
  const std::size_t d = factor_rows.dim(1);
  Rng rng = make_rng(seed, "alignment-baseline");
  std::normal_distribution<double> normal(0.0, 1.0);
  double total = 0.0;
  Tensor dirs({num_directions, d});
  for (std::size_t i = 0; i < draws; ++i) {
    for (double& v : dirs.values()) v = normal(rng);
    total += alignment_score(dirs, factor_rows);
  }
  return draws ? total / static_cast<double>(draws) : 0.0;
}

}  // namespace latdir
