// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "latdir/checkpoint.hpp"
#include "latdir/error.hpp"
#include "latdir/kernels.hpp"
#include "latdir/losses.hpp"
#include "latdir/metrics.hpp"

namespace latdir {
namespace {

Tensor codes_of(std::span<const ShiftSample> batch, std::size_t d) {
  Tensor z({batch.size(), d});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].z.size() != d) throw ShapeError("sample latent has wrong width");
    std::copy(batch[i].z.values.begin(), batch[i].z.values.end(), z.row(i).begin());
  }
  return z;
}

AdamSettings adam_settings(const TrainConfig& cfg) {
  return {cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
}

std::string describe_batch(std::span<const ShiftSample> batch) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    os << "  sample " << i << ": k1=" << batch[i].first.direction << " eps1=" << batch[i].first.magnitude
       << " k2=" << batch[i].second.direction << " eps2=" << batch[i].second.magnitude << " z=[";
    for (std::size_t t = 0; t < batch[i].z.size(); ++t) os << (t ? "," : "") << batch[i].z.values[t];
    os << "]\n";
  }
  return os.str();
}

}  // namespace

ShiftSampler::ShiftSampler(const TrainConfig& cfg)
    : num_directions_(cfg.num_directions),
      latent_dim_(cfg.latent_dim),
      eps_low_(cfg.eps_low),
      eps_high_(cfg.eps_high),
      deadzone_(cfg.eps_deadzone),
      allow_equal_(cfg.allow_equal_directions) {}

LatentCode ShiftSampler::latent(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentCode z;
  z.values.resize(latent_dim_);
  for (double& v : z.values) v = normal(rng);
  return z;
}

ShiftRequest ShiftSampler::request(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, num_directions_ - 1);
  std::uniform_real_distribution<double> mag(eps_low_, eps_high_);
  ShiftRequest r;
  r.direction = pick(rng);
  do {
    r.magnitude = mag(rng);
  } while (std::abs(r.magnitude) < deadzone_);
  return r;
}

ShiftRequest ShiftSampler::second_request(Rng& rng, const ShiftRequest& first) const {
  ShiftRequest r = request(rng);
  if (!allow_equal_) {
    std::uniform_int_distribution<std::size_t> pick(0, num_directions_ - 1);
    while (r.direction == first.direction) r.direction = pick(rng);
  }
  return r;
}

std::vector<ShiftSample> sample_batch(const TrainConfig& cfg, Rng& rng) {
  const ShiftSampler sampler(cfg);
  std::vector<ShiftSample> batch(cfg.batch_size);
  for (auto& s : batch) {
    s.z = sampler.latent(rng);
    s.first = sampler.request(rng);
    s.second = sampler.second_request(rng, s.first);
  }
  return batch;
}

std::map<std::string, double> LossBreakdown::as_map() const {
  return {{"classification", classification}, {"regression", regression}, {"centroid", centroid}, {"total", total}};
}

TrainingState TrainingState::initialize(const TrainConfig& cfg, const Generator& gen) {
  cfg.validate();
  if (gen.latent_dim() != cfg.latent_dim) {
    throw ConfigError("generator latent_dim " + std::to_string(gen.latent_dim()) + " does not match config " +
                      std::to_string(cfg.latent_dim));
  }
  TrainingState s;
  s.config = cfg;
  s.deformator = Deformator(cfg.direction_spec(), parse_deformator_mode(cfg.deformator_mode), cfg.deformator_hidden,
                            cfg.seed);
  s.reconstructor = init_reconstructor(cfg.direction_spec(), gen.image_shape(), parse_backbone(cfg.backbone), cfg.seed);
  s.bank = CentroidBank(cfg.direction_spec());
  s.deformator_optimizer = Adam(adam_settings(cfg), s.deformator.params());
  s.reconstructor_optimizer = Adam(adam_settings(cfg), s.reconstructor.params());
  return s;
}

LossBreakdown evaluate_objective(const TrainingState& state, const Generator& gen, std::span<const ShiftSample> batch,
                                 ObjectiveGradients* grads, Tensor* shifts_out,
                                 std::vector<std::size_t>* labels_out) {
  const TrainConfig& cfg = state.config;
  const std::size_t b = batch.size(), kk = cfg.num_directions, d = cfg.latent_dim;
  const bool two = cfg.two_step;

  std::vector<ShiftRequest> requests;
  for (const auto& s : batch) requests.push_back(s.first);
  if (two) {
    for (const auto& s : batch) requests.push_back(s.second);
  }
  std::vector<std::size_t> labels;
  std::vector<double> targets;
  for (const auto& r : requests) {
    labels.push_back(r.direction);
    targets.push_back(r.magnitude);
  }

  DeformatorTrace a_trace;
  const Tensor shifts = state.deformator.forward(encode_shifts(requests, kk), a_trace);
  const Tensor z = codes_of(batch, d);
  const Tensor shift1 = slice_batch(shifts, 0, b);
  Tensor shift12;

  const Tensor img0 = generate(gen, z);
  const Tensor img1 = inject_shift(gen, z, shift1);
  Tensor before = img0, after = img1;
  if (two) {
    shift12 = shift1;
    kernels::add_inplace(shift12, slice_batch(shifts, b, 2 * b));
    const Tensor img2 = inject_shift(gen, z, shift12);
    before = concat_batch({&img0, &img1});
    after = concat_batch({&img1, &img2});
  }

  ReconstructorTrace r_trace;
  const PairPredictions pred = state.reconstructor.forward(before, after, r_trace);

  LossBreakdown out;
  Tensor g_logits;
  std::vector<double> g_eps;
  out.classification = classification_loss(pred.logits, labels, grads ? &g_logits : nullptr);
  out.regression = regression_loss(pred.epsilon.values(), targets, grads ? &g_eps : nullptr);
  const CentroidLoss cen = centroid_loss(state.bank, shifts, labels, grads != nullptr);
  out.centroid = cen.value;
  out.centroid_contributing = cen.contributing;
  out.centroid_skipped = cen.skipped_unseeded + cen.skipped_degenerate;
  out.total = total_loss(out.classification, out.regression, out.centroid, cfg.lambda, cfg.gamma);

  if (shifts_out) *shifts_out = shifts;
  if (labels_out) *labels_out = labels;
  if (!grads) return out;

  grads->deformator = state.deformator.params().zeros_like();
  grads->reconstructor = state.reconstructor.params().zeros_like();
  Tensor g_eps_t({g_eps.size()}, g_eps);
  for (double& v : g_eps_t.values()) v *= cfg.lambda;
  auto [g_before, g_after] = state.reconstructor.backward(r_trace, g_logits, g_eps_t, grads->reconstructor);

  // img1 is the "after" of pair one and the "before" of pair two.
  Tensor g_img1 = slice_batch(g_after, 0, b);
  Tensor g_shifts(shifts.shape());
  if (two) {
    kernels::add_inplace(g_img1, slice_batch(g_before, b, 2 * b));
    const Tensor g_img2 = slice_batch(g_after, b, 2 * b);
    const Tensor g_s12 = inject_shift_gradient(gen, z, shift12, g_img2);
    const Tensor g_s1 = inject_shift_gradient(gen, z, shift1, g_img1);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t t = 0; t < d; ++t) {
        g_shifts.at(i, t) = g_s1.at(i, t) + g_s12.at(i, t);
        g_shifts.at(b + i, t) = g_s12.at(i, t);
      }
  } else {
    g_shifts = inject_shift_gradient(gen, z, shift1, g_img1);
  }
  if (cfg.gamma != 0.0 && cen.contributing > 0) {
    for (std::size_t i = 0; i < g_shifts.size(); ++i) g_shifts[i] += cfg.gamma * cen.grad[i];
  }
  state.deformator.backward(a_trace, g_shifts, grads->deformator);
  return out;
}

LossBreakdown train_step(TrainingState& state, const Generator& gen, Rng& rng) {
  const auto batch = sample_batch(state.config, rng);
  ObjectiveGradients grads;
  Tensor shifts;
  std::vector<std::size_t> labels;
  const LossBreakdown loss = evaluate_objective(state, gen, batch, &grads, &shifts, &labels);
  if (!std::isfinite(loss.total) || !grads.deformator.all_finite() || !grads.reconstructor.all_finite()) {
    std::ostringstream os;
    os << "non-finite loss at step " << state.step << " (classification=" << loss.classification
       << ", regression=" << loss.regression << ", centroid=" << loss.centroid << ")\noffending batch:\n"
       << describe_batch(batch);
    throw NumericalError(os.str());
  }
  state.deformator_optimizer.step(state.deformator.params(), grads.deformator);
  state.reconstructor_optimizer.step(state.reconstructor.params(), grads.reconstructor);
  for (std::size_t i = 0; i < labels.size(); ++i) state.bank.update(labels[i], shifts.row(i));
  ++state.step;
  return loss;
}

std::uint64_t training_eval_seed(const TrainConfig& cfg) { return derive_seed(cfg.seed, "train-eval"); }

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "step,classification,regression,centroid,total,rca,ppl\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.step << ',' << r.losses.classification << ',' << r.losses.regression << ',' << r.losses.centroid << ','
        << r.losses.total << ',' << r.rca << ',' << r.ppl << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

TrainResult train_loop(const TrainConfig& cfg, const Generator& gen, const TrainOptions& options) {
  return train_loop(TrainingState::initialize(cfg, gen), gen, options);
}

TrainResult train_loop(TrainingState state, const Generator& gen, const TrainOptions& options) {
  const TrainConfig& cfg = state.config;
  TrainResult result;
  const bool files = !options.out_dir.empty();
  if (files) {
    std::filesystem::create_directories(options.out_dir);
    std::ofstream(options.out_dir / "config.json") << to_json(cfg).dump(2) << '\n';
  }
  const std::filesystem::path ckpt = options.out_dir / "checkpoint.ldc";
  const std::uint64_t eval_seed = training_eval_seed(cfg);
  std::unique_ptr<RandomConvEmbedding> embedding;

  while (state.step < cfg.steps) {
    Rng rng = make_rng(cfg.seed, "train-step", state.step);
    const LossBreakdown loss = train_step(state, gen, rng);

    if (cfg.eval_interval > 0 && state.step % cfg.eval_interval == 0) {
      if (!embedding) embedding = std::make_unique<RandomConvEmbedding>(gen.image_shape());
      HistoryRow row;
      row.step = state.step;
      row.losses = loss;
      row.rca = eval_rca(state.deformator, state.reconstructor, gen, cfg, cfg.eval_samples, eval_seed).rca;
      row.ppl = eval_ppl(state.deformator, gen, *embedding, cfg, cfg.eval_samples, cfg.ppl_delta, eval_seed);
      result.history.push_back(row);
      if (options.log) {
        *options.log << "step " << row.step << " cl=" << loss.classification << " r=" << loss.regression
                     << " c=" << loss.centroid << " total=" << loss.total << " rca=" << row.rca << " ppl=" << row.ppl
                     << std::endl;
      }
      if (options.on_eval) options.on_eval(row);
      if (files) write_history_csv(options.out_dir / "history.csv", result.history);
    }
    if (files && cfg.checkpoint_interval > 0 && state.step % cfg.checkpoint_interval == 0) {
      save_checkpoint(ckpt, state);
    }
  }
  if (files) {
    save_checkpoint(ckpt, state);
    write_history_csv(options.out_dir / "history.csv", result.history);
  }
  result.state = std::move(state);
  return result;
}

}  // namespace latdir
