// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

// Runs every acceptance criterion and prints one PASS/FAIL line per
// criterion. Exit status is 0 only when all of them pass.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "latdir/checkpoint.hpp"
#include "latdir/losses.hpp"
#include "latdir/metrics.hpp"
#include "latdir/trainer.hpp"

using namespace latdir;

namespace {

struct Outcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << std::fixed << v;
  return s.str();
}

Tensor normal_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng = make_rng(seed, "acceptance-data");
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = normal(rng);
  return t;
}

// ---------------------------------------------------------------------------
// Blob experiment.

struct BlobRun {
  std::uint64_t seed = 0;
  double gamma = 0.0;
  double classification_2000 = std::nan("");  // stays NaN when the run is shorter
  double rca = 0.0;
  double ppl = 0.0;
  double alignment = 0.0;
  double seconds = 0.0;
  TrainingState state;
};

// Held-out batch used for the mid-training classification loss.
std::vector<ShiftSample> heldout_batch(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.batch_size = 512;
  Rng rng = make_rng(cfg.seed, "acceptance-heldout");
  return sample_batch(c, rng);
}

BlobRun run_blob(std::uint64_t seed, double gamma, std::uint64_t steps, std::uint64_t probe_step,
                 std::size_t eval_samples) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.gamma = gamma;
  cfg.steps = steps;
  cfg.eval_interval = 0;
  const auto gen = make_generator(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  TrainingState state = TrainingState::initialize(cfg, *gen);
  BlobRun run;
  run.seed = seed;
  run.gamma = gamma;
  if (probe_step > 0 && probe_step <= steps) {
    state.config.steps = probe_step;
    state = train_loop(std::move(state), *gen).state;
    const auto batch = heldout_batch(cfg);
    run.classification_2000 = evaluate_objective(state, *gen, batch, nullptr).classification;
  }
  state.config.steps = steps;
  state = train_loop(std::move(state), *gen).state;
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const MetricReport rep = evaluate(state.deformator, state.reconstructor, *gen, state.config, eval_samples,
                                    kDefaultPplDelta, kDefaultEvalSeed);
  run.rca = rep.rca;
  run.ppl = rep.ppl;
  run.alignment = factor_alignment(state.deformator, *gen);
  run.state = std::move(state);
  return run;
}

// ---------------------------------------------------------------------------
// Loss oracles, written independently of the library kernels.

Outcome loss_oracles() {
  const std::size_t n = 64, kk = 8, d = 8;
  const Tensor logits = normal_tensor({n, kk}, 1, 3.0);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = (i * 5 + 3) % kk;

  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = -1e300;
    for (std::size_t k = 0; k < kk; ++k) m = std::max(m, logits.at(i, k));
    double s = 0.0;
    for (std::size_t k = 0; k < kk; ++k) s += std::exp(logits.at(i, k) - m);
    ce += m + std::log(s) - logits.at(i, labels[i]);
  }
  ce /= n;
  const double ce_err = std::abs(classification_loss(logits, labels) - ce);

  const Tensor pred = normal_tensor({n}, 2, 4.0), target = normal_tensor({n}, 3, 4.0);
  double mae = 0.0;
  for (std::size_t i = 0; i < n; ++i) mae += std::abs(pred[i] - target[i]);
  mae /= n;
  const double mae_err = std::abs(regression_loss(pred.values(), target.values()) - mae);

  CentroidBank bank({kk, d});
  for (std::size_t k = 0; k + 1 < kk; ++k) bank.update(k, normal_tensor({d}, 10 + k).values());
  const Tensor shifts = normal_tensor({n, d}, 4);
  double cl = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == kk - 1) continue;  // unseeded centroid
    const auto c = bank.centroid(labels[i]);
    double dot = 0, a = 0, b = 0;
    for (std::size_t t = 0; t < d; ++t) {
      dot += shifts.at(i, t) * c[t];
      a += shifts.at(i, t) * shifts.at(i, t);
      b += c[t] * c[t];
    }
    cl += 1.0 - dot / std::sqrt(a * b);
    ++used;
  }
  cl /= static_cast<double>(used);
  const double cl_err = std::abs(centroid_loss(bank, shifts, labels).value - cl);

  CentroidBank running({kk, d});
  std::vector<std::vector<long double>> sums(kk, std::vector<long double>(d, 0.0L));
  std::vector<std::size_t> counts(kk, 0);
  Rng rng = make_rng(5, "acceptance-bank");
  std::uniform_int_distribution<std::size_t> pick(0, kk - 1);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int u = 0; u < 1000; ++u) {
    const std::size_t k = pick(rng);
    std::vector<double> s(d);
    for (double& v : s) v = normal(rng);
    running.update(k, s);
    for (std::size_t t = 0; t < d; ++t) sums[k][t] += s[t];
    ++counts[k];
  }
  double bank_err = 0.0;
  for (std::size_t k = 0; k < kk; ++k) {
    const auto c = running.centroid(k);
    for (std::size_t t = 0; t < d; ++t) {
      bank_err = std::max(bank_err, std::abs(c[t] - static_cast<double>(sums[k][t] / counts[k])));
    }
  }

  Outcome o{"loss_kernel_oracles"};
  o.pass = ce_err <= 1e-6 && mae_err <= 1e-9 && cl_err <= 1e-6 && bank_err <= 1e-6;
  std::ostringstream s;
  s << "ce_err=" << ce_err << " mae_err=" << mae_err << " centroid_err=" << cl_err << " running_mean_err=" << bank_err;
  o.detail = s.str();
  return o;
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  TrainConfig cfg;
  cfg.latent_dim = 4;
  cfg.num_directions = 3;
  cfg.resolution = 8;
  cfg.batch_size = 2;
  cfg.deformator_hidden = 16;
  double worst = 0.0;
  std::size_t checked = 0;
  for (const char* mode : {"nonlinear", "linear"}) {
    cfg.deformator_mode = mode;
    const auto gen = make_generator(cfg);
    TrainingState state = TrainingState::initialize(cfg, *gen);
    for (std::size_t k = 0; k < cfg.num_directions; ++k) {
      state.bank.update(k, normal_tensor({cfg.latent_dim}, 40 + k).values());
    }
    Rng rng = make_rng(11, "acceptance-gradcheck");
    const auto batch = sample_batch(cfg, rng);
    ObjectiveGradients grads;
    evaluate_objective(state, *gen, batch, &grads);
    for (auto& entry : state.deformator.params().entries()) {
      const Tensor& g = grads.deformator.get(entry.name);
      for (std::size_t i = 0; i < entry.value.size(); ++i) {
        if (std::abs(g[i]) < 1e-6) continue;
        const double keep = entry.value[i];
        const double h = 1e-6 * std::max(1.0, std::abs(keep));
        entry.value[i] = keep + h;
        const double up = evaluate_objective(state, *gen, batch, nullptr).total;
        entry.value[i] = keep - h;
        const double down = evaluate_objective(state, *gen, batch, nullptr).total;
        entry.value[i] = keep;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(g[i] - numeric) / std::max({std::abs(g[i]), std::abs(numeric), 1e-8}));
        ++checked;
      }
    }
  }
  return {"gradient_check", checked > 0 && worst < 1e-3,
          "max_rel_err=" + std::to_string(worst) + " entries=" + std::to_string(checked)};
}

Outcome chance_level() {
  TrainConfig cfg;
  const auto gen = make_generator(cfg);
  const TrainingState s = TrainingState::initialize(cfg, *gen);
  const double rca = eval_rca(s.deformator, s.reconstructor, *gen, cfg, 10000, kDefaultEvalSeed).rca;
  const double chance = 1.0 / static_cast<double>(cfg.num_directions);
  return {"chance_level_rca", std::abs(rca - chance) <= 0.02, "rca=" + fmt(rca) + " chance=" + fmt(chance)};
}

Outcome metric_degeneracies(const TrainingState& trained) {
  const TrainConfig& cfg = trained.config;
  const auto gen = make_generator(cfg);
  Deformator zero = trained.deformator;
  for (auto& e : zero.params().entries()) e.value.fill(0.0);
  const RandomConvEmbedding embed(gen->image_shape());
  const double ppl0 = eval_ppl(zero, *gen, embed, cfg, 10000, kDefaultPplDelta, 0);

  const ParamSet a = trained.deformator.params(), r = trained.reconstructor.params();
  evaluate(trained.deformator, trained.reconstructor, *gen, cfg, 2000, kDefaultPplDelta, 0);
  factor_alignment(trained.deformator, *gen);
  const bool untouched = trained.deformator.params() == a && trained.reconstructor.params() == r;
  return {"metric_degeneracies", ppl0 == 0.0 && untouched,
          "zero_deformator_ppl=" + fmt(ppl0, 1) + " params_unchanged=" + (untouched ? "yes" : "no")};
}

// Center of pixel mass along x or y of a single blob image (1, 1, H, W).
double mass_center(const Tensor& image, bool along_x) {
  const std::size_t h = image.dim(2), w = image.dim(3);
  double total = 0.0, acc = 0.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double m = image[y * w + x] + 1.0;  // [-1, 1] -> [0, 2]
      total += m;
      acc += m * static_cast<double>(along_x ? x : y);
    }
  return acc / total;
}

// Traversal along the direction best aligned with a position factor moves the
// blob center monotonically.
Outcome traverse_monotone(const TrainingState& trained) {
  const auto gen = make_generator(trained.config);
  const Tensor dirs = discovered_directions(trained.deformator);
  const Tensor& rows = *gen->factor_rows();
  std::size_t best_k = 0, best_f = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < dirs.dim(0); ++k)
    for (std::size_t f = 0; f < 2; ++f) {
      double dot = 0.0;
      for (std::size_t t = 0; t < dirs.dim(1); ++t) dot += dirs.at(k, t) * rows.at(f, t);
      if (std::abs(dot) > best) {
        best = std::abs(dot);
        best_k = k;
        best_f = f;
      }
    }
  std::size_t monotone = 0;
  const std::size_t seeds = 5, columns = 9;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const Tensor z({1, trained.config.latent_dim}, latent_from_seed(trained.config.latent_dim, seed).values);
    std::vector<double> centers;
    for (std::size_t j = 0; j < columns; ++j) {
      const double eps = -6.0 + 12.0 * static_cast<double>(j) / (columns - 1);
      const auto shift = trained.deformator.shift({best_k, eps});
      centers.push_back(mass_center(inject_shift(*gen, z, Tensor({1, z.dim(1)}, shift)), best_f == 0));
    }
    bool up = true, down = true;
    for (std::size_t j = 1; j < centers.size(); ++j) {
      up = up && centers[j] >= centers[j - 1];
      down = down && centers[j] <= centers[j - 1];
    }
    monotone += up || down;
  }
  return {"traverse_position_monotone", monotone == seeds,
          "direction " + std::to_string(best_k) + " (|cos| " + fmt(best) + " with position factor " +
              std::to_string(best_f) + "): " + std::to_string(monotone) + "/" + std::to_string(seeds) +
              " seeds monotone"};
}

Outcome reproducibility(const std::filesystem::path& scratch) {
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.eval_interval = 0;
  cfg.seed = 3;
  const auto gen = make_generator(cfg);

  const TrainResult a = train_loop(cfg, *gen);
  const TrainResult b = train_loop(cfg, *gen);
  Rng ra = make_rng(99, "acceptance-repro"), rb = make_rng(99, "acceptance-repro");
  const auto batch_a = sample_batch(cfg, ra);
  const double la = evaluate_objective(a.state, *gen, batch_a, nullptr).total;
  const double lb = evaluate_objective(b.state, *gen, batch_a, nullptr).total;
  const bool same_loss = std::abs(la - lb) <= 1e-6;

  std::filesystem::create_directories(scratch);
  const auto p1 = scratch / "a.ldc", p2 = scratch / "b.ldc";
  save_checkpoint(p1, a.state);
  const TrainingState loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded);
  auto bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool roundtrip = bytes(p1) == bytes(p2) && loaded.deformator.params() == a.state.deformator.params() &&
                         loaded.reconstructor.params() == a.state.reconstructor.params() &&
                         loaded.bank.centroids() == a.state.bank.centroids() && loaded.step == a.state.step;

  TrainConfig half = cfg;
  half.steps = 100;
  save_checkpoint(scratch / "half.ldc", train_loop(half, *gen).state);
  TrainingState resumed = load_checkpoint(scratch / "half.ldc", cfg);
  resumed.config = cfg;
  const TrainingState cont = train_loop(std::move(resumed), *gen).state;
  const bool resume_equal = cont.deformator.params() == a.state.deformator.params() &&
                            cont.reconstructor.params() == a.state.reconstructor.params() &&
                            cont.bank.centroids() == a.state.bank.centroids() &&
                            cont.deformator_optimizer == a.state.deformator_optimizer && cont.step == 200;
  (void)ra;
  (void)rb;
  std::ostringstream s;
  s << "loss_diff=" << std::abs(la - lb) << " checkpoint_bitwise=" << (roundtrip ? "yes" : "no")
    << " resume_equal=" << (resume_equal ? "yes" : "no");
  return {"reproducibility", same_loss && roundtrip && resume_equal, s.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latdir acceptance suite"};
  std::uint64_t steps = 5000;
  std::size_t eval_samples = 10000;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string json_out;
  std::string scratch = (std::filesystem::temp_directory_path() / "latdir-acceptance").string();
  app.add_option("--steps", steps, "Blob experiment length")->capture_default_str();
  app.add_option("--eval-samples", eval_samples)->capture_default_str();
  app.add_option("--seeds", seeds)->capture_default_str();
  app.add_option("--json", json_out, "Write per-run numbers here");
  app.add_option("--scratch", scratch)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::vector<Outcome> outcomes;
  auto report = [&](Outcome o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << o.name << ": " << o.detail << std::endl;
    outcomes.push_back(std::move(o));
  };

  report(loss_oracles());
  report(gradient_check());
  report(chance_level());
  report(reproducibility(scratch));

  // Blob experiment: each seed with and without the centroid term.
  std::vector<BlobRun> with, without;
  nlohmann::json runs = nlohmann::json::array();
  for (std::uint64_t seed : seeds) {
    for (double gamma : {0.25, 0.0}) {
      BlobRun r = run_blob(seed, gamma, steps, 2000, eval_samples);
      std::cout << "  run seed=" << seed << " gamma=" << gamma << " rca=" << fmt(r.rca) << " ppl=" << fmt(r.ppl)
                << " alignment=" << fmt(r.alignment) << " cls@2000=" << fmt(r.classification_2000)
                << " time=" << fmt(r.seconds, 1) << "s" << std::endl;
      runs.push_back({{"seed", seed},
                      {"gamma", gamma},
                      {"rca", r.rca},
                      {"ppl", r.ppl},
                      {"alignment", r.alignment},
                      {"classification_at_2000", r.classification_2000},
                      {"seconds", r.seconds}});
      (gamma > 0 ? with : without).push_back(std::move(r));
    }
  }

  {
    std::size_t ok = 0;
    std::string vals;
    for (const auto& r : with) {
      ok += r.rca >= 0.70;
      vals += fmt(r.rca) + " ";
    }
    report({"blob_discovery_rca", ok >= 2, "rca per seed: " + vals + "(need >= 0.70 in 2 of 3)"});
  }
  {
    std::size_t ordered = 0;
    double rca_with = 0.0, rca_without = 0.0;
    std::string vals;
    for (std::size_t i = 0; i < with.size(); ++i) {
      ordered += with[i].ppl < without[i].ppl;
      rca_with += with[i].rca / with.size();
      rca_without += without[i].rca / with.size();
      vals += fmt(with[i].ppl) + "<" + fmt(without[i].ppl) + " ";
    }
    const double drop = rca_without - rca_with;
    report({"centroid_loss_ppl_ordering", ordered >= 2 && drop <= 0.05,
            "ppl(0.25)<ppl(0): " + vals + "mean rca drop=" + fmt(drop)});
  }
  {
    const auto gen = make_generator(TrainConfig{});
    const double base = random_alignment_baseline(*gen->factor_rows(), 8, 100000, 1);
    std::size_t ok = 0;
    std::string vals;
    for (const auto& r : with) {
      ok += r.alignment >= base + 0.15;
      vals += fmt(r.alignment) + " ";
    }
    report({"factor_alignment", ok >= 2, "alignment per seed: " + vals + "baseline=" + fmt(base) +
                                             " (need >= baseline + 0.15 in 2 of 3)"});
  }
  report(metric_degeneracies(with.front().state));
  report(traverse_monotone(with.front().state));
  {
    bool ok = true;
    std::string vals;
    for (const auto& r : with) {
      ok = ok && r.seconds < 900.0;
      vals += fmt(r.seconds, 1) + "s ";
    }
    report({"blob_run_under_15_min", ok, "wall time per default run: " + vals});
  }
  {
    std::size_t ok = 0;
    std::string vals;
    for (const auto& r : with) {
      ok += std::isfinite(r.classification_2000) && r.classification_2000 < std::log(8.0) / 2;
      vals += fmt(r.classification_2000) + " ";
    }
    report({"classification_loss_at_2000", ok == with.size(),
            "held-out classification loss: " + vals + "(need < ln(8)/2 = " + fmt(std::log(8.0) / 2) + ")"});
  }

  std::size_t failed = 0;
  for (const auto& o : outcomes) failed += !o.pass;
  std::cout << outcomes.size() - failed << "/" << outcomes.size() << " criteria passed" << std::endl;

  if (!json_out.empty()) {
    nlohmann::json j;
    j["runs"] = runs;
    j["criteria"] = nlohmann::json::array();
    for (const auto& o : outcomes) j["criteria"].push_back({{"name", o.name}, {"pass", o.pass}, {"detail", o.detail}});
    std::ofstream(json_out) << j.dump(2) << '\n';
  }
  return failed == 0 ? 0 : 1;
}
