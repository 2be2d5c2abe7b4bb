// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latdir/adam.hpp"
#include "latdir/error.hpp"
#include "latdir/losses.hpp"
#include "latdir/trainer.hpp"
#include "support.hpp"

using namespace latdir;
using latdir::testing::random_tensor;
using latdir::testing::relative_error;

TEST_CASE("sampler statistics") {
  TrainConfig cfg;
  cfg.batch_size = 10000;
  Rng rng = make_rng(5, "sampler-test");
  const auto batch = sample_batch(cfg, rng);
  REQUIRE(batch.size() == 10000);
  std::vector<double> mean(cfg.latent_dim, 0.0);
  std::vector<std::size_t> freq(cfg.num_directions, 0);
  double eps_min = 1e9, eps_max = -1e9;
  for (const auto& s : batch) {
    for (std::size_t t = 0; t < cfg.latent_dim; ++t) mean[t] += s.z.values[t] / 10000.0;
    for (const auto& r : {s.first, s.second}) {
      CHECK(std::abs(r.magnitude) >= 0.5);
      eps_min = std::min(eps_min, r.magnitude);
      eps_max = std::max(eps_max, r.magnitude);
      REQUIRE(r.direction < cfg.num_directions);
    }
    ++freq[s.first.direction];
  }
  for (double m : mean) CHECK(std::abs(m) < 0.05);
  const double p = 1.0 / 8.0, sigma = std::sqrt(p * (1 - p) / 10000.0);
  for (std::size_t f : freq) CHECK(std::abs(f / 10000.0 - p) < 3 * sigma);
  CHECK(eps_min >= -6.0);
  CHECK(eps_max <= 6.0);
  CHECK(eps_min < -5.9);
  CHECK(eps_max > 5.9);
}

TEST_CASE("sampler honors allow_equal_directions and is deterministic") {
  TrainConfig cfg;
  cfg.batch_size = 2000;
  cfg.num_directions = 2;
  Rng a = make_rng(1, "x"), b = make_rng(1, "x");
  const auto s1 = sample_batch(cfg, a);
  const auto s2 = sample_batch(cfg, b);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].z == s2[i].z);
    CHECK(s1[i].first == s2[i].first);
    CHECK(s1[i].second == s2[i].second);
  }
  CHECK(std::any_of(s1.begin(), s1.end(), [](const auto& s) { return s.first.direction == s.second.direction; }));
  cfg.allow_equal_directions = false;
  Rng c = make_rng(1, "x");
  for (const auto& s : sample_batch(cfg, c)) CHECK(s.first.direction != s.second.direction);
}

TEST_CASE("classification loss") {
  const Tensor uniform({3, 4}, 0.7);
  const std::vector<std::size_t> labels{0, 3, 1};
  CHECK(classification_loss(uniform, labels) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Tensor sure({2, 4}, 0.0);
  sure.at(0, 2) = 1e4;
  sure.at(1, 0) = 1e4;
  const std::vector<std::size_t> right{2, 0};
  CHECK(classification_loss(sure, right) == 0.0);

  const std::vector<std::size_t> bad{0, 4, 1};
  CHECK_THROWS_AS(classification_loss(uniform, bad), IndexError);
}

TEST_CASE("classification loss matches a brute-force loop") {
  const Tensor logits = random_tensor({64, 8}, 3, 4.0);
  std::vector<std::size_t> labels(64);
  for (std::size_t i = 0; i < 64; ++i) labels[i] = (i * 5 + 3) % 8;
  double want = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < 8; ++k) z += std::exp(logits.at(i, k));
    want += std::log(z) - logits.at(i, labels[i]);
  }
  want /= 64.0;
  Tensor grad;
  CHECK(std::abs(classification_loss(logits, labels, &grad) - want) < 1e-6);
  // Gradient oracle: (softmax - onehot) / N.
  for (std::size_t i = 0; i < 64; i += 9) {
    double z = 0.0;
    for (std::size_t k = 0; k < 8; ++k) z += std::exp(logits.at(i, k));
    for (std::size_t k = 0; k < 8; ++k) {
      const double g = (std::exp(logits.at(i, k)) / z - (k == labels[i] ? 1.0 : 0.0)) / 64.0;
      CHECK(std::abs(grad.at(i, k) - g) < 1e-12);
    }
  }
}

TEST_CASE("regression loss") {
  CHECK(regression_loss(std::vector<double>{1.5}, std::vector<double>{2.0}) == 0.5);
  const std::vector<double> a{1, -2, 3.5}, b{0.5, -2, 1};
  CHECK(regression_loss(a, a) == 0.0);
  CHECK(regression_loss(a, b) == regression_loss(b, a));
  CHECK_THROWS_AS(regression_loss(a, std::vector<double>{1}), ShapeError);

  const Tensor p = random_tensor({100}, 1, 3.0), t = random_tensor({100}, 2, 3.0);
  double want = 0.0;
  for (std::size_t i = 0; i < 100; ++i) want += std::abs(p[i] - t[i]);
  want /= 100.0;
  std::vector<double> grad;
  CHECK(std::abs(regression_loss(p.values(), t.values(), &grad) - want) < 1e-9);
  for (std::size_t i = 0; i < 100; ++i) CHECK(grad[i] == (p[i] > t[i] ? 0.01 : -0.01));
}

TEST_CASE("centroid loss special cases") {
  CentroidBank bank({2, 3});
  bank.update(0, std::vector<double>{1, 2, 3});
  bank.update(1, std::vector<double>{0, -1, 0});
  const Tensor equal({2, 3}, {1, 2, 3, 0, -1, 0});
  const std::vector<std::size_t> labels{0, 1};
  CHECK(centroid_loss(bank, equal, labels).value == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));

  const Tensor anti({1, 3}, {-2, -4, -6});
  const std::vector<std::size_t> zero{0};
  CHECK(centroid_loss(bank, anti, zero).value == doctest::Approx(2.0).epsilon(1e-15));

  // Unseeded directions and zero shifts are skipped and tallied.
  CentroidBank fresh({3, 2});
  fresh.update(1, std::vector<double>{1, 0});
  const Tensor s({3, 2}, {1, 1, 0, 0, 0, 1});
  const std::vector<std::size_t> l{0, 1, 1};
  const CentroidLoss c = centroid_loss(fresh, s, l);
  CHECK(c.skipped_unseeded == 1);
  CHECK(c.skipped_degenerate == 1);
  CHECK(c.contributing == 1);
  CHECK(c.value == doctest::Approx(1.0));
}

TEST_CASE("centroid loss matches a per-sample loop and its gradient") {
  const std::size_t kk = 4, d = 6, n = 40;
  CentroidBank bank({kk, d});
  for (std::size_t k = 0; k < 3; ++k) {  // direction 3 stays unseeded
    for (int r = 0; r < 3; ++r) {
      const Tensor s = random_tensor({d}, 100 + k * 10 + r);
      bank.update(k, s.values());
    }
  }
  const CentroidBank before = bank;
  Tensor shifts = random_tensor({n, d}, 7);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % kk;

  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (bank.count(labels[i]) == 0) continue;
    double dot = 0.0, ns = 0.0, nc = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double a = shifts.at(i, t), c = bank.centroid(labels[i])[t];
      dot += a * c;
      ns += a * a;
      nc += c * c;
    }
    sum += 1.0 - dot / std::sqrt(ns * nc);
    ++used;
  }
  const CentroidLoss got = centroid_loss(bank, shifts, labels, true);
  CHECK(got.contributing == used);
  CHECK(std::abs(got.value - sum / used) < 1e-6);
  CHECK(bank == before);

  for (std::size_t i = 0; i < shifts.size(); i += 5) {
    const double keep = shifts[i];
    shifts[i] = keep + 1e-6;
    const double up = centroid_loss(bank, shifts, labels).value;
    shifts[i] = keep - 1e-6;
    const double down = centroid_loss(bank, shifts, labels).value;
    shifts[i] = keep;
    CHECK(std::abs(got.grad[i] - (up - down) / 2e-6) < 1e-7);
  }
}

TEST_CASE("total loss combination") {
  CHECK(total_loss(1, 2, 4, 0.5, 0.25) == 3.0);
  CHECK(total_loss(1.25, 2, 123.0, 0.5, 0.0) == 2.25);
  CHECK(total_loss(0, 0, 0, 0.5, 0.25) == 0.0);
}

TEST_CASE("adam step against the closed form") {
  ParamSet p;
  p.add("w", Tensor({2}, {1.0, -2.0}));
  ParamSet g;
  g.add("w", Tensor({2}, {0.5, -3.0}));
  Adam opt({0.1, 0.9, 0.999, 1e-8}, p);
  opt.step(p, g);
  // First bias-corrected step moves each weight by lr * g / (|g| + eps).
  CHECK(p.get("w")[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p.get("w")[1] == doctest::Approx(-2.0 + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  CHECK(opt.steps_taken() == 1);
  opt.step(p, g);
  const double m = 0.9 * 0.1 * 0.5 + 0.1 * 0.5;
  const double v = 0.999 * 0.001 * 0.25 + 0.001 * 0.25;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(p.get("w")[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
}

namespace {

TrainingState seeded_state(const TrainConfig& cfg, const Generator& gen) {
  TrainingState s = TrainingState::initialize(cfg, gen);
  // Seed the bank so the centroid term participates.
  for (std::size_t k = 0; k < cfg.num_directions; ++k) {
    s.bank.update(k, random_tensor({cfg.latent_dim}, 50 + k).values());
  }
  return s;
}

}  // namespace

TEST_CASE("objective gradient w.r.t. deformator parameters matches finite differences") {
  const TrainConfig cfg = testing::tiny_config();
  for (const char* mode : {"nonlinear", "linear"}) {
    CAPTURE(std::string(mode));
    TrainConfig c = cfg;
    c.deformator_mode = mode;
    const auto gen = make_generator(c);
    TrainingState state = seeded_state(c, *gen);
    Rng rng = make_rng(3, "gradcheck");
    const auto batch = sample_batch(c, rng);
    ObjectiveGradients grads;
    const LossBreakdown base = evaluate_objective(state, *gen, batch, &grads);
    CHECK(base.centroid_contributing == 4);

    double worst = 0.0;
    std::size_t checked = 0;
    for (auto& entry : state.deformator.params().entries()) {
      const Tensor& g = grads.deformator.get(entry.name);
      for (std::size_t i = 0; i < entry.value.size(); ++i) {
        if (std::abs(g[i]) < 1e-6) continue;  // relative error is meaningless at zero
        const double keep = entry.value[i];
        const double h = 1e-6 * std::max(1.0, std::abs(keep));
        entry.value[i] = keep + h;
        const double up = evaluate_objective(state, *gen, batch, nullptr).total;
        entry.value[i] = keep - h;
        const double down = evaluate_objective(state, *gen, batch, nullptr).total;
        entry.value[i] = keep;
        worst = std::max(worst, relative_error(g[i], (up - down) / (2 * h)));
        ++checked;
      }
    }
    CHECK(checked >= 12);  // the linear matrix is 4x3
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("objective is invariant to batch order") {
  const TrainConfig cfg = testing::small_config();
  const auto gen = make_generator(cfg);
  const TrainingState state = seeded_state(cfg, *gen);
  Rng rng = make_rng(9, "order");
  auto batch = sample_batch(cfg, rng);
  const double a = evaluate_objective(state, *gen, batch, nullptr).total;
  std::reverse(batch.begin(), batch.end());
  const double b = evaluate_objective(state, *gen, batch, nullptr).total;
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("single-pair objective without centroid term") {
  TrainConfig cfg = testing::small_config();
  cfg.gamma = 0.0;
  cfg.two_step = false;
  const auto gen = make_generator(cfg);
  const TrainingState state = seeded_state(cfg, *gen);
  Rng rng = make_rng(2, "ablation");
  const auto batch = sample_batch(cfg, rng);

  std::vector<ShiftRequest> reqs;
  std::vector<std::size_t> labels;
  std::vector<double> targets;
  Tensor z({batch.size(), cfg.latent_dim});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    reqs.push_back(batch[i].first);
    labels.push_back(batch[i].first.direction);
    targets.push_back(batch[i].first.magnitude);
    std::copy(batch[i].z.values.begin(), batch[i].z.values.end(), z.row(i).begin());
  }
  const Tensor shifts = state.deformator.forward(encode_shifts(reqs, cfg.num_directions));
  const PairPredictions p = state.reconstructor.forward(generate(*gen, z), inject_shift(*gen, z, shifts));
  const double want = classification_loss(p.logits, labels) + 0.5 * regression_loss(p.epsilon.values(), targets);
  const LossBreakdown got = evaluate_objective(state, *gen, batch, nullptr);
  CHECK(got.total == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("train step contracts") {
  TrainConfig cfg = testing::small_config();
  const auto gen = make_generator(cfg);
  TrainingState state = TrainingState::initialize(cfg, *gen);
  Rng rng = make_rng(1, "step");
  const auto before = state.deformator.params();
  const LossBreakdown loss = train_step(state, *gen, rng);
  const auto keys = loss.as_map();
  for (const char* k : {"classification", "regression", "centroid", "total"}) CHECK(keys.count(k) == 1);
  CHECK(loss.total == doctest::Approx(loss.classification + 0.5 * loss.regression + 0.25 * loss.centroid));
  CHECK(state.step == 1);
  CHECK_FALSE(state.deformator.params() == before);
  std::uint64_t seen = 0;
  for (auto c : state.bank.counts()) seen += c;
  CHECK(seen == 2 * cfg.batch_size);
  // The very first step has an empty bank: nothing contributes.
  CHECK(loss.centroid_contributing == 0);
}

TEST_CASE("centroid gradients never write into the bank") {
  const TrainConfig cfg = testing::small_config();
  const auto gen = make_generator(cfg);
  const TrainingState state = seeded_state(cfg, *gen);
  const CentroidBank before = state.bank;
  Rng rng = make_rng(4, "bank");
  ObjectiveGradients grads;
  evaluate_objective(state, *gen, sample_batch(cfg, rng), &grads);
  CHECK(state.bank == before);
}

TEST_CASE("generator weights stay frozen during training") {
  TrainConfig cfg = testing::small_config();
  cfg.generator = "dcgan";
  cfg.latent_dim = 16;
  cfg.resolution = 32;
  cfg.steps = 3;
  const auto gen = make_generator(cfg);
  const auto& dc = dynamic_cast<const DcganGenerator&>(*gen);
  const ParamSet weights = dc.params();
  train_loop(cfg, *gen);
  CHECK(dc.params() == weights);
}

TEST_CASE("non-finite loss aborts with a batch dump") {
  TrainConfig cfg = testing::small_config();
  const auto gen = make_generator(cfg);
  TrainingState state = TrainingState::initialize(cfg, *gen);
  state.reconstructor.params().get("direction.bias")[0] = std::numeric_limits<double>::infinity();
  Rng rng = make_rng(0, "nan");
  try {
    train_step(state, *gen, rng);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("sample 0") != std::string::npos);
    CHECK(msg.find("eps1=") != std::string::npos);
  }
  CHECK(state.step == 0);
}

TEST_CASE("train loop bookkeeping and reproducibility") {
  TrainConfig cfg = testing::small_config();
  cfg.steps = 0;
  const auto gen = make_generator(cfg);
  const TrainResult none = train_loop(cfg, *gen);
  const TrainingState init = TrainingState::initialize(cfg, *gen);
  CHECK(none.state.deformator.params() == init.deformator.params());
  CHECK(none.state.reconstructor.params() == init.reconstructor.params());
  CHECK(none.history.empty());

  cfg.steps = 12;
  cfg.eval_interval = 4;
  const TrainResult a = train_loop(cfg, *gen);
  const TrainResult b = train_loop(cfg, *gen);
  CHECK(a.history.size() == 3);
  CHECK(a.history.back().step == 12);
  CHECK(a.history.back().losses.total == b.history.back().losses.total);
  CHECK(a.state.deformator.params() == b.state.deformator.params());
  CHECK(a.state.reconstructor.params() == b.state.reconstructor.params());
  for (const auto& row : a.history) {
    CHECK(row.rca >= 0.0);
    CHECK(row.rca <= 1.0);
    CHECK(row.ppl >= 0.0);
  }
}

TEST_CASE("config json") {
  TrainConfig cfg;
  cfg.gamma = 0.0;
  cfg.seed = 17;
  cfg.backbone = "resnet18";
  const TrainConfig back = config_from_json(to_json(cfg));
  CHECK(back == cfg);
  CHECK(to_json(cfg).at("learning_rate").get<double>() == 1e-4);
  CHECK(TrainConfig{}.lambda == 0.5);
  CHECK(TrainConfig{}.gamma == 0.25);

  try {
    config_from_json({{"gamam", 0.1}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("gamam") != std::string::npos);
  }
  CHECK_THROWS_AS(config_from_json({{"gamma", -1.0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"eps_deadzone", 7.0}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"steps", "many"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"deformator_mode", "cubic"}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
