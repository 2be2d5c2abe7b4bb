// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>

#include "latdir/checkpoint.hpp"
#include "latdir/config.hpp"
#include "latdir/error.hpp"
#include "latdir/service.hpp"

namespace latdir {
namespace {

struct LoadedModel {
  TrainingState state;
  std::shared_ptr<const Generator> generator;
};

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  if (!std::filesystem::exists(checkpoint)) throw InputError("checkpoint not found: " + checkpoint.string());
  LoadedModel m;
  m.state = load_checkpoint(checkpoint);
  m.generator = make_generator(m.state.config);
  return m;
}

void check_direction(std::size_t k, std::size_t num_directions, const std::string& flag) {
  if (k >= num_directions) {
    throw IndexError(flag + " " + std::to_string(k) + " out of range for K = " + std::to_string(num_directions));
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json tensor_json(const Tensor& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    auto r = t.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

}  // namespace

EpsRange EpsRange::parse(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw ConfigError("eps range '" + text + "' must look like lo:hi:n");
  EpsRange r;
  try {
    std::size_t used = 0;
    const std::string lo = text.substr(0, a), hi = text.substr(a + 1, b - a - 1), n = text.substr(b + 1);
    r.lo = std::stod(lo, &used);
    if (used != lo.size()) throw std::invalid_argument(lo);
    r.hi = std::stod(hi, &used);
    if (used != hi.size()) throw std::invalid_argument(hi);
    const long long count = std::stoll(n, &used);
    if (used != n.size() || count < 1) throw std::invalid_argument(n);
    r.n = static_cast<std::size_t>(count);
  } catch (const std::logic_error&) {
    throw ConfigError("eps range '" + text + "' must look like lo:hi:n with n >= 1");
  }
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) throw ConfigError("eps range bounds must be finite");
  return r;
}

double EpsRange::value(std::size_t j) const {
  if (n <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
}

TrainResult run_train(const TrainArgs& args, std::ostream& log) {
  TrainConfig cfg = args.config.empty() ? TrainConfig{} : load_config(args.config);
  if (args.steps) cfg.steps = *args.steps;
  if (args.seed) cfg.seed = *args.seed;
  cfg.validate();
  const auto gen = make_generator(cfg);
  TrainOptions options;
  options.out_dir = args.out;
  options.log = &log;
  if (args.resume) {
    TrainingState state = load_checkpoint(*args.resume, cfg);
    if (state.config.seed != cfg.seed) {
      throw ConfigError("resume seed " + std::to_string(cfg.seed) + " differs from checkpoint seed " +
                        std::to_string(state.config.seed));
    }
    if (state.step > cfg.steps) {
      throw ConfigError("checkpoint is at step " + std::to_string(state.step) + ", beyond steps = " +
                        std::to_string(cfg.steps));
    }
    state.config = cfg;
    return train_loop(std::move(state), *gen, options);
  }
  return train_loop(cfg, *gen, options);
}

MetricReport run_eval(const EvalArgs& args, std::ostream& out) {
  if (args.samples == 0) throw ConfigError("samples must be positive");
  if (!(args.delta > 0.0)) throw ConfigError("delta must be positive");
  const LoadedModel m = load_model(args.checkpoint);
  const MetricReport report = evaluate(m.state.deformator, m.state.reconstructor, *m.generator, m.state.config,
                                       args.samples, args.delta, args.seed);
  const nlohmann::json j = report.to_json();
  out << j.dump(2) << '\n';
  if (args.out) write_json(*args.out, j);
  return report;
}

Raster run_traverse(const TraverseArgs& args) {
  if (args.seeds.empty()) throw ConfigError("at least one --seed is required");
  LoadedModel m = load_model(args.checkpoint);
  const std::size_t kk = m.state.config.num_directions;
  check_direction(args.direction, kk, "--direction");
  if (args.second_direction) check_direction(*args.second_direction, kk, "--second-direction");
  const ExplorerModel model(std::move(m.state), m.generator);

  std::vector<std::vector<Raster>> rows;
  for (std::uint64_t seed : args.seeds) {
    std::vector<Raster> row;
    for (std::size_t j = 0; j < args.range.n; ++j) {
      row.push_back(to_raster(model.render({seed, {{args.direction, args.range.value(j)}}}), 0));
    }
    if (args.second_direction) {
      const double end = args.range.value(args.range.n - 1);
      for (std::size_t j = 0; j < args.range.n; ++j) {
        const EditStack stack{seed, {{args.direction, end}, {*args.second_direction, args.range.value(j)}}};
        row.push_back(to_raster(model.render(stack), 0));
      }
    }
    rows.push_back(std::move(row));
  }
  const Raster grid = tile_grid(rows);
  if (args.out.has_parent_path()) std::filesystem::create_directories(args.out.parent_path());
  write_png(args.out, grid);
  return grid;
}

nlohmann::json run_export(const ExportArgs& args) {
  const LoadedModel m = load_model(args.checkpoint);
  const Deformator& a = m.state.deformator;
  const std::size_t kk = a.spec().num_directions;
  nlohmann::json shifts = nlohmann::json::array();
  for (std::size_t k = 0; k < kk; ++k) shifts.push_back(a.shift({k, 1.0}));
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& p : a.params().entries()) {
    weights[p.name] = {{"shape", p.value.shape()}, {"values", std::vector<double>(p.value.values().begin(),
                                                                                  p.value.values().end())}};
  }
  nlohmann::json j = {{"latent_dim", a.spec().latent_dim},
                      {"num_directions", kk},
                      {"mode", to_string(a.mode())},
                      {"unit_shifts", shifts},
                      {"directions", tensor_json(discovered_directions(a))},
                      {"centroids", tensor_json(m.state.bank.centroids())},
                      {"centroid_counts", m.state.bank.counts()},
                      {"weights", weights}};
  write_json(args.out, j);
  return j;
}

int run_serve(const ServeArgs& args, std::ostream& log) {
  LoadedModel m = load_model(args.checkpoint);
  auto model = std::make_shared<const ExplorerModel>(std::move(m.state), m.generator);
  ServiceOptions options;
  options.rca_samples = args.rca_samples;
  options.rca_seed = args.seed;
  options.workers = args.workers;
  options.report = args.report;
  options.static_dir = args.static_dir;
  ExplorerService service(model, options);
  log << "serving " << args.checkpoint.string() << " on http://" << args.host << ":" << args.port << std::endl;
  if (!service.listen(args.host, args.port)) {
    throw Error("cannot listen on " + args.host + ":" + std::to_string(args.port));
  }
  return 0;
}

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised discovery of interpretable latent directions", "latdir"};
  app.require_subcommand(1);

  TrainArgs train;
  std::uint64_t steps = 0, seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train deformator and reconstructor");
  train_cmd->add_option("--config", train.config, "JSON config file (defaults when omitted)");
  auto* steps_opt = train_cmd->add_option("--steps", steps, "Override the step count");
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Override the training seed");
  train_cmd->add_option("--out", train.out, "Output directory")->capture_default_str();
  std::string resume;
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint");

  EvalArgs eval;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Compute RCA and PPL for a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--samples", eval.samples)->capture_default_str();
  eval_cmd->add_option("--delta", eval.delta)->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed)->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Also write the report here");

  TraverseArgs trav;
  std::string eps_range = "-6:6:7";
  std::size_t second = 0;
  auto* trav_cmd = app.add_subcommand("traverse", "Render a traversal grid");
  trav_cmd->add_option("--checkpoint", trav.checkpoint)->required();
  trav_cmd->add_option("--direction", trav.direction)->required();
  trav_cmd->add_option("--eps-range", eps_range, "lo:hi:n")->capture_default_str();
  trav_cmd->add_option("--seed", trav.seeds, "One grid row per seed")->capture_default_str();
  auto* second_opt = trav_cmd->add_option("--second-direction", second);
  trav_cmd->add_option("--out", trav.out)->capture_default_str();

  ExportArgs exp;
  auto* exp_cmd = app.add_subcommand("export-directions", "Write deformator directions as JSON");
  exp_cmd->add_option("--checkpoint", exp.checkpoint)->required();
  exp_cmd->add_option("--out", exp.out)->capture_default_str();

  ServeArgs serve;
  std::string report, static_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Run the explorer HTTP service");
  serve_cmd->add_option("--checkpoint", serve.checkpoint)->required();
  serve_cmd->add_option("--host", serve.host)->capture_default_str();
  serve_cmd->add_option("--port", serve.port)->capture_default_str()->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--rca-samples", serve.rca_samples)->capture_default_str();
  serve_cmd->add_option("--seed", serve.seed)->capture_default_str();
  serve_cmd->add_option("--workers", serve.workers)->capture_default_str()->check(CLI::PositiveNumber);
  serve_cmd->add_option("--report", report, "Eval report supplying per-direction scores");
  serve_cmd->add_option("--static", static_dir, "Directory of UI assets to serve at /");

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*train_cmd) {
      if (*steps_opt) train.steps = steps;
      if (*seed_opt) train.seed = seed;
      if (!resume.empty()) train.resume = resume;
      run_train(train, err);
    } else if (*eval_cmd) {
      if (!eval_out.empty()) eval.out = eval_out;
      run_eval(eval, out);
    } else if (*trav_cmd) {
      trav.range = EpsRange::parse(eps_range);
      if (*second_opt) trav.second_direction = second;
      run_traverse(trav);
    } else if (*exp_cmd) {
      run_export(exp);
    } else if (*serve_cmd) {
      if (!report.empty()) serve.report = report;
      if (!static_dir.empty()) serve.static_dir = static_dir;
      return run_serve(serve, err);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const IndexError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace latdir
