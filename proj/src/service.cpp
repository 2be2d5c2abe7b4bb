// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "latdir/image_io.hpp"

namespace latdir {
namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw BadRequest(path.empty() ? "body" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw BadRequest(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::int64_t read_integer(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw BadRequest(field, "expected an integer");
  return v.get<std::int64_t>();
}

double read_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw BadRequest(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw BadRequest(field, "expected a finite number");
  return x;
}

std::size_t read_index(const json& v, const std::string& field, std::size_t bound) {
  const std::int64_t k = read_integer(v, field);
  if (k < 0 || static_cast<std::uint64_t>(k) >= bound) {
    throw UnprocessableRequest(field + ": direction " + std::to_string(k) + " out of range [0, " +
                               std::to_string(bound) + ")");
  }
  return static_cast<std::size_t>(k);
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& field = "") {
  json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::vector<double> scores_from_report(const std::filesystem::path& path, std::size_t num_directions) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open report " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("report " + path.string() + " is not valid JSON: " + e.what());
  }
  const MetricReport report = MetricReport::from_json(j);
  if (report.per_direction.size() != num_directions) {
    throw InputError("report " + path.string() + " has " + std::to_string(report.per_direction.size()) +
                     " directions, checkpoint has " + std::to_string(num_directions));
  }
  return report.per_direction;
}

}  // namespace

double Sweep::value(std::size_t j) const {
  if (n <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
}

ExplorerModel::ExplorerModel(TrainingState state, std::shared_ptr<const Generator> generator)
    : config_(std::move(state.config)),
      deformator_(std::move(state.deformator)),
      reconstructor_(std::move(state.reconstructor)),
      bank_(std::move(state.bank)),
      generator_(std::move(generator)) {
  if (!generator_) throw ConfigError("explorer model needs a generator");
  if (generator_->latent_dim() != deformator_.spec().latent_dim) {
    throw ConfigError("generator latent_dim does not match the checkpoint");
  }
}

Tensor ExplorerModel::render(const EditStack& stack, double* latent_norm) const {
  const std::size_t d = deformator_.spec().latent_dim;
  const LatentCode z = latent_from_seed(d, stack.seed);
  Tensor total({1, d});
  for (const auto& s : stack.shifts) {
    const std::vector<double> shift = deformator_.shift({s.k, s.eps});
    for (std::size_t t = 0; t < d; ++t) total[t] += shift[t];
  }
  const Tensor z_batch({1, d}, z.values);
  if (latent_norm) {
    double sq = 0.0;
    for (std::size_t t = 0; t < d; ++t) sq += (z.values[t] + total[t]) * (z.values[t] + total[t]);
    *latent_norm = std::sqrt(sq);
  }
  return inject_shift(*generator_, z_batch, total);
}

ExplorerService::ExplorerService(std::shared_ptr<const ExplorerModel> model, ServiceOptions options)
    : model_(std::move(model)), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  if (!model_) throw ConfigError("explorer service needs a model");
  if (options_.workers == 0) throw ConfigError("workers must be at least 1");
  const std::size_t kk = model_->config().num_directions;
  if (options_.report) {
    scores_ = scores_from_report(*options_.report, kk);
  } else {
    scores_ = eval_rca(model_->deformator(), model_->reconstructor(), model_->generator(), model_->config(),
                       options_.rca_samples, options_.rca_seed)
                  .per_direction;
  }
  install_routes();
}

ExplorerService::~ExplorerService() { stop(); }

json ExplorerService::health() const {
  return {{"status", "ok"},
          {"K", model_->config().num_directions},
          {"latent_dim", model_->config().latent_dim},
          {"generator", model_->generator().kind()},
          {"deformator_mode", model_->config().deformator_mode}};
}

json ExplorerService::directions() const {
  std::vector<std::size_t> order(scores_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores_[a] > scores_[b]; });
  json out = json::array();
  for (std::size_t k : order) {
    const auto c = model_->bank().centroid(k);
    double sq = 0.0;
    for (double v : c) sq += v * v;
    out.push_back({{"index", k}, {"score", scores_[k]}, {"centroid_norm", std::sqrt(sq)}});
  }
  return out;
}

double ExplorerService::clamp_eps(double eps, std::size_t* clamped) const {
  const double c = std::clamp(eps, -options_.eps_limit, options_.eps_limit);
  if (c != eps && clamped) ++*clamped;
  return c;
}

EditStack ExplorerService::parse_stack(const json& body, std::size_t* clamped) const {
  EditStack stack;
  const std::int64_t seed = read_integer(require(body, "seed", ""), "seed");
  if (seed < 0) throw BadRequest("seed", "expected a non-negative integer");
  stack.seed = static_cast<std::uint64_t>(seed);
  const auto it = body.find("shifts");
  if (it == body.end()) return stack;
  if (!it->is_array()) throw BadRequest("shifts", "expected an array");
  if (it->size() > options_.max_stack) {
    throw UnprocessableRequest("shifts: " + std::to_string(it->size()) + " entries exceed the limit of " +
                               std::to_string(options_.max_stack));
  }
  const std::size_t kk = model_->config().num_directions;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const std::string path = "shifts[" + std::to_string(i) + "]";
    const json& item = (*it)[i];
    const double eps = read_number(require(item, "eps", path), path + ".eps");
    const std::size_t k = read_index(require(item, "k", path), path + ".k", kk);
    stack.shifts.push_back({k, clamp_eps(eps, clamped)});
  }
  return stack;
}

Sweep ExplorerService::parse_sweep(const json& body, std::size_t* clamped) const {
  const json& s = require(body, "sweep", "");
  Sweep sweep;
  const double lo = read_number(require(s, "lo", "sweep"), "sweep.lo");
  const double hi = read_number(require(s, "hi", "sweep"), "sweep.hi");
  const std::int64_t n = read_integer(require(s, "n", "sweep"), "sweep.n");
  sweep.k = read_index(require(s, "k", "sweep"), "sweep.k", model_->config().num_directions);
  if (n < 1) throw UnprocessableRequest("sweep.n: must be at least 1");
  if (static_cast<std::uint64_t>(n) > options_.max_strip) {
    throw UnprocessableRequest("sweep.n: " + std::to_string(n) + " exceeds the limit of " +
                               std::to_string(options_.max_strip));
  }
  sweep.n = static_cast<std::size_t>(n);
  sweep.lo = clamp_eps(lo, clamped);
  sweep.hi = clamp_eps(hi, clamped);
  return sweep;
}

GenerateResult ExplorerService::generate(const EditStack& stack) const {
  GenerateResult r;
  const Tensor image = model_->render(stack, &r.latent_norm);
  r.png = encode_png(to_raster(image, 0));
  return r;
}

std::vector<std::string> ExplorerService::strip(const EditStack& stack, const Sweep& sweep) const {
  std::vector<std::string> out;
  out.reserve(sweep.n);
  for (std::size_t j = 0; j < sweep.n; ++j) {
    EditStack s = stack;
    s.shifts.push_back({sweep.k, sweep.value(j)});
    out.push_back(generate(s).png);
  }
  return out;
}

void ExplorerService::install_routes() {
  auto& srv = *server_;
  const std::size_t workers = options_.workers;
  srv.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  const std::string origin = options_.cors_origin;
  srv.set_default_headers({{"Access-Control-Allow-Origin", origin},
                           {"Access-Control-Expose-Headers", "X-Latent-Norm, X-Eps-Clamped, X-Eps-Limit"}});
  srv.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  if (options_.static_dir) srv.set_mount_point("/", options_.static_dir->string());

  srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(health().dump(), "application/json");
  });
  srv.Get("/directions", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(directions().dump(), "application/json");
  });

  // Shared request plumbing: parse JSON, map exceptions to status codes.
  auto guarded = [](auto&& body_handler) {
    return [body_handler](const httplib::Request& req, httplib::Response& res) {
      try {
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::exception&) {
          send_error(res, 400, "request body is not valid JSON", "body");
          return;
        }
        body_handler(body, res);
      } catch (const BadRequest& e) {
        send_error(res, 400, e.what(), e.field());
      } catch (const UnprocessableRequest& e) {
        send_error(res, 422, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  };

  srv.Post("/generate", guarded([this](const json& body, httplib::Response& res) {
             std::size_t clamped = 0;
             const EditStack stack = parse_stack(body, &clamped);
             const GenerateResult r = generate(stack);
             std::ostringstream norm;
             norm.precision(17);
             norm << r.latent_norm;
             res.set_header("X-Latent-Norm", norm.str());
             res.set_header("X-Eps-Clamped", std::to_string(clamped));
             res.set_header("X-Eps-Limit", std::to_string(options_.eps_limit));
             res.set_content(r.png, "image/png");
           }));
  srv.Post("/strip", guarded([this](const json& body, httplib::Response& res) {
             std::size_t clamped = 0;
             const EditStack stack = parse_stack(body, &clamped);
             const Sweep sweep = parse_sweep(body, &clamped);
             json out = json::array();
             for (const auto& png : strip(stack, sweep)) out.push_back(base64_encode(png));
             res.set_header("X-Eps-Clamped", std::to_string(clamped));
             res.set_header("X-Eps-Limit", std::to_string(options_.eps_limit));
             res.set_content(out.dump(), "application/json");
           }));
}

bool ExplorerService::listen(const std::string& host, int port) { return server_->listen(host, port); }

int ExplorerService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool ExplorerService::listen_after_bind() { return server_->listen_after_bind(); }

void ExplorerService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void ExplorerService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace latdir
