// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#include "latdir/generator.hpp"

#include <cmath>

#include "latdir/container.hpp"
#include "latdir/error.hpp"
#include "latdir/kernels.hpp"
#include "latdir/rng.hpp"

namespace latdir {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_codes(const Generator& gen, const Tensor& z, const char* what) {
  if (z.rank() != 2 || z.dim(1) != gen.latent_dim()) {
    throw ShapeError(std::string(what) + ": expected (N, " + std::to_string(gen.latent_dim()) + "), got " +
                     shape_string(z.shape()));
  }
  if (!z.all_finite()) throw InputError(std::string(what) + ": non-finite latent values");
}

void check_site(const Generator& gen, InjectionSite site) {
  if (!gen.supports(site)) {
    throw CapabilityError(gen.kind() + " generator does not support injection site " + to_string(site));
  }
}

Tensor sum_codes(const Tensor& z, const Tensor& shift) {
  if (z.shape() != shift.shape()) {
    throw ShapeError("shift shape " + shape_string(shift.shape()) + " does not match latent " + shape_string(z.shape()));
  }
  Tensor w = z;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += shift[i];
  return w;
}

Tensor orthonormal_basis(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor q({d, d});
  for (double& v : q.values()) v = normal(rng);
  // Modified Gram-Schmidt over rows.
  for (std::size_t i = 0; i < d; ++i) {
    auto ri = q.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      auto rj = q.row(j);
      double dot = 0.0;
      for (std::size_t t = 0; t < d; ++t) dot += ri[t] * rj[t];
      for (std::size_t t = 0; t < d; ++t) ri[t] -= dot * rj[t];
    }
    double norm = 0.0;
    for (double v : ri) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : ri) v /= norm;
  }
  return q;
}

}  // namespace

std::string to_string(InjectionSite site) {
  return site == InjectionSite::per_layer_style ? "per_layer_style" : "input_latent";
}

InjectionSite parse_injection_site(const std::string& text) {
  if (text == "input_latent") return InjectionSite::input_latent;
  if (text == "per_layer_style") return InjectionSite::per_layer_style;
  throw ConfigError("unknown injection site '" + text + "' (expected input_latent or per_layer_style)");
}

Tensor generate(const Generator& gen, const Tensor& z_batch) {
  check_codes(gen, z_batch, "generate");
  return gen.render(z_batch, Tensor(z_batch.shape()), gen.injection_site());
}

Tensor inject_shift(const Generator& gen, const Tensor& z_batch, const Tensor& shift) {
  return inject_shift(gen, z_batch, shift, gen.injection_site());
}

Tensor inject_shift(const Generator& gen, const Tensor& z_batch, const Tensor& shift, InjectionSite site) {
  check_site(gen, site);
  check_codes(gen, z_batch, "inject_shift");
  if (shift.shape() != z_batch.shape()) {
    throw ShapeError("inject_shift: shift " + shape_string(shift.shape()) + " does not match latent batch " +
                     shape_string(z_batch.shape()));
  }
  if (!shift.all_finite()) throw InputError("inject_shift: non-finite shift");
  return gen.render(z_batch, shift, site);
}

Tensor inject_shift_gradient(const Generator& gen, const Tensor& z_batch, const Tensor& shift,
                             const Tensor& grad_images) {
  if (!gen.differentiable()) throw CapabilityError(gen.kind() + " generator is not differentiable");
  check_codes(gen, z_batch, "inject_shift_gradient");
  require_shape(grad_images, gen.image_shape().batch(z_batch.dim(0)), "image gradient");
  return gen.render_shift_gradient(z_batch, shift, gen.injection_site(), grad_images);
}

// ---------------------------------------------------------------------------

BlobGenerator::BlobGenerator(BlobOptions options) : options_(options) {
  if (options_.latent_dim < kFactors) {
    throw ConfigError("blob generator needs latent_dim >= 4, got " + std::to_string(options_.latent_dim));
  }
  if (options_.resolution < 8) {
    throw ConfigError("blob generator needs resolution >= 8, got " + std::to_string(options_.resolution));
  }
  if (!(options_.min_radius > 0.0 && options_.min_radius < options_.max_radius)) {
    throw ConfigError("blob radius range must satisfy 0 < min < max");
  }
  Rng rng = make_rng(options_.seed, "blob-basis");
  basis_ = orthonormal_basis(options_.latent_dim, rng);
  factor_rows_ = slice_batch(basis_, 0, kFactors);
}

BlobGenerator::Geometry BlobGenerator::geometry(std::span<const double> f) const {
  const double res = static_cast<double>(options_.resolution);
  const double log_lo = std::log(options_.min_radius * res);
  const double log_hi = std::log(options_.max_radius * res);
  Geometry g;
  g.cx = res * (0.5 + 0.4 * std::tanh(options_.position_gain * f[0]));
  g.cy = res * (0.5 + 0.4 * std::tanh(options_.position_gain * f[1]));
  g.radius = std::exp(log_lo + (log_hi - log_lo) * sigmoid(f[2]));
  g.intensity = options_.min_intensity + (options_.max_intensity - options_.min_intensity) * sigmoid(f[3]);
  return g;
}

Tensor BlobGenerator::factors_of(const Tensor& codes) const {
  return kernels::serial::linear_forward(codes, factor_rows_, nullptr);
}

Tensor BlobGenerator::render_factors(const Tensor& factors) const {
  const std::size_t n = factors.dim(0), res = options_.resolution;
  Tensor out({n, 1, res, res});
#pragma omp parallel for schedule(static)
  for (long b = 0; b < static_cast<long>(n); ++b) {
    const Geometry g = geometry(factors.row(b));
    const double inv = 1.0 / (2.0 * g.radius * g.radius);
    double* img = out.data() + b * res * res;
    for (std::size_t y = 0; y < res; ++y) {
      const double dy = static_cast<double>(y) + 0.5 - g.cy;
      for (std::size_t x = 0; x < res; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - g.cx;
        img[y * res + x] = 2.0 * g.intensity * std::exp(-(dx * dx + dy * dy) * inv) - 1.0;
      }
    }
  }
  return out;
}

Tensor BlobGenerator::factor_gradient(const Tensor& factors, const Tensor& grad_images) const {
  const std::size_t n = factors.dim(0), res = options_.resolution;
  const double rd = static_cast<double>(res);
  const double log_lo = std::log(options_.min_radius * rd);
  const double log_hi = std::log(options_.max_radius * rd);
  Tensor gf({n, kFactors});
#pragma omp parallel for schedule(static)
  for (long b = 0; b < static_cast<long>(n); ++b) {
    const auto f = factors.row(b);
    const Geometry g = geometry(f);
    const double r2 = g.radius * g.radius;
    const double inv = 1.0 / (2.0 * r2);
    double d_cx = 0.0, d_cy = 0.0, d_r = 0.0, d_i = 0.0;
    const double* gi = grad_images.data() + b * res * res;
    for (std::size_t y = 0; y < res; ++y) {
      const double dy = static_cast<double>(y) + 0.5 - g.cy;
      for (std::size_t x = 0; x < res; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - g.cx;
        const double dist2 = dx * dx + dy * dy;
        const double e = std::exp(-dist2 * inv);
        const double up = gi[y * res + x];
        const double a = up * 2.0 * g.intensity * e;
        d_cx += a * dx / r2;
        d_cy += a * dy / r2;
        d_r += a * dist2 / (r2 * g.radius);
        d_i += up * 2.0 * e;
      }
    }
    const double t0 = std::tanh(options_.position_gain * f[0]);
    const double t1 = std::tanh(options_.position_gain * f[1]);
    const double s2 = sigmoid(f[2]);
    const double s3 = sigmoid(f[3]);
    auto out = gf.row(b);
    out[0] = d_cx * rd * 0.4 * options_.position_gain * (1.0 - t0 * t0);
    out[1] = d_cy * rd * 0.4 * options_.position_gain * (1.0 - t1 * t1);
    out[2] = d_r * g.radius * (log_hi - log_lo) * s2 * (1.0 - s2);
    out[3] = d_i * (options_.max_intensity - options_.min_intensity) * s3 * (1.0 - s3);
  }
  return gf;
}

Tensor BlobGenerator::code_gradient(const Tensor& grad_factors) const {
  // (N, 4) x (4, d)
  Tensor out({grad_factors.dim(0), options_.latent_dim});
  for (std::size_t b = 0; b < grad_factors.dim(0); ++b)
    for (std::size_t i = 0; i < kFactors; ++i) {
      const double g = grad_factors.at(b, i);
      for (std::size_t t = 0; t < options_.latent_dim; ++t) out.at(b, t) += g * factor_rows_.at(i, t);
    }
  return out;
}

Tensor BlobGenerator::render(const Tensor& z, const Tensor& shift, InjectionSite site) const {
  check_site(*this, site);
  return render_factors(factors_of(sum_codes(z, shift)));
}

Tensor BlobGenerator::render_shift_gradient(const Tensor& z, const Tensor& shift, InjectionSite site,
                                            const Tensor& grad_images) const {
  check_site(*this, site);
  const Tensor f = factors_of(sum_codes(z, shift));
  return code_gradient(factor_gradient(f, grad_images));
}

// ---------------------------------------------------------------------------

StyleBlobGenerator::StyleBlobGenerator(BlobOptions options, std::size_t layers, InjectionSite site)
    : BlobGenerator(options), layers_(layers), site_(site) {
  if (layers_ == 0) throw ConfigError("style generator needs at least one layer");
}

Tensor StyleBlobGenerator::render_styles(const Tensor& styles) const {
  const std::size_t d = latent_dim();
  require_shape(styles, {styles.dim(0), layers_, d}, "style tensor");
  const std::size_t n = styles.dim(0);
  const Tensor& rows = *factor_rows();
  Tensor f({n, kFactors});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < kFactors; ++i) {
      const std::size_t layer = std::min(i, layers_ - 1);
      const double* w = styles.data() + (b * layers_ + layer) * d;
      double acc = 0.0;
      for (std::size_t t = 0; t < d; ++t) acc += rows.at(i, t) * w[t];
      f.at(b, i) = acc;
    }
  return render_factors(f);
}

Tensor StyleBlobGenerator::render(const Tensor& z, const Tensor& shift, InjectionSite site) const {
  // Identity mapping: every layer's style is z, or z + shift at either site.
  const Tensor w = sum_codes(z, shift);
  const std::size_t n = w.dim(0), d = latent_dim();
  Tensor styles({n, layers_, d});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t l = 0; l < layers_; ++l) std::copy_n(w.data() + b * d, d, styles.data() + (b * layers_ + l) * d);
  (void)site;
  return render_styles(styles);
}

Tensor StyleBlobGenerator::render_shift_gradient(const Tensor& z, const Tensor& shift, InjectionSite,
                                                 const Tensor& grad_images) const {
  // Summing the per-layer style gradients collapses to the code gradient.
  const Tensor f = factors_of(sum_codes(z, shift));
  return code_gradient(factor_gradient(f, grad_images));
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kLeak = 0.2;
namespace kp = kernels::parallel;
}  // namespace

struct DcganGenerator::Trace {
  Tensor input, fc_pre, a0, up1, c1_pre, a1, up2, c2_pre, a2, up3, out;
};

DcganGenerator::DcganGenerator(DcganOptions options) : options_(options) {
  if (options_.resolution != 32) throw ConfigError("dcgan generator supports resolution 32 only");
  if (options_.width < 4 || options_.width % 4 != 0) throw ConfigError("dcgan width must be a positive multiple of 4");
  Rng rng = make_rng(options_.seed, "dcgan");
  auto uniform = [&](Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(static_cast<double>(fan_in)),
                                             1.0 / std::sqrt(static_cast<double>(fan_in)));
    for (double& v : t.values()) v = u(rng);
    return t;
  };
  const std::size_t in = options_.latent_dim + options_.num_classes;
  const std::size_t w = options_.width;
  params_.add("fc.weight", uniform({w * 16, in}, in));
  params_.add("fc.bias", Tensor({w * 16}));
  params_.add("conv1.weight", uniform({w / 2, w, 3, 3}, w * 9));
  params_.add("conv1.bias", Tensor({w / 2}));
  params_.add("conv2.weight", uniform({w / 4, w / 2, 3, 3}, w / 2 * 9));
  params_.add("conv2.bias", Tensor({w / 4}));
  params_.add("conv3.weight", uniform({options_.channels, w / 4, 3, 3}, w / 4 * 9));
  params_.add("conv3.bias", Tensor({options_.channels}));
  validate_params();
}

DcganGenerator::DcganGenerator(DcganOptions options, ParamSet params) : options_(options), params_(std::move(params)) {
  if (options_.resolution != 32) throw ConfigError("dcgan generator supports resolution 32 only");
  validate_params();
}

void DcganGenerator::validate_params() const {
  const std::size_t in = options_.latent_dim + options_.num_classes;
  const std::size_t w = options_.width;
  if (options_.num_classes > 0 && options_.fixed_class >= options_.num_classes) {
    throw ConfigError("fixed class " + std::to_string(options_.fixed_class) + " out of range for " +
                      std::to_string(options_.num_classes) + " classes");
  }
  require_shape(params_.get("fc.weight"), {w * 16, in}, "dcgan fc.weight");
  require_shape(params_.get("fc.bias"), {w * 16}, "dcgan fc.bias");
  require_shape(params_.get("conv1.weight"), {w / 2, w, 3, 3}, "dcgan conv1.weight");
  require_shape(params_.get("conv2.weight"), {w / 4, w / 2, 3, 3}, "dcgan conv2.weight");
  require_shape(params_.get("conv3.weight"), {options_.channels, w / 4, 3, 3}, "dcgan conv3.weight");
}

Tensor DcganGenerator::network_input(const Tensor& latent) const {
  if (options_.num_classes == 0) return latent;
  const std::size_t n = latent.dim(0), d = options_.latent_dim, c = options_.num_classes;
  Tensor x({n, d + c});
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(latent.data() + b * d, d, x.data() + b * (d + c));
    x.at(b, d + options_.fixed_class) = 1.0;
  }
  return x;
}

Tensor DcganGenerator::forward(const Tensor& latent, Trace* trace) const {
  Trace local;
  Trace& t = trace ? *trace : local;
  const std::size_t n = latent.dim(0), w = options_.width;
  const kernels::ConvGeometry same{1, 1};
  t.input = network_input(latent);
  t.fc_pre = kp::linear_forward(t.input, params_.get("fc.weight"), &params_.get("fc.bias")).reshaped({n, w, 4, 4});
  t.a0 = kernels::leaky_relu_forward(t.fc_pre, kLeak);
  t.up1 = kernels::upsample2x_forward(t.a0);
  t.c1_pre = kp::conv2d_forward(t.up1, params_.get("conv1.weight"), &params_.get("conv1.bias"), same);
  t.a1 = kernels::leaky_relu_forward(t.c1_pre, kLeak);
  t.up2 = kernels::upsample2x_forward(t.a1);
  t.c2_pre = kp::conv2d_forward(t.up2, params_.get("conv2.weight"), &params_.get("conv2.bias"), same);
  t.a2 = kernels::leaky_relu_forward(t.c2_pre, kLeak);
  t.up3 = kernels::upsample2x_forward(t.a2);
  t.out = kernels::tanh_forward(kp::conv2d_forward(t.up3, params_.get("conv3.weight"), &params_.get("conv3.bias"), same));
  return t.out;
}

Tensor DcganGenerator::backward(const Tensor& latent, const Tensor& grad_images, ParamSet* param_grads) const {
  Trace t;
  forward(latent, &t);
  ParamSet scratch;
  if (!param_grads) {
    scratch = params_.zeros_like();
    param_grads = &scratch;
  }
  const std::size_t n = latent.dim(0), w = options_.width;
  const kernels::ConvGeometry same{1, 1};
  Tensor g = kernels::tanh_backward(t.out, grad_images);
  Tensor gx;
  kp::conv2d_backward(t.up3, params_.get("conv3.weight"), g, same, &gx, param_grads->get("conv3.weight"),
                      &param_grads->get("conv3.bias"));
  g = kernels::leaky_relu_backward(t.c2_pre, kernels::upsample2x_backward(gx), kLeak);
  kp::conv2d_backward(t.up2, params_.get("conv2.weight"), g, same, &gx, param_grads->get("conv2.weight"),
                      &param_grads->get("conv2.bias"));
  g = kernels::leaky_relu_backward(t.c1_pre, kernels::upsample2x_backward(gx), kLeak);
  kp::conv2d_backward(t.up1, params_.get("conv1.weight"), g, same, &gx, param_grads->get("conv1.weight"),
                      &param_grads->get("conv1.bias"));
  g = kernels::leaky_relu_backward(t.fc_pre, kernels::upsample2x_backward(gx), kLeak).reshaped({n, w * 16});
  Tensor g_in;
  kp::linear_backward(t.input, params_.get("fc.weight"), g, &g_in, param_grads->get("fc.weight"),
                      &param_grads->get("fc.bias"));
  if (options_.num_classes == 0) return g_in;
  Tensor g_latent({n, options_.latent_dim});
  for (std::size_t b = 0; b < n; ++b) std::copy_n(g_in.row(b).data(), options_.latent_dim, g_latent.row(b).data());
  return g_latent;
}

Tensor DcganGenerator::render(const Tensor& z, const Tensor& shift, InjectionSite site) const {
  check_site(*this, site);
  return forward(sum_codes(z, shift), nullptr);
}

Tensor DcganGenerator::render_shift_gradient(const Tensor& z, const Tensor& shift, InjectionSite site,
                                             const Tensor& grad_images) const {
  check_site(*this, site);
  return backward(sum_codes(z, shift), grad_images, nullptr);
}

void DcganGenerator::save(const std::filesystem::path& path) const {
  Container c;
  c.header = {{"kind", "dcgan"},
              {"latent_dim", options_.latent_dim},
              {"channels", options_.channels},
              {"resolution", options_.resolution},
              {"width", options_.width},
              {"num_classes", options_.num_classes},
              {"seed", options_.seed}};
  c.add_all("generator.", params_);
  write_container(path, c);
}

DcganGenerator DcganGenerator::load(const std::filesystem::path& path, std::size_t fixed_class) {
  const Container c = read_container(path);
  if (c.header.value("kind", "") != "dcgan") {
    throw IncompatibleCheckpointError(path.string() + " does not hold dcgan generator weights");
  }
  DcganOptions o;
  try {
    o.latent_dim = c.header.at("latent_dim").get<std::size_t>();
    o.channels = c.header.at("channels").get<std::size_t>();
    o.resolution = c.header.at("resolution").get<std::size_t>();
    o.width = c.header.at("width").get<std::size_t>();
    o.num_classes = c.header.at("num_classes").get<std::size_t>();
    o.seed = c.header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpointError(path.string() + ": malformed generator header: " + e.what());
  }
  o.fixed_class = fixed_class;
  return DcganGenerator(o, c.extract("generator."));
}

// ---------------------------------------------------------------------------

GeneratorRegistry::GeneratorRegistry() {
  auto blob_options = [](const GeneratorOptions& o) {
    BlobOptions b;
    b.latent_dim = o.latent_dim;
    b.resolution = o.resolution;
    b.seed = o.seed;
    return b;
  };
  factories_["blob"] = [blob_options](const GeneratorOptions& o) -> std::shared_ptr<const Generator> {
    if (o.site != InjectionSite::input_latent) {
      throw CapabilityError("blob generator does not support injection site " + to_string(o.site));
    }
    return std::make_shared<BlobGenerator>(blob_options(o));
  };
  factories_["style_blob"] = [blob_options](const GeneratorOptions& o) -> std::shared_ptr<const Generator> {
    return std::make_shared<StyleBlobGenerator>(blob_options(o), o.style_layers, o.site);
  };
  auto dcgan = [](const GeneratorOptions& o) -> std::shared_ptr<const Generator> {
    if (o.site != InjectionSite::input_latent) {
      throw CapabilityError("dcgan generator does not support injection site " + to_string(o.site));
    }
    if (!o.checkpoint.empty()) {
      auto g = std::make_shared<DcganGenerator>(DcganGenerator::load(o.checkpoint, o.fixed_class));
      if (g->latent_dim() != o.latent_dim) {
        throw IncompatibleCheckpointError("generator weights have latent_dim " + std::to_string(g->latent_dim()) +
                                          ", config has " + std::to_string(o.latent_dim));
      }
      return g;
    }
    DcganOptions d;
    d.latent_dim = o.latent_dim;
    d.resolution = o.resolution;
    d.num_classes = o.num_classes;
    d.fixed_class = o.fixed_class;
    d.seed = o.seed;
    return std::make_shared<DcganGenerator>(d);
  };
  factories_["dcgan"] = dcgan;
  factories_["dcgan_fixed_class"] = [dcgan](const GeneratorOptions& o) {
    GeneratorOptions c = o;
    if (c.num_classes == 0) throw ConfigError("dcgan_fixed_class needs num_classes > 0");
    return dcgan(c);
  };
}

GeneratorRegistry& GeneratorRegistry::instance() {
  static GeneratorRegistry registry;
  return registry;
}

void GeneratorRegistry::add(const std::string& name, GeneratorFactory factory) {
  std::lock_guard lock(mutex_);
  factories_[name] = std::move(factory);
}

std::shared_ptr<const Generator> GeneratorRegistry::create(const GeneratorOptions& options) const {
  GeneratorFactory factory;
  {
    std::lock_guard lock(mutex_);
    auto it = factories_.find(options.name);
    if (it == factories_.end()) throw ConfigError("unknown generator '" + options.name + "'");
    factory = it->second;
  }
  return factory(options);
}

std::vector<std::string> GeneratorRegistry::names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, _] : factories_) out.push_back(name);
  return out;
}

std::shared_ptr<const Generator> make_blob_generator(std::size_t latent_dim, std::size_t resolution,
                                                     std::uint64_t seed) {
  BlobOptions o;
  o.latent_dim = latent_dim;
  o.resolution = resolution;
  o.seed = seed;
  return std::make_shared<BlobGenerator>(o);
}

}  // namespace latdir
