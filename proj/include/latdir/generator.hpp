// Copyright 2026 The latdir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "latdir/params.hpp"
#include "latdir/tensor.hpp"

namespace latdir {

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 32;
  std::size_t width = 32;

  Shape batch(std::size_t n) const { return {n, channels, height, width}; }
  std::size_t pixels() const { return channels * height * width; }
  bool operator==(const ImageShape&) const = default;
};

/// Where latent shifts enter the generator: added to the input code, or added
/// to the style vector consumed by every synthesis layer.
enum class InjectionSite { input_latent, per_layer_style };

std::string to_string(InjectionSite site);
InjectionSite parse_injection_site(const std::string& text);

/// A frozen, differentiable image generator. Implementations are immutable
/// after construction and safe to call concurrently.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual ImageShape image_shape() const = 0;
  virtual bool differentiable() const { return true; }

  /// Injection site this handle was configured with.
  virtual InjectionSite injection_site() const { return InjectionSite::input_latent; }
  virtual bool supports(InjectionSite site) const { return site == InjectionSite::input_latent; }

  /// Rows of the ground-truth factor map, shape (factors, d), when the
  /// generator has one; nullptr otherwise.
  virtual const Tensor* factor_rows() const { return nullptr; }

  // z, shift: (N, d). Returns (N, C, H, W) with values in [-1, 1].
  virtual Tensor render(const Tensor& z, const Tensor& shift, InjectionSite site) const = 0;

  /// Vector-Jacobian product of render() with respect to `shift`.
  virtual Tensor render_shift_gradient(const Tensor& z, const Tensor& shift, InjectionSite site,
                                       const Tensor& grad_images) const = 0;
};

/// G(z) for a batch of codes (N, d). Validates width and finiteness.
Tensor generate(const Generator& gen, const Tensor& z_batch);

/// G with `shift` injected at the handle's configured site.
Tensor inject_shift(const Generator& gen, const Tensor& z_batch, const Tensor& shift);

/// Same, at an explicit site; CapabilityError if the model lacks it.
Tensor inject_shift(const Generator& gen, const Tensor& z_batch, const Tensor& shift, InjectionSite site);

/// d(<grad_images, inject_shift(gen, z, shift)>)/d(shift).
Tensor inject_shift_gradient(const Generator& gen, const Tensor& z_batch, const Tensor& shift,
                             const Tensor& grad_images);

// ---------------------------------------------------------------------------
// Analytic blob generator.

struct BlobOptions {
  std::size_t latent_dim = 8;
  std::size_t resolution = 32;
  std::uint64_t seed = 1234;
  double position_gain = 0.5;      // tanh(gain * f) drives the center
  double min_radius = 0.06;        // fractions of the resolution
  double max_radius = 0.22;
  double min_intensity = 0.25;
  double max_intensity = 1.0;
};

/// Gaussian blob on a single-channel canvas. A fixed random orthonormal
/// matrix Q gives factors f = Q z; only the first four are used:
///   f1, f2 -> blob center x, y (tanh, inner 80% of the canvas)
///   f3     -> log radius (sigmoid between min and max)
///   f4     -> intensity (sigmoid between min and max)
/// pixel = 2 * intensity * exp(-|p - center|^2 / (2 r^2)) - 1.
class BlobGenerator : public Generator {
 public:
  static constexpr std::size_t kFactors = 4;

  explicit BlobGenerator(BlobOptions options);

  std::string kind() const override { return "blob"; }
  std::size_t latent_dim() const override { return options_.latent_dim; }
  ImageShape image_shape() const override { return {1, options_.resolution, options_.resolution}; }
  const Tensor* factor_rows() const override { return &factor_rows_; }

  Tensor render(const Tensor& z, const Tensor& shift, InjectionSite site) const override;
  Tensor render_shift_gradient(const Tensor& z, const Tensor& shift, InjectionSite site,
                               const Tensor& grad_images) const override;

  /// Full orthonormal basis Q (d, d); the first four rows are the factor rows.
  const Tensor& basis() const { return basis_; }
  const BlobOptions& options() const { return options_; }

  struct Geometry {
    double cx, cy, radius, intensity;
  };
  /// Blob geometry (pixel units) for the four factor values.
  Geometry geometry(std::span<const double> factors) const;

  /// Factor values Q[:4] w for a batch of codes (N, d) -> (N, 4).
  Tensor factors_of(const Tensor& codes) const;

 protected:
  Tensor render_factors(const Tensor& factors) const;
  // d(<grad_images, image>)/d(factors), shape (N, 4).
  Tensor factor_gradient(const Tensor& factors, const Tensor& grad_images) const;
  // Pulls a factor gradient back to code space: g_factors (N, 4) -> (N, d).
  Tensor code_gradient(const Tensor& grad_factors) const;

 private:
  BlobOptions options_;
  Tensor basis_;
  Tensor factor_rows_;
};

/// Blob generator behind a per-layer style interface: the mapping is the
/// identity, synthesis has `layers` style inputs and factor i reads style
/// layer min(i, layers - 1). A per_layer_style shift is added to every layer.
class StyleBlobGenerator : public BlobGenerator {
 public:
  StyleBlobGenerator(BlobOptions options, std::size_t layers, InjectionSite site);

  std::string kind() const override { return "style_blob"; }
  InjectionSite injection_site() const override { return site_; }
  bool supports(InjectionSite) const override { return true; }
  std::size_t layers() const { return layers_; }

  Tensor render(const Tensor& z, const Tensor& shift, InjectionSite site) const override;
  Tensor render_shift_gradient(const Tensor& z, const Tensor& shift, InjectionSite site,
                               const Tensor& grad_images) const override;

  /// Synthesis from explicit per-layer styles, shape (N, layers, d).
  Tensor render_styles(const Tensor& styles) const;

 private:

  std::size_t layers_;
  InjectionSite site_;
};

// ---------------------------------------------------------------------------
// Small convolutional generator (DCGAN-style, 32x32).

struct DcganOptions {
  std::size_t latent_dim = 64;
  std::size_t channels = 3;
  std::size_t resolution = 32;
  std::size_t width = 64;
  // Class conditioning: a frozen one-hot appended to the latent input.
  std::size_t num_classes = 0;
  std::size_t fixed_class = 0;
  std::uint64_t seed = 1234;
};

/// fc -> (width, 4, 4) -> [upsample, conv3x3, leaky] x2 -> upsample, conv3x3 -> tanh.
/// Parameters are exposed and their gradients available, so the network can
/// be fitted by callers; this project only uses it frozen.
class DcganGenerator : public Generator {
 public:
  explicit DcganGenerator(DcganOptions options);
  DcganGenerator(DcganOptions options, ParamSet params);

  std::string kind() const override { return options_.num_classes ? "dcgan_fixed_class" : "dcgan"; }
  std::size_t latent_dim() const override { return options_.latent_dim; }
  ImageShape image_shape() const override { return {options_.channels, options_.resolution, options_.resolution}; }

  Tensor render(const Tensor& z, const Tensor& shift, InjectionSite site) const override;
  Tensor render_shift_gradient(const Tensor& z, const Tensor& shift, InjectionSite site,
                               const Tensor& grad_images) const override;

  /// Input gradient, plus parameter gradients accumulated into `param_grads`
  /// when non-null.
  Tensor backward(const Tensor& latent, const Tensor& grad_images, ParamSet* param_grads) const;

  const ParamSet& params() const { return params_; }
  const DcganOptions& options() const { return options_; }

  void save(const std::filesystem::path& path) const;
  /// Loads weights from a container written by save(); options come from the file.
  static DcganGenerator load(const std::filesystem::path& path, std::size_t fixed_class = 0);

 private:
  struct Trace;
  Tensor forward(const Tensor& latent, Trace* trace) const;
  Tensor network_input(const Tensor& latent) const;
  void validate_params() const;

  DcganOptions options_;
  ParamSet params_;
};

// ---------------------------------------------------------------------------
// Adapter registry.

struct GeneratorOptions {
  std::string name = "blob";
  std::size_t latent_dim = 8;
  std::size_t resolution = 32;
  std::uint64_t seed = 1234;
  std::string checkpoint;  // weights file for trained models
  std::size_t style_layers = 1;
  InjectionSite site = InjectionSite::input_latent;
  std::size_t num_classes = 0;
  std::size_t fixed_class = 0;
};

using GeneratorFactory = std::function<std::shared_ptr<const Generator>(const GeneratorOptions&)>;

/// Named factories for generator backends. External pretrained models plug in
/// by registering a factory under a new name.
class GeneratorRegistry {
 public:
  static GeneratorRegistry& instance();

  void add(const std::string& name, GeneratorFactory factory);
  std::shared_ptr<const Generator> create(const GeneratorOptions& options) const;
  std::vector<std::string> names() const;

 private:
  GeneratorRegistry();

  mutable std::mutex mutex_;
  std::map<std::string, GeneratorFactory> factories_;
};

std::shared_ptr<const Generator> make_blob_generator(std::size_t latent_dim, std::size_t resolution,
                                                     std::uint64_t seed = 1234);

}  // namespace latdir
