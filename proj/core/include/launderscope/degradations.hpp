#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "launderscope/image.hpp"

namespace launderscope {

enum class DownFilter { Box, Bilinear };
/// `UpConv` is a stride-`factor` transposed convolution whose kernel is the
/// bilinear tent plus one leakage tap past its support, i.e. 2*factor+1 taps
/// that do not tile the output evenly. The uneven overlap leaves a faint
/// brightness ripple with the latent period, the usual source of
/// checkerboard artifacts in learned decoders.
enum class UpFilter { Bilinear, Nearest, UpConv };

/// Down/up-sampling stand-in for an autoencoder round trip with no added
/// noise. `factor` plays the role of the latent stride.
struct LaunderProxyConfig {
  int factor = 8;
  DownFilter down_filter = DownFilter::Bilinear;
  UpFilter up_filter = UpFilter::UpConv;
  /// Weight of the UpConv leakage tap, relative to the tent peak.
  double overlap_leak = 0.01;
};

struct FixtureConfig {
  int count_per_class = 1;
  int size = 256;
  std::uint64_t seed = 0;
  double sensor_noise_sigma = 0.02;
  double synth_residual_sigma = 0.03;
  int factor = 8;

  void validate() const;
};

/// Half-pixel-centered bilinear resampling without prefiltering.
ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height);
ImageBuffer resize_nearest(const ImageBuffer& img, int width, int height);
/// Integer-factor transposed-convolution upsampling (see UpFilter::UpConv).
/// The output is rescaled so its mean gain over one period is exactly 1.
ImageBuffer upsample_upconv(const ImageBuffer& img, int factor, double leak);
/// Averages non-overlapping factor x factor blocks.
ImageBuffer downsample_box(const ImageBuffer& img, int factor);

ImageBuffer launder_proxy(const ImageBuffer& img, const LaunderProxyConfig& cfg = {});

// Fixture generators, deterministic in (cfg.seed, index). Outputs are
// 3-channel, cfg.size square and already on the 8-bit grid.
ImageBuffer gen_pristine(const FixtureConfig& cfg, std::uint64_t index);
ImageBuffer gen_laundered(const FixtureConfig& cfg, std::uint64_t index);
ImageBuffer gen_fully_synthetic(const FixtureConfig& cfg, std::uint64_t index);
ImageBuffer gen_fixture(ClassLabel label, const FixtureConfig& cfg,
                        std::uint64_t index);

/// Zero-mean, unit-variance noise with a 1/f amplitude spectrum.
std::vector<double> pink_noise(int size, std::uint64_t seed);

struct PostProcOp {
  enum class Kind { Jpeg, Resize, DownUp };
  Kind kind = Kind::Jpeg;
  int quality = 80;
  double scale = 1.0;
  int factor = 2;

  static PostProcOp jpeg(int quality);
  static PostProcOp resize(double scale);
  static PostProcOp down_up(int factor);

  /// Accepts `jpeg<Q>`, `resize<S>` and `downup<F>`, e.g. "jpeg70",
  /// "resize0.5", "downup4".
  static PostProcOp parse(std::string_view text);
  std::string name() const;
  void validate() const;
};

ImageBuffer apply_postproc(const ImageBuffer& img, const PostProcOp& op);

/// splitmix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index,
                       std::uint64_t stream = 0);

}  // namespace launderscope
