#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "launderscope/image.hpp"
#include "launderscope/patch.hpp"

namespace launderscope {

/// Denoiser used to split an image into content and noise residual.
struct Denoiser {
  enum class Kind { Median3, Gaussian };
  Kind kind = Kind::Median3;
  double sigma = 1.0;  // Gaussian only

  static Denoiser median3() { return {}; }
  static Denoiser gaussian(double sigma) { return {Kind::Gaussian, sigma}; }

  friend bool operator==(const Denoiser&, const Denoiser&) = default;
};

/// Single-channel floating raster, row-major.
struct Residual {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

/// Centered Fourier magnitude: DC sits at (height/2, width/2).
struct Spectrum {
  int width = 0;
  int height = 0;
  std::vector<double> mag;
  std::size_t count = 0;

  double at(int x, int y) const {
    return mag[static_cast<std::size_t>(y) * width + x];
  }
  int center_x() const { return width / 2; }
  int center_y() const { return height / 2; }
};

struct LatticePeak {
  int k = 0;
  int l = 0;
  double peak_value = 0.0;
  double background = 0.0;
};

struct PeakReport {
  int factor = 8;
  std::vector<LatticePeak> peaks;
  double peak_strength = 1.0;
};

struct SpectralFeatures {
  double peak_strength = 1.0;
  double low_freq_ratio = 0.0;
  double flatness = 0.0;

  std::array<double, 3> as_array() const {
    return {peak_strength, low_freq_ratio, flatness};
  }
};

/// Which denoiser and peak lattice a feature extractor uses.
struct FeatureConfig {
  Denoiser denoiser;
  int factor = 8;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Luminance minus its denoised version, then mean-subtracted.
/// Requires at least 8x8 pixels.
Residual extract_residual(const ImageBuffer& img, const Denoiser& denoiser);

/// Denoised luminance plane (exposed for testing and diagnostics).
std::vector<double> denoise_plane(std::span<const double> plane, int width,
                                  int height, const Denoiser& denoiser);

/// |DFT| with the unnormalized forward transform, DC shifted to the center.
Spectrum magnitude_spectrum(const Residual& res);

/// Running element-wise mean of magnitude spectra; adds in call order so the
/// result is reproducible.
class SpectrumAccumulator {
 public:
  void add(const Residual& res);
  void add(const Spectrum& spec);
  std::size_t count() const noexcept { return count_; }
  /// Throws if nothing was added.
  Spectrum mean() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> sum_;
  std::size_t count_ = 0;
};

Spectrum average_spectrum(std::span<const Residual> residuals);

/// Lattice-peak contrast: for each site (cx + kW/f, cy + lH/f), (k,l) != 0,
/// |k|,|l| <= f/2, the 3x3 max over the median of the surrounding 11x11 ring.
/// Neighborhoods wrap around the spectrum borders.
PeakReport detect_peaks(const Spectrum& spec, int factor);

double low_freq_ratio(const Spectrum& spec);
double spectral_flatness(const Spectrum& spec);

/// True when the non-DC energy is below the degenerate threshold (1e-12).
bool is_degenerate(const Spectrum& spec);

SpectralFeatures spectral_features(const ImageBuffer& pixels,
                                   const FeatureConfig& cfg);
inline SpectralFeatures spectral_features(const Patch& patch,
                                          const FeatureConfig& cfg) {
  return spectral_features(patch.pixels, cfg);
}

/// log(1 + mag) stretched to [0,255] as an 8-bit grayscale image.
ImageBuffer render_spectrum(const Spectrum& spec);

}  // namespace launderscope
