#include "launderscope/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "fft.hpp"
#include "launderscope/error.hpp"

namespace launderscope {

namespace {

constexpr double kDegenerateEnergy = 1e-12;
constexpr double kBackgroundFloor = 1e-12;

int wrap(int v, int n) {
  v %= n;
  return v < 0 ? v + n : v;
}

int clamp_index(int v, int n) { return std::clamp(v, 0, n - 1); }

// Median of nine via a fixed 19-exchange network.
double median9(std::array<double, 9>& p) {
  auto sort2 = [&](int a, int b) {
    if (p[a] > p[b]) std::swap(p[a], p[b]);
  };
  sort2(1, 2); sort2(4, 5); sort2(7, 8); sort2(0, 1); sort2(3, 4); sort2(6, 7);
  sort2(1, 2); sort2(4, 5); sort2(7, 8); sort2(0, 3); sort2(5, 8); sort2(4, 7);
  sort2(3, 6); sort2(1, 4); sort2(2, 5); sort2(4, 7); sort2(4, 2); sort2(6, 4);
  sort2(4, 2);
  return p[4];
}

std::vector<double> median3(std::span<const double> plane, int w, int h) {
  std::vector<double> out(plane.size());
  std::array<double, 9> win{};
  for (int y = 0; y < h; ++y) {
    const double* rows[3];
    for (int dy = -1; dy <= 1; ++dy) {
      rows[dy + 1] = plane.data() + static_cast<std::size_t>(clamp_index(y + dy, h)) * w;
    }
    for (int x = 0; x < w; ++x) {
      const int xs[3] = {clamp_index(x - 1, w), x, clamp_index(x + 1, w)};
      int n = 0;
      for (const double* row : rows) {
        for (int xx : xs) win[n++] = row[xx];
      }
      out[static_cast<std::size_t>(y) * w + x] = median9(win);
    }
  }
  return out;
}

std::vector<double> gaussian_blur(std::span<const double> plane, int w, int h,
                                  double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw UsageError("gaussian denoiser sigma must be positive");
  }
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& k : kernel) k /= norm;

  std::vector<double> tmp(plane.size());
  std::vector<double> out(plane.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] *
               plane[static_cast<std::size_t>(y) * w + clamp_index(x + i, w)];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] *
               tmp[static_cast<std::size_t>(clamp_index(y + i, h)) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

double median_of(std::vector<double>& values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

void check_same_shape(int w, int h, const Spectrum& s) {
  if (w != s.width || h != s.height) {
    throw DataError("spectrum dimension mismatch: " + std::to_string(w) + "x" +
                    std::to_string(h) + " vs " + std::to_string(s.width) + "x" +
                    std::to_string(s.height));
  }
}

double non_dc_energy(const Spectrum& spec) {
  double total = 0.0;
  for (double m : spec.mag) total += m * m;
  const double dc = spec.at(spec.center_x(), spec.center_y());
  return total - dc * dc;
}

}  // namespace

std::vector<double> denoise_plane(std::span<const double> plane, int width,
                                  int height, const Denoiser& denoiser) {
  switch (denoiser.kind) {
    case Denoiser::Kind::Median3:
      return median3(plane, width, height);
    case Denoiser::Kind::Gaussian:
      return gaussian_blur(plane, width, height, denoiser.sigma);
  }
  throw UsageError("unknown denoiser");
}

Residual extract_residual(const ImageBuffer& img, const Denoiser& denoiser) {
  if (img.width() < 8 || img.height() < 8) {
    throw DataError("image too small for residual extraction (need 8x8)");
  }
  const ImageBuffer luma = to_luminance(img);
  std::vector<double> plane(luma.data().begin(), luma.data().end());
  const auto smooth = denoise_plane(plane, luma.width(), luma.height(), denoiser);
  Residual res{luma.width(), luma.height(), std::move(plane)};
  double mean = 0.0;
  for (std::size_t i = 0; i < res.data.size(); ++i) {
    res.data[i] -= smooth[i];
    mean += res.data[i];
  }
  mean /= static_cast<double>(res.data.size());
  for (double& v : res.data) v -= mean;
  return res;
}

Spectrum magnitude_spectrum(const Residual& res) {
  if (res.width < 8 || res.height < 8) {
    throw DataError("residual too small for spectrum (need 8x8)");
  }
  const int w = res.width, h = res.height;
  const auto freq = detail::fft2d(res.data, w, h);
  Spectrum spec{w, h, std::vector<double>(freq.size()), 1};
  const int cx = w / 2, cy = h / 2;
  for (int v = 0; v < h; ++v) {
    const int ty = (v + cy) % h;
    for (int u = 0; u < w; ++u) {
      const int tx = (u + cx) % w;
      const auto& c = freq[static_cast<std::size_t>(v) * w + u];
      spec.mag[static_cast<std::size_t>(ty) * w + tx] =
          std::sqrt(c.real() * c.real() + c.imag() * c.imag());
    }
  }
  return spec;
}

void SpectrumAccumulator::add(const Residual& res) { add(magnitude_spectrum(res)); }

void SpectrumAccumulator::add(const Spectrum& spec) {
  if (count_ == 0) {
    width_ = spec.width;
    height_ = spec.height;
    sum_.assign(spec.mag.size(), 0.0);
  }
  check_same_shape(width_, height_, spec);
  // A pre-averaged spectrum contributes with its own weight.
  const double weight = static_cast<double>(std::max<std::size_t>(spec.count, 1));
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += weight * spec.mag[i];
  count_ += std::max<std::size_t>(spec.count, 1);
}

Spectrum SpectrumAccumulator::mean() const {
  if (count_ == 0) throw DataError("cannot average an empty spectrum stream");
  Spectrum out{width_, height_, sum_, count_};
  const double inv = 1.0 / static_cast<double>(count_);
  for (double& m : out.mag) m *= inv;
  return out;
}

Spectrum average_spectrum(std::span<const Residual> residuals) {
  SpectrumAccumulator acc;
  for (const auto& r : residuals) acc.add(r);
  return acc.mean();
}

bool is_degenerate(const Spectrum& spec) {
  return non_dc_energy(spec) < kDegenerateEnergy;
}

PeakReport detect_peaks(const Spectrum& spec, int factor) {
  if (factor < 2) throw UsageError("peak lattice factor must be at least 2");
  if (spec.width % factor != 0 || spec.height % factor != 0) {
    throw DataError("dimensions not divisible by factor");
  }
  PeakReport report;
  report.factor = factor;
  const int w = spec.width, h = spec.height;
  const int cx = spec.center_x(), cy = spec.center_y();
  const int step_x = w / factor, step_y = h / factor;
  const int half = factor / 2;
  const bool degenerate = is_degenerate(spec);

  std::vector<double> ring;
  ring.reserve(121);
  double ratio_sum = 0.0;
  for (int l = -half; l <= half; ++l) {
    for (int k = -half; k <= half; ++k) {
      if (k == 0 && l == 0) continue;
      const int px = cx + k * step_x;
      const int py = cy + l * step_y;
      double peak = 0.0;
      ring.clear();
      for (int dy = -5; dy <= 5; ++dy) {
        for (int dx = -5; dx <= 5; ++dx) {
          const double m = spec.at(wrap(px + dx, w), wrap(py + dy, h));
          if (std::abs(dx) <= 1 && std::abs(dy) <= 1) {
            peak = std::max(peak, m);
          } else {
            ring.push_back(m);
          }
        }
      }
      const double background = median_of(ring);
      report.peaks.push_back({k, l, peak, background});
      ratio_sum += peak / std::max(background, kBackgroundFloor);
    }
  }
  report.peak_strength =
      degenerate ? 1.0 : ratio_sum / static_cast<double>(report.peaks.size());
  return report;
}

double low_freq_ratio(const Spectrum& spec) {
  const double total = non_dc_energy(spec);
  if (total < kDegenerateEnergy) return 0.0;
  const int cx = spec.center_x(), cy = spec.center_y();
  const double radius = std::min(spec.width, spec.height) / 8.0;
  double low = 0.0;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (x == cx && y == cy) continue;
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= radius * radius) {
        const double m = spec.at(x, y);
        low += m * m;
      }
    }
  }
  return std::clamp(low / total, 0.0, 1.0);
}

double spectral_flatness(const Spectrum& spec) {
  if (is_degenerate(spec)) return 0.0;
  const int cx = spec.center_x(), cy = spec.center_y();
  double log_sum = 0.0, sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      if (x == cx && y == cy) continue;
      const double m = spec.at(x, y);
      if (m <= 0.0) return 0.0;
      log_sum += std::log(m);
      sum += m;
      ++n;
    }
  }
  const double geo = std::exp(log_sum / static_cast<double>(n));
  const double arith = sum / static_cast<double>(n);
  return std::clamp(geo / arith, 0.0, 1.0);
}

SpectralFeatures spectral_features(const ImageBuffer& pixels,
                                   const FeatureConfig& cfg) {
  if (cfg.factor < 2) throw UsageError("peak lattice factor must be at least 2");
  if (pixels.width() % cfg.factor != 0 || pixels.height() % cfg.factor != 0) {
    throw DataError("dimensions not divisible by factor");
  }
  const Spectrum spec = magnitude_spectrum(extract_residual(pixels, cfg.denoiser));
  if (is_degenerate(spec)) return {};
  return {detect_peaks(spec, cfg.factor).peak_strength, low_freq_ratio(spec),
          spectral_flatness(spec)};
}

ImageBuffer render_spectrum(const Spectrum& spec) {
  ImageBuffer out(spec.width, spec.height, 1);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double m : spec.mag) {
    const double v = std::log1p(m);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  auto dst = out.data();
  const double span = hi - lo;
  for (std::size_t i = 0; i < spec.mag.size(); ++i) {
    dst[i] = span > 0.0
                 ? static_cast<float>((std::log1p(spec.mag[i]) - lo) / span)
                 : 0.0f;
  }
  return out;
}

}  // namespace launderscope
