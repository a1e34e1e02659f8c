#include "launderscope/degradations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>

#include "fft.hpp"
#include "launderscope/error.hpp"
#include "launderscope/spectral.hpp"

namespace launderscope {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index,
                       std::uint64_t stream) {
  auto splitmix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  return splitmix(seed ^ splitmix(index * 0x100000001B3ull + stream));
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height) {
  if (width < 1 || height < 1) throw DataError("resize to zero dimension");
  const int sw = img.width(), sh = img.height(), ch = img.channels();
  ImageBuffer out(width, height, ch);
  const double sx = static_cast<double>(sw) / width;
  const double sy = static_cast<double>(sh) / height;

  struct Tap {
    int i0, i1;
    double w1;
  };
  auto taps = [](int n_out, int n_in, double scale) {
    std::vector<Tap> t(n_out);
    for (int i = 0; i < n_out; ++i) {
      double src = (i + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
      const int i0 = static_cast<int>(std::floor(src));
      const int i1 = std::min(i0 + 1, n_in - 1);
      t[i] = {i0, i1, src - i0};
    }
    return t;
  };
  const auto tx = taps(width, sw, sx);
  const auto ty = taps(height, sh, sy);
  for (int y = 0; y < height; ++y) {
    const auto& a = ty[y];
    for (int x = 0; x < width; ++x) {
      const auto& b = tx[x];
      for (int c = 0; c < ch; ++c) {
        const double top = (1.0 - b.w1) * img.at(b.i0, a.i0, c) + b.w1 * img.at(b.i1, a.i0, c);
        const double bot = (1.0 - b.w1) * img.at(b.i0, a.i1, c) + b.w1 * img.at(b.i1, a.i1, c);
        out.at(x, y, c) = static_cast<float>((1.0 - a.w1) * top + a.w1 * bot);
      }
    }
  }
  return out;
}

ImageBuffer resize_nearest(const ImageBuffer& img, int width, int height) {
  if (width < 1 || height < 1) throw DataError("resize to zero dimension");
  ImageBuffer out(width, height, img.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height() - 1, y * img.height() / height);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width() - 1, x * img.width() / width);
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

ImageBuffer upsample_upconv(const ImageBuffer& img, int factor, double leak) {
  if (factor < 1) throw UsageError("upsampling factor must be at least 1");
  if (!(leak >= 0.0 && leak < 1.0)) {
    throw UsageError("overlap leak must lie in [0,1)");
  }
  // Input sample i sits at output coordinate (i + 0.5) * factor - 0.5.
  const double f = factor;
  auto weight = [&](double d) {
    if (std::abs(d) < f) return 1.0 - std::abs(d) / f;
    if (d > f && d <= f + 1.0) return leak;
    return 0.0;
  };
  struct Tap {
    int index;
    double w;
  };
  auto taps_for = [&](int n_in) {
    const int n_out = n_in * factor;
    std::vector<std::vector<Tap>> taps(n_out);
    std::vector<double> period_gain(factor, 0.0);
    for (int j = 0; j < n_out; ++j) {
      const int first = static_cast<int>(std::floor((j - 2.0 * f) / f)) - 1;
      const int last = static_cast<int>(std::ceil((j + 2.0 * f) / f)) + 1;
      for (int i = first; i <= last; ++i) {
        const double w = weight(j - ((i + 0.5) * f - 0.5));
        if (w > 0.0) taps[j].push_back({std::clamp(i, 0, n_in - 1), w});
      }
    }
    // Gain of an unbounded constant input depends only on the phase.
    for (int p = 0; p < factor; ++p) {
      const int j = p + 4 * factor;
      for (int i = -8; i <= 16; ++i) period_gain[p] += weight(j - ((i + 0.5) * f - 0.5));
    }
    double mean_gain = 0.0;
    for (double g : period_gain) mean_gain += g;
    mean_gain /= f;
    for (auto& row : taps) {
      for (auto& t : row) t.w /= mean_gain;
    }
    return taps;
  };
  const auto tx = taps_for(img.width());
  const auto ty = taps_for(img.height());
  const int w = img.width() * factor, h = img.height() * factor;
  const int ch = img.channels();

  ImageBuffer tmp(w, img.height(), ch);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (const auto& t : tx[x]) acc += t.w * img.at(t.index, y, c);
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  ImageBuffer out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (const auto& t : ty[y]) acc += t.w * tmp.at(x, t.index, c);
        out.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

ImageBuffer downsample_box(const ImageBuffer& img, int factor) {
  if (factor < 1 || img.width() % factor != 0 || img.height() % factor != 0) {
    throw DataError("dimensions not divisible by factor");
  }
  const int w = img.width() / factor, h = img.height() / factor;
  ImageBuffer out(w, h, img.channels());
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) {
            acc += img.at(x * factor + dx, y * factor + dy, c);
          }
        }
        out.at(x, y, c) = static_cast<float>(acc * inv);
      }
    }
  }
  return out;
}

ImageBuffer launder_proxy(const ImageBuffer& img, const LaunderProxyConfig& cfg) {
  if (cfg.factor < 1) throw UsageError("launder factor must be at least 1");
  if (img.width() % cfg.factor != 0 || img.height() % cfg.factor != 0) {
    throw DataError("dimensions not divisible by factor");
  }
  if (cfg.factor == 1) return img;
  const int w = img.width() / cfg.factor, h = img.height() / cfg.factor;
  const ImageBuffer small = cfg.down_filter == DownFilter::Box
                                ? downsample_box(img, cfg.factor)
                                : resize_bilinear(img, w, h);
  ImageBuffer out;
  switch (cfg.up_filter) {
    case UpFilter::Bilinear:
      out = resize_bilinear(small, img.width(), img.height());
      break;
    case UpFilter::Nearest:
      out = resize_nearest(small, img.width(), img.height());
      break;
    case UpFilter::UpConv:
      out = upsample_upconv(small, cfg.factor, cfg.overlap_leak);
      break;
  }
  out.clamp();
  return out;
}

// ---------------------------------------------------------------- fixtures

void FixtureConfig::validate() const {
  if (count_per_class < 1) throw UsageError("fixture count must be at least 1");
  if (factor < 1) throw UsageError("fixture factor must be at least 1");
  if (size < 8 || size % factor != 0 || size % 8 != 0) {
    throw UsageError("fixture size must be a multiple of 8 and of the factor");
  }
  if (!(sensor_noise_sigma >= 0.0) || !(synth_residual_sigma >= 0.0)) {
    throw UsageError("noise sigmas must be non-negative");
  }
}

std::vector<double> pink_noise(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<detail::Complex> freq(static_cast<std::size_t>(size) * size);
  for (int v = 0; v < size; ++v) {
    const double fy = std::min(v, size - v);
    for (int u = 0; u < size; ++u) {
      const double fx = std::min(u, size - u);
      const double f = std::hypot(fx, fy);
      const double re = normal(rng);
      const double im = normal(rng);
      freq[static_cast<std::size_t>(v) * size + u] =
          f > 0.0 ? detail::Complex(re, im) / f : detail::Complex(0.0, 0.0);
    }
  }
  detail::ifft2d(freq, size, size);
  std::vector<double> out(freq.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = freq[i].real();
    mean += out[i];
  }
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (double& v : out) {
    v -= mean;
    var += v * v;
  }
  const double sd = std::sqrt(var / static_cast<double>(out.size()));
  for (double& v : out) v /= sd;
  return out;
}

namespace {

enum Stream : std::uint64_t { kPristine = 1, kSynthetic = 2 };

constexpr double kOpticalBlurSigma = 1.0;

// [1 2 1]/4 separable smoothing, the footprint of demosaicing on sensor
// noise. Rescaled back to unit variance.
void correlate_noise(std::vector<double>& field, int size) {
  std::vector<double> tmp(field.size());
  auto idx = [size](int x, int y) {
    return static_cast<std::size_t>(std::clamp(y, 0, size - 1)) * size +
           std::clamp(x, 0, size - 1);
  };
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      tmp[idx(x, y)] = 0.25 * field[idx(x - 1, y)] + 0.5 * field[idx(x, y)] +
                       0.25 * field[idx(x + 1, y)];
    }
  }
  double var = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double v = 0.25 * tmp[idx(x, y - 1)] + 0.5 * tmp[idx(x, y)] +
                       0.25 * tmp[idx(x, y + 1)];
      field[idx(x, y)] = v;
      var += v * v;
    }
  }
  const double sd = std::sqrt(var / static_cast<double>(field.size()));
  if (sd > 0.0) {
    for (double& v : field) v /= sd;
  }
}

struct Texture {
  std::vector<double> base;
  double mean;
  double contrast;
  double tint[3];
};

// 1/f luminance pattern with a per-image mean, contrast and mild
// per-channel tint.
Texture draw_texture(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mean_dist(0.35, 0.65);
  std::uniform_real_distribution<double> contrast_dist(0.15, 0.3);
  std::uniform_real_distribution<double> tint_dist(0.9, 1.1);
  Texture t;
  t.mean = mean_dist(rng);
  t.contrast = contrast_dist(rng);
  for (double& v : t.tint) v = tint_dist(rng);
  t.base = pink_noise(size, rng());
  return t;
}

ImageBuffer compose(const Texture& t, int size,
                    const std::vector<double> (&noise)[3]) {
  ImageBuffer img(size, size, 3);
  auto data = img.data();
  for (std::size_t i = 0; i < t.base.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      data[3 * i + c] = static_cast<float>(t.mean + t.contrast * t.tint[c] * t.base[i] +
                                           noise[c][i]);
    }
  }
  img.clamp();
  return img.quantized();
}

std::vector<double> white_noise(std::size_t n, double sigma, std::mt19937_64& rng) {
  std::vector<double> out(n, 0.0);
  if (sigma <= 0.0) return out;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v = sigma * normal(rng);
  return out;
}

}  // namespace

// Camera-like: the scene texture passes through a slight optical blur, then
// picks up sensor noise that demosaicing has spatially correlated.
ImageBuffer gen_pristine(const FixtureConfig& cfg, std::uint64_t index) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(cfg.seed, index, kPristine));
  Texture t = draw_texture(cfg.size, rng);
  t.base = denoise_plane(t.base, cfg.size, cfg.size,
                         Denoiser::gaussian(kOpticalBlurSigma));
  std::vector<double> noise[3];
  for (auto& n : noise) {
    n = white_noise(t.base.size(), 1.0, rng);
    correlate_noise(n, cfg.size);
    for (double& v : n) v *= cfg.sensor_noise_sigma;
  }
  return compose(t, cfg.size, noise);
}

ImageBuffer gen_laundered(const FixtureConfig& cfg, std::uint64_t index) {
  LaunderProxyConfig proxy;
  proxy.factor = cfg.factor;
  return launder_proxy(gen_pristine(cfg, index), proxy).quantized();
}

// Generator-like: unblurred texture with a spectrally white residual.
ImageBuffer gen_fully_synthetic(const FixtureConfig& cfg, std::uint64_t index) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(cfg.seed, index, kSynthetic));
  const Texture t = draw_texture(cfg.size, rng);
  std::vector<double> noise[3];
  for (auto& n : noise) n = white_noise(t.base.size(), cfg.synth_residual_sigma, rng);
  return compose(t, cfg.size, noise);
}

ImageBuffer gen_fixture(ClassLabel label, const FixtureConfig& cfg,
                        std::uint64_t index) {
  switch (label) {
    case ClassLabel::Real:
      return gen_pristine(cfg, index);
    case ClassLabel::FullySynthetic:
      return gen_fully_synthetic(cfg, index);
    case ClassLabel::Laundered:
      return gen_laundered(cfg, index);
  }
  throw UsageError("unknown label");
}

// ---------------------------------------------------------------- postproc

PostProcOp PostProcOp::jpeg(int quality) {
  PostProcOp op;
  op.kind = Kind::Jpeg;
  op.quality = quality;
  op.validate();
  return op;
}

PostProcOp PostProcOp::resize(double scale) {
  PostProcOp op;
  op.kind = Kind::Resize;
  op.scale = scale;
  op.validate();
  return op;
}

PostProcOp PostProcOp::down_up(int factor) {
  PostProcOp op;
  op.kind = Kind::DownUp;
  op.factor = factor;
  op.validate();
  return op;
}

void PostProcOp::validate() const {
  switch (kind) {
    case Kind::Jpeg:
      if (quality < 1 || quality > 100) {
        throw UsageError("JPEG quality must be in [1,100]");
      }
      break;
    case Kind::Resize:
      if (!(scale > 0.0 && scale <= 8.0)) {
        throw UsageError("resize scale must be in (0,8]");
      }
      break;
    case Kind::DownUp:
      if (factor < 2) throw UsageError("down-up factor must be at least 2");
      break;
  }
}

PostProcOp PostProcOp::parse(std::string_view text) {
  auto suffix_after = [&](std::string_view prefix) -> std::optional<std::string_view> {
    if (text.substr(0, prefix.size()) != prefix || text.size() == prefix.size()) {
      return std::nullopt;
    }
    return text.substr(prefix.size());
  };
  auto parse_int = [&](std::string_view s) {
    int v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
      throw UsageError("invalid post-processing op \"" + std::string(text) + "\"");
    }
    return v;
  };
  if (auto s = suffix_after("jpeg")) return jpeg(parse_int(*s));
  if (auto s = suffix_after("downup")) return down_up(parse_int(*s));
  if (auto s = suffix_after("resize")) {
    std::string str(*s);
    std::size_t used = 0;
    double scale = 0.0;
    try {
      scale = std::stod(str, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != str.size() || used == 0) {
      throw UsageError("invalid post-processing op \"" + std::string(text) + "\"");
    }
    return resize(scale);
  }
  throw UsageError("unknown post-processing op \"" + std::string(text) + "\"");
}

std::string PostProcOp::name() const {
  switch (kind) {
    case Kind::Jpeg:
      return "jpeg" + std::to_string(quality);
    case Kind::Resize: {
      std::ostringstream s;
      s << "resize" << scale;
      return s.str();
    }
    case Kind::DownUp:
      return "downup" + std::to_string(factor);
  }
  return {};
}

ImageBuffer apply_postproc(const ImageBuffer& img, const PostProcOp& op) {
  op.validate();
  switch (op.kind) {
    case PostProcOp::Kind::Jpeg:
      return decode_image(encode_jpeg(img, op.quality));
    case PostProcOp::Kind::Resize: {
      const long w = std::lround(op.scale * img.width());
      const long h = std::lround(op.scale * img.height());
      if (w < 1 || h < 1) throw DataError("resize produces a zero dimension");
      ImageBuffer out = resize_bilinear(img, static_cast<int>(w), static_cast<int>(h));
      out.clamp();
      return out;
    }
    case PostProcOp::Kind::DownUp: {
      const long w = std::lround(static_cast<double>(img.width()) / op.factor);
      const long h = std::lround(static_cast<double>(img.height()) / op.factor);
      if (w < 1 || h < 1) throw DataError("down-up produces a zero dimension");
      const ImageBuffer small =
          resize_bilinear(img, static_cast<int>(w), static_cast<int>(h));
      ImageBuffer out = resize_bilinear(small, img.width(), img.height());
      out.clamp();
      return out;
    }
  }
  throw UsageError("unknown post-processing op");
}

}  // namespace launderscope
