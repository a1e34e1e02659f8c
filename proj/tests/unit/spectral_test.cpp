#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "launderscope/degradations.hpp"
#include "launderscope/error.hpp"
#include "launderscope/patch.hpp"
#include "launderscope/spectral.hpp"
#include "test_util.hpp"

namespace ls = launderscope;

namespace {

ls::Residual random_residual(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ls::Residual r{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
  for (double& v : r.data) v = n(rng);
  return r;
}

ls::Residual cosine_residual(int size, double period) {
  ls::Residual r{size, size, std::vector<double>(static_cast<std::size_t>(size) * size)};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      r.data[static_cast<std::size_t>(y) * size + x] = std::cos(2.0 * std::numbers::pi * x / period);
  return r;
}

ls::ImageBuffer gray_from(std::span<const double> plane, int w, int h, double scale, double offset) {
  ls::ImageBuffer img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = static_cast<float>(offset + scale * plane[static_cast<std::size_t>(y) * w + x]);
  return img;
}

ls::ImageBuffer white_patch(int size, double sigma, std::uint64_t seed) {
  const auto r = random_residual(size, size, seed);
  return gray_from(r.data, size, size, sigma, 0.5);
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

TEST(Residual, ConstantImageGivesZero) {
  const auto r = ls::extract_residual(ls::testing::constant_image(32, 24, 3, 0.4f), ls::Denoiser::median3());
  EXPECT_EQ(r.width, 32);
  EXPECT_EQ(r.height, 24);
  for (double v : r.data) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Residual, WhiteNoiseStdBand) {
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = ls::extract_residual(white_patch(64, 0.1, 1000 + trial), ls::Denoiser::median3());
    double ss = 0.0;
    for (double v : r.data) ss += v * v;
    const double sd = std::sqrt(ss / static_cast<double>(r.data.size()));
    EXPECT_GE(sd, 0.05);
    EXPECT_LE(sd, 0.11);
  }
}

TEST(Residual, MeanIsRemoved) {
  const auto r = ls::extract_residual(ls::testing::random_image(40, 40, 3, 3), ls::Denoiser::median3());
  EXPECT_LE(std::abs(mean_of(r.data)), 1e-3);
}

TEST(Residual, StepEdge) {
  ls::ImageBuffer img(48, 32, 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 48; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = x < 20 ? 0.2f : 0.8f;

  // The median preserves a straight edge exactly.
  for (double v : ls::extract_residual(img, ls::Denoiser::median3()).data) EXPECT_NEAR(v, 0.0, 1e-12);

  // A narrow Gaussian leaves energy only next to the edge; compare with the
  // residual computed directly from the column profile.
  const auto r = ls::extract_residual(img, ls::Denoiser::gaussian(0.5));
  double total = 0.0, near = 0.0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 48; ++x) {
      const double e = r.at(x, y) * r.at(x, y);
      total += e;
      if (x >= 18 && x <= 21) near += e;
    }
  }
  ASSERT_GT(total, 0.0);
  EXPECT_GE(near / total, 0.99);
}

TEST(Residual, TooSmall) {
  EXPECT_THROW(ls::extract_residual(ls::ImageBuffer(7, 30, 3), ls::Denoiser::median3()), ls::DataError);
  EXPECT_THROW(ls::extract_residual(ls::ImageBuffer(30, 30, 3), ls::Denoiser::gaussian(0.0)),
               ls::UsageError);
}

TEST(Spectrum, ImpulseIsFlat) {
  for (auto [w, h, px, py] : {std::array{16, 16, 0, 0}, {24, 12, 7, 5}, {9, 8, 8, 3}}) {
    ls::Residual r{w, h, std::vector<double>(static_cast<std::size_t>(w) * h, 0.0)};
    r.data[static_cast<std::size_t>(py) * w + px] = 1.0;
    const auto s = ls::magnitude_spectrum(r);
    EXPECT_EQ(s.count, 1u);
    const auto [lo, hi] = std::minmax_element(s.mag.begin(), s.mag.end());
    EXPECT_NEAR(*lo, 1.0, 1e-12);
    EXPECT_LE(*hi / *lo, 1.0 + 1e-9);
  }
}

TEST(Spectrum, CosinePeaksAtPlusMinus32) {
  const auto s = ls::magnitude_spectrum(cosine_residual(256, 8.0));
  std::vector<std::size_t> order(s.mag.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + 3, order.end(),
                    [&](auto a, auto b) { return s.mag[a] > s.mag[b]; });
  const auto xy = [&](std::size_t i) { return std::pair<int, int>(static_cast<int>(i % 256), static_cast<int>(i / 256)); };
  const std::set<std::pair<int, int>> top{xy(order[0]), xy(order[1])};
  EXPECT_EQ(top, (std::set<std::pair<int, int>>{{128 - 32, 128}, {128 + 32, 128}}));
  EXPECT_NEAR(s.mag[order[0]], 256.0 * 256.0 / 2.0, 1e-6);
  EXPECT_LT(s.mag[order[2]], 1e-6);
}

TEST(Spectrum, MatchesBruteForceDft) {
  const int w = 12, h = 10;
  const auto r = random_residual(w, h, 42);
  const auto s = ls::magnitude_spectrum(r);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      std::complex<double> acc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          acc += r.at(x, y) * std::polar(1.0, -2.0 * std::numbers::pi * (double(u * x) / w + double(v * y) / h));
      const int sx = (u + w / 2) % w, sy = (v + h / 2) % h;
      EXPECT_NEAR(s.at(sx, sy), std::abs(acc), 1e-9);
    }
  }
}

TEST(Spectrum, ParsevalSymmetryShift) {
  for (auto [w, h] : {std::pair{96, 96}, {64, 48}, {33, 17}}) {
    const auto r = random_residual(w, h, static_cast<std::uint64_t>(w * h));
    const auto s = ls::magnitude_spectrum(r);
    double e_space = 0.0, e_freq = 0.0;
    for (double v : r.data) e_space += v * v;
    for (double m : s.mag) e_freq += m * m;
    EXPECT_NEAR(e_freq / (w * h), e_space, 1e-6 * e_space);

    // Point symmetry about DC for indices whose mirror exists in the array.
    const int cx = s.center_x(), cy = s.center_y();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int mx = ((2 * cx - x) % w + w) % w, my = ((2 * cy - y) % h + h) % h;
        EXPECT_NEAR(s.at(x, y), s.at(mx, my), 1e-9 * std::max(1.0, s.at(x, y)));
      }
    }

    ls::Residual shifted{w, h, std::vector<double>(r.data.size())};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        shifted.data[static_cast<std::size_t>((y + 5) % h) * w + (x + 3) % w] = r.at(x, y);
    const auto s2 = ls::magnitude_spectrum(shifted);
    for (std::size_t i = 0; i < s.mag.size(); ++i) EXPECT_NEAR(s.mag[i], s2.mag[i], 1e-9 * std::max(1.0, s.mag[i]));
  }
}

TEST(AverageSpectrum, Basics) {
  const auto a = random_residual(32, 32, 1);
  const auto single = ls::magnitude_spectrum(a);
  const std::vector<ls::Residual> one{a}, two{a, a};
  EXPECT_EQ(ls::average_spectrum(one).mag, single.mag);
  const auto avg2 = ls::average_spectrum(two);
  EXPECT_EQ(avg2.count, 2u);
  for (std::size_t i = 0; i < single.mag.size(); ++i) EXPECT_NEAR(avg2.mag[i], single.mag[i], 1e-12);
  EXPECT_THROW(ls::average_spectrum(std::vector<ls::Residual>{}), ls::DataError);
  EXPECT_THROW(ls::average_spectrum(std::vector<ls::Residual>{a, random_residual(32, 16, 2)}), ls::DataError);
}

TEST(AverageSpectrum, LinearInSubsets) {
  std::vector<ls::Residual> all, A, B;
  for (int i = 0; i < 7; ++i) {
    all.push_back(random_residual(24, 24, 100 + i));
    (i < 3 ? A : B).push_back(all.back());
  }
  const auto avg_all = ls::average_spectrum(all);
  const auto avg_a = ls::average_spectrum(A), avg_b = ls::average_spectrum(B);
  for (std::size_t i = 0; i < avg_all.mag.size(); ++i) {
    EXPECT_NEAR(avg_all.mag[i], (3 * avg_a.mag[i] + 4 * avg_b.mag[i]) / 7.0, 1e-9);
  }
  ls::SpectrumAccumulator acc;
  acc.add(avg_a);
  acc.add(avg_b);
  EXPECT_EQ(acc.count(), 7u);
  for (std::size_t i = 0; i < avg_all.mag.size(); ++i) EXPECT_NEAR(acc.mean().mag[i], avg_all.mag[i], 1e-9);
}

TEST(DetectPeaks, FlatSpectrumNearOne) {
  ls::Residual r{96, 96, std::vector<double>(96 * 96, 0.0)};
  r.data[1234] = 1.0;
  const auto report = ls::detect_peaks(ls::magnitude_spectrum(r), 8);
  EXPECT_NEAR(report.peak_strength, 1.0, 0.05);
  EXPECT_EQ(report.peaks.size(), 80u);  // 9x9 lattice minus DC
}

TEST(DetectPeaks, CosineDominatedByFirstSites) {
  const auto report = ls::detect_peaks(ls::magnitude_spectrum(cosine_residual(256, 8.0)), 8);
  double best = 0.0, rest = 0.0;
  for (const auto& p : report.peaks) {
    const double ratio = p.peak_value / std::max(p.background, 1e-12);
    if (p.l == 0 && std::abs(p.k) == 1) {
      best += ratio;
    } else {
      rest += ratio;
    }
  }
  EXPECT_GT(report.peak_strength, 1e6);
  EXPECT_GT(best, 100.0 * rest);
}

TEST(DetectPeaks, ScaleInvariantAndErrors) {
  auto s = ls::magnitude_spectrum(random_residual(64, 64, 9));
  const double base = ls::detect_peaks(s, 8).peak_strength;
  for (double& m : s.mag) m *= 37.5;
  EXPECT_NEAR(ls::detect_peaks(s, 8).peak_strength, base, 1e-9 * base);
  try {
    ls::detect_peaks(ls::magnitude_spectrum(random_residual(60, 64, 1)), 8);
    FAIL();
  } catch (const ls::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dimensions not divisible by factor"), std::string::npos);
  }
  EXPECT_THROW(ls::detect_peaks(s, 1), ls::UsageError);
}

TEST(Features, ConstantPatchIsDegenerate) {
  const auto f = ls::spectral_features(ls::testing::constant_image(96, 96, 3, 0.3f), {});
  EXPECT_EQ(f.peak_strength, 1.0);
  EXPECT_EQ(f.low_freq_ratio, 0.0);
  EXPECT_EQ(f.flatness, 0.0);
}

TEST(Features, RangesAndScaleInvariance) {
  for (int i = 0; i < 20; ++i) {
    const auto r = random_residual(48, 48, 300 + i);
    auto s = ls::magnitude_spectrum(r);
    const double lfr = ls::low_freq_ratio(s), flat = ls::spectral_flatness(s);
    EXPECT_GE(lfr, 0.0);
    EXPECT_LE(lfr, 1.0);
    EXPECT_GE(flat, 0.0);
    EXPECT_LE(flat, 1.0);
    for (double& m : s.mag) m *= 0.01;
    EXPECT_NEAR(ls::low_freq_ratio(s), lfr, 1e-12);
    EXPECT_NEAR(ls::spectral_flatness(s), flat, 1e-12);
  }
}

TEST(Features, FlatnessAndLowFreqByDirectSum) {
  const auto s = ls::magnitude_spectrum(random_residual(16, 16, 5));
  double log_sum = 0.0, sum = 0.0, low = 0.0, total = 0.0;
  int n = 0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (x == 8 && y == 8) continue;
      const double m = s.at(x, y);
      log_sum += std::log(m);
      sum += m;
      total += m * m;
      if ((x - 8) * (x - 8) + (y - 8) * (y - 8) <= 4) low += m * m;
      ++n;
    }
  }
  EXPECT_NEAR(ls::spectral_flatness(s), std::exp(log_sum / n) / (sum / n), 1e-12);
  EXPECT_NEAR(ls::low_freq_ratio(s), low / total, 1e-12);
}

TEST(Features, WhiteVersusPink) {
  int pink_wins = 0;
  for (int i = 0; i < 100; ++i) {
    const auto white = ls::spectral_features(white_patch(96, 0.05, 500 + i), {});
    EXPECT_GE(white.flatness, 0.5);
    const auto pink_plane = ls::pink_noise(96, 900 + i);
    const auto pink = ls::spectral_features(gray_from(pink_plane, 96, 96, 0.05, 0.5), {});
    if (pink.low_freq_ratio > white.low_freq_ratio) ++pink_wins;
  }
  EXPECT_EQ(pink_wins, 100);
}

TEST(Features, LaunderedPatchesShowMorePeaks) {
  ls::FixtureConfig cfg;
  cfg.seed = 77;
  int wins = 0, pairs = 0;
  for (int i = 0; i < 25; ++i) {
    const auto pristine = ls::gen_pristine(cfg, i);
    const auto laundered = ls::gen_laundered(cfg, i);
    for (const auto& o : ls::sample_origins(256, 256, {4, 96, static_cast<std::uint64_t>(i)})) {
      const auto a = ls::spectral_features(pristine.crop(o.x, o.y, 96, 96), {});
      const auto b = ls::spectral_features(laundered.crop(o.x, o.y, 96, 96), {});
      wins += b.peak_strength > a.peak_strength;
      ++pairs;
    }
  }
  EXPECT_GE(wins, pairs * 9 / 10) << wins << "/" << pairs;
}

TEST(Render, NormalizedLogMagnitude) {
  const auto s = ls::magnitude_spectrum(cosine_residual(32, 8.0));
  const auto img = ls::render_spectrum(s);
  EXPECT_EQ(img.channels(), 1);
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  EXPECT_FLOAT_EQ(*lo, 0.0f);
  EXPECT_FLOAT_EQ(*hi, 1.0f);
}

TEST(Denoiser, MedianMatchesSortedWindow) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 3 + static_cast<int>(rng() % 20), h = 3 + static_cast<int>(rng() % 20);
    std::vector<double> plane(static_cast<std::size_t>(w) * h);
    for (double& v : plane) v = static_cast<double>(rng() % 6) / 5.0;
    const auto out = ls::denoise_plane(plane, w, h, ls::Denoiser::median3());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::vector<double> win;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            win.push_back(plane[static_cast<std::size_t>(std::clamp(y + dy, 0, h - 1)) * w + std::clamp(x + dx, 0, w - 1)]);
        std::sort(win.begin(), win.end());
        EXPECT_EQ(out[static_cast<std::size_t>(y) * w + x], win[4]);
      }
    }
  }
}

}  // namespace
