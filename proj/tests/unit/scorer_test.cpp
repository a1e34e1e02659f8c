#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "launderscope/degradations.hpp"
#include "launderscope/error.hpp"
#include "launderscope/metrics.hpp"
#include "launderscope/patch.hpp"
#include "launderscope/scorer.hpp"
#include "test_util.hpp"

namespace ls = launderscope;

namespace {

std::vector<ls::SpectralFeatures> gaussian_features(std::mt19937_64& rng, std::size_t n,
                                                    std::array<double, 3> mean,
                                                    std::array<double, 3> sd) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<ls::SpectralFeatures> out(n);
  for (auto& f : out) {
    f.peak_strength = mean[0] + sd[0] * z(rng);
    f.low_freq_ratio = mean[1] + sd[1] * z(rng);
    f.flatness = mean[2] + sd[2] * z(rng);
  }
  return out;
}

double mean_score(const ls::ScorerModel& m, const std::vector<ls::SpectralFeatures>& xs) {
  double s = 0.0;
  for (const auto& f : xs) s += m.score_features(f);
  return s / static_cast<double>(xs.size());
}

std::vector<ls::Patch> fixture_patches(ls::ClassLabel label, std::uint64_t seed, int images, int per_image) {
  ls::FixtureConfig cfg;
  cfg.seed = seed;
  std::vector<ls::Patch> out;
  for (int i = 0; i < images; ++i) {
    const auto img = ls::gen_fixture(label, cfg, i);
    for (auto& p : ls::sample_patches(img, {per_image, 96, seed + i})) out.push_back(std::move(p));
  }
  return out;
}

TEST(ScorePatch, ConstantModel) {
  ls::ScorerModel m;
  m.bias = -1.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    EXPECT_EQ(ls::score_patch(m, ls::testing::random_image(96, 96, 3, s)), -1.0);
  }
}

TEST(ScorePatch, PeakThresholdModelOnLaunderedPatches) {
  ls::ScorerModel m;
  m.weights = {1.0, 0.0, 0.0};
  m.bias = -3.0;
  int checked = 0;
  for (const auto& p : fixture_patches(ls::ClassLabel::Laundered, 21, 4, 8)) {
    const auto f = ls::spectral_features(p, m.feature_cfg);
    if (f.peak_strength < 3.0) continue;
    EXPECT_GE(ls::score_patch(m, p), 0.0);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(ScorePatch, DeterministicAndContinuous) {
  ls::ScorerModel m;
  m.weights = {0.5, -2.0, 3.0};
  m.bias = 0.1;
  std::mt19937_64 rng(3);
  std::normal_distribution<float> z(0.0f, 1.0f);
  for (const auto& p : fixture_patches(ls::ClassLabel::Real, 4, 2, 5)) {
    const double base = ls::score_patch(m, p);
    EXPECT_EQ(ls::score_patch(m, p), base);
    for (float eps : {1e-3f, 1e-4f, 1e-5f}) {
      auto q = p.pixels;
      for (float& v : q.data()) v += eps * z(rng);
      EXPECT_LE(std::abs(ls::score_patch(m, q) - base), 1e3 * eps);
    }
  }
}

TEST(Calibrate, SeparableAlongPeakStrength) {
  std::mt19937_64 rng(1);
  auto pos = gaussian_features(rng, 200, {4.0, 0.2, 0.7}, {0.3, 0.0, 0.0});
  auto neg = gaussian_features(rng, 200, {1.0, 0.2, 0.7}, {0.3, 0.0, 0.0});
  const auto m = ls::calibrate_features(pos, neg, {}, ls::ClassLabel::Laundered);
  EXPECT_GT(m.weights[0], 0.0);
  EXPECT_GT(std::abs(m.weights[0]), 1e3 * (std::abs(m.weights[1]) + std::abs(m.weights[2])));
  EXPECT_GT(mean_score(m, pos), 0.0);
  EXPECT_LT(mean_score(m, neg), 0.0);
  EXPECT_EQ(m.positive_class, ls::ClassLabel::Laundered);
}

TEST(Calibrate, IdenticalDistributionsCarryNoSignal) {
  std::mt19937_64 rng(2);
  auto pos = gaussian_features(rng, 2000, {2.0, 0.3, 0.6}, {0.5, 0.05, 0.05});
  auto neg = gaussian_features(rng, 2000, {2.0, 0.3, 0.6}, {0.5, 0.05, 0.05});
  const auto m = ls::calibrate_features(pos, neg, {}, ls::ClassLabel::Laundered);
  std::vector<ls::ScoredItem> items;
  for (const auto& f : pos) items.push_back({m.score_features(f), true, ""});
  for (const auto& f : neg) items.push_back({m.score_features(f), false, ""});
  double spread = 0.0;
  for (const auto& it : items) spread += it.score * it.score;
  spread = std::sqrt(spread / static_cast<double>(items.size()));
  EXPECT_LT(std::abs(mean_score(m, pos)), 0.2 * spread);
  EXPECT_LT(std::abs(mean_score(m, neg)), 0.2 * spread);
  EXPECT_NEAR(ls::roc_auc(items), 0.5, 0.05);
}

TEST(Calibrate, SignConventionOnRandomSets) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::array<double, 3> a{2 + u(rng), 0.3 + 0.1 * u(rng), 0.7 + 0.1 * u(rng)};
    const std::array<double, 3> b{a[0] + u(rng), a[1] + 0.05 * u(rng), a[2] + 0.05 * u(rng)};
    auto pos = gaussian_features(rng, 50, a, {0.4, 0.05, 0.03});
    auto neg = gaussian_features(rng, 60, b, {0.4, 0.05, 0.03});
    const auto m = ls::calibrate_features(pos, neg, {}, ls::ClassLabel::FullySynthetic);
    EXPECT_GT(mean_score(m, pos), 0.0);
    EXPECT_LT(mean_score(m, neg), 0.0);
    // The midpoint of the projected class means sits at zero.
    EXPECT_NEAR(mean_score(m, pos) + mean_score(m, neg), 0.0, 1e-9 * (1 + std::abs(mean_score(m, pos))));

    auto scale = [](std::vector<ls::SpectralFeatures> xs, double c) {
      for (auto& f : xs) {
        f.peak_strength *= c;
        f.low_freq_ratio *= c;
        f.flatness *= c;
      }
      return xs;
    };
    const double c = 0.5 + 3.0 * (u(rng) + 1.0);
    const auto pos_c = scale(pos, c), neg_c = scale(neg, c);
    const auto mc = ls::calibrate_features(pos_c, neg_c, {}, ls::ClassLabel::FullySynthetic);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const double s = m.score_features(pos[i]);
      if (std::abs(s) > 1e-9) {
        EXPECT_EQ(s > 0, mc.score_features(pos_c[i]) > 0);
      }
    }
  }
}

TEST(Calibrate, Errors) {
  std::mt19937_64 rng(6);
  auto nine = gaussian_features(rng, 9, {1, 0, 0}, {1, 1, 1});
  auto ten = gaussian_features(rng, 10, {1, 0, 0}, {1, 1, 1});
  EXPECT_THROW(ls::calibrate_features(nine, ten, {}, ls::ClassLabel::Laundered), ls::DataError);
  EXPECT_THROW(ls::calibrate_features(ten, nine, {}, ls::ClassLabel::Laundered), ls::DataError);
  const std::vector<ls::SpectralFeatures> flat(20, ls::SpectralFeatures{1.0, 0.0, 0.0});
  try {
    ls::calibrate_features(flat, flat, {}, ls::ClassLabel::Laundered);
    FAIL();
  } catch (const ls::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate calibration set"), std::string::npos);
  }
}

TEST(Calibrate, FixturePatchesGeneralize) {
  const auto model = ls::calibrate(fixture_patches(ls::ClassLabel::Laundered, 100, 10, 20),
                                   fixture_patches(ls::ClassLabel::Real, 100, 10, 20), {});
  std::vector<ls::ScoredItem> items;
  for (const auto& p : fixture_patches(ls::ClassLabel::Laundered, 200, 10, 20)) {
    items.push_back({ls::score_patch(model, p), true, ""});
  }
  for (const auto& p : fixture_patches(ls::ClassLabel::Real, 200, 10, 20)) {
    items.push_back({ls::score_patch(model, p), false, ""});
  }
  EXPECT_GE(ls::roc_auc(items), 0.9);
}

TEST(ModelJson, RoundTrip) {
  ls::ScorerModel m;
  m.weights = {1.25, -3.5, 0.1};
  m.bias = -0.3333333333333333;
  m.positive_class = ls::ClassLabel::FullySynthetic;
  m.feature_cfg.denoiser = ls::Denoiser::gaussian(1.5);
  m.feature_cfg.factor = 4;
  const auto back = ls::model_from_json(ls::model_to_json(m));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.positive_class, m.positive_class);
  EXPECT_EQ(back.feature_cfg, m.feature_cfg);

  ls::testing::TempDir dir;
  ls::save_model(m, dir / "m.json");
  EXPECT_EQ(ls::load_model(dir / "m.json").weights, m.weights);
}

TEST(ModelJson, Malformed) {
  EXPECT_THROW(ls::model_from_json("{"), ls::DataError);
  EXPECT_THROW(ls::model_from_json(R"({"weights":[1,2],"bias":0})"), ls::DataError);
  EXPECT_THROW(ls::model_from_json(R"({"weights":[1,2,3],"bias":0,"positive_class":"cat","denoiser":{"kind":"median3"},"factor":8})"),
               ls::DataError);
  EXPECT_THROW(ls::load_model("/nonexistent/model.json"), ls::DataError);
}

}  // namespace
