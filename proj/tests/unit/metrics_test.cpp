#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "launderscope/degradations.hpp"
#include "launderscope/error.hpp"
#include "launderscope/metrics.hpp"
#include "test_util.hpp"

namespace ls = launderscope;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ls::ScoredItem> items(std::vector<double> pos, std::vector<double> neg) {
  std::vector<ls::ScoredItem> out;
  for (double s : pos) out.push_back({s, true, ""});
  for (double s : neg) out.push_back({s, false, ""});
  return out;
}

double brute_auc(const std::vector<ls::ScoredItem>& v) {
  double wins = 0.0;
  std::size_t p = 0, n = 0;
  for (const auto& a : v) {
    if (!a.is_positive) continue;
    ++p;
    for (const auto& b : v) {
      if (b.is_positive) continue;
      wins += a.score > b.score ? 1.0 : a.score == b.score ? 0.5 : 0.0;
    }
  }
  for (const auto& a : v) n += !a.is_positive;
  return wins / (static_cast<double>(p) * static_cast<double>(n));
}

std::vector<ls::ScoredItem> random_items(std::mt19937_64& rng, std::size_t max_n) {
  std::vector<ls::ScoredItem> v;
  const std::size_t n = 2 + rng() % (max_n - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i == 0 ? true : i == 1 ? false : (rng() % 2 == 0);
    double s = normal(rng) + (pos ? 0.7 : 0.0);
    if (rng() % 3 == 0) s = std::round(s * 4.0) / 4.0;  // deliberate ties
    v.push_back({s, pos, std::to_string(i)});
  }
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(ls::roc_auc(items({2, 3}, {0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(ls::roc_auc(items({1, 1, 1}, {1, 1})), 0.5);
  EXPECT_DOUBLE_EQ(ls::roc_auc(items({0.35, 0.8}, {0.1, 0.4})), 0.75);
}

TEST(Auc, SingleClass) {
  try {
    ls::roc_auc(items({1, 2}, {}));
    FAIL();
  } catch (const ls::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("single-class input"), std::string::npos);
  }
  EXPECT_THROW(ls::roc_auc(items({}, {1})), ls::DataError);
  EXPECT_THROW(ls::confusion_at(items({}, {1}), 0.0), ls::DataError);
  EXPECT_THROW(ls::ba_max(items({1}, {})), ls::DataError);
}

TEST(Auc, MatchesPairCounting) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto v = random_items(rng, 200);
    EXPECT_NEAR(ls::roc_auc(v), brute_auc(v), 1e-12);
  }
}

TEST(Auc, TransformInvariances) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto v = random_items(rng, 80);
    const double a = ls::roc_auc(v);
    auto t = v;
    for (auto& it : t) it.score = std::exp(it.score) * 3.0 + 1.0;
    EXPECT_NEAR(ls::roc_auc(t), a, 1e-12);
    auto neg = v;
    for (auto& it : neg) it.score = -it.score;
    EXPECT_NEAR(ls::roc_auc(neg), 1.0 - a, 1e-12);
    for (auto& it : neg) it.is_positive = !it.is_positive;
    EXPECT_NEAR(ls::roc_auc(neg), a, 1e-12);
  }
}

TEST(Confusion, Examples) {
  const auto v = items({1, -1}, {-2, 2});
  auto c = ls::confusion_at(v, 0.0);
  EXPECT_DOUBLE_EQ(c.tpr, 0.5);
  EXPECT_DOUBLE_EQ(c.fpr, 0.5);
  EXPECT_DOUBLE_EQ(c.ba, 0.5);
  c = ls::confusion_at(v, -kInf);
  EXPECT_DOUBLE_EQ(c.tpr, 1.0);
  EXPECT_DOUBLE_EQ(c.fpr, 1.0);
  EXPECT_DOUBLE_EQ(c.ba, 0.5);
  c = ls::confusion_at(v, kInf);
  EXPECT_DOUBLE_EQ(c.tpr, 0.0);
  EXPECT_DOUBLE_EQ(c.fpr, 0.0);
  EXPECT_DOUBLE_EQ(c.ba, 0.5);
  // Ties with the threshold count as positive.
  EXPECT_DOUBLE_EQ(ls::confusion_at(items({0.0}, {-1.0}), 0.0).tpr, 1.0);
}

TEST(Confusion, MonotoneInThreshold) {
  std::mt19937_64 rng(4);
  const auto v = random_items(rng, 150);
  double last_tpr = 1.0, last_fpr = 1.0;
  for (double t = -4.0; t <= 4.0; t += 0.01) {
    const auto c = ls::confusion_at(v, t);
    EXPECT_LE(c.tpr, last_tpr);
    EXPECT_LE(c.fpr, last_fpr);
    EXPECT_NEAR(c.ba, (c.tpr + 1.0 - c.fpr) / 2.0, 1e-15);
    last_tpr = c.tpr;
    last_fpr = c.fpr;
  }
}

TEST(BaMax, Examples) {
  const auto r = ls::ba_max(items({2, 3}, {0, 1}));
  EXPECT_DOUBLE_EQ(r.ba, 1.0);
  EXPECT_DOUBLE_EQ(r.threshold, 1.5);
  // Positives entirely below negatives: no threshold beats chance, and the
  // smallest achieving threshold is -inf.
  const auto none = ls::ba_max(items({0, 1}, {2, 3}));
  EXPECT_DOUBLE_EQ(none.ba, 0.5);
  EXPECT_EQ(none.threshold, -kInf);
}

TEST(BaMax, MatchesGridOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    auto v = random_items(rng, 200);
    for (auto& it : v) it.score = std::clamp(it.score, -3.0, 3.0);
    const auto best = ls::ba_max(v);
    EXPECT_GE(best.ba, 0.5);
    EXPECT_NEAR(ls::confusion_at(v, best.threshold).ba, best.ba, 1e-12);
    double grid = 0.5;
    for (int k = -3001; k <= 3001; ++k) grid = std::max(grid, ls::confusion_at(v, k * 1e-3).ba);
    // The exact sweep can only do better; the grid misses at most the optima
    // hidden between grid points closer than one step.
    EXPECT_GE(best.ba, grid - 1e-12);
    double fine = 0.5;
    for (const auto& it : v) fine = std::max(fine, ls::confusion_at(v, it.score).ba);
    EXPECT_NEAR(best.ba, fine, 1e-12);
  }
}

TEST(MetricRow, Fields) {
  const auto row = ls::metric_row(items({2, 3, -1}, {0, 1}), 0.0);
  EXPECT_NEAR(row.auc, 4.0 / 6.0, 1e-12);
  EXPECT_EQ(row.n_pos, 3u);
  EXPECT_EQ(row.n_neg, 2u);
  EXPECT_NEAR(row.tpr_at_0, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(row.fpr_at_0, 1.0, 1e-12);
  EXPECT_NEAR(row.ba_at_0, (2.0 / 3.0) / 2.0, 1e-12);
  EXPECT_GE(row.ba_max, row.ba_at_0);
}

TEST(Histogram, Basics) {
  const std::vector<double> one{0.3};
  const std::vector<std::string> cls{"a"};
  const auto h1 = ls::histogram(one, cls, 10);
  ASSERT_EQ(h1.bin_edges.size(), 2u);
  EXPECT_EQ(h1.counts.at("a"), std::vector<std::size_t>{1});
  EXPECT_THROW(ls::histogram(std::span<const double>{}, std::span<const std::string>{}, 4), ls::DataError);
  EXPECT_THROW(ls::histogram(one, cls, 0), ls::UsageError);
}

TEST(Histogram, MatchesDirectBinning) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int bins = 1 + static_cast<int>(rng() % 30);
    std::vector<double> s(1 + rng() % 300);
    std::vector<std::string> c(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = normal(rng);
      c[i] = (rng() % 3 == 0) ? "x" : "y";
    }
    const auto h = ls::histogram(s, c, bins);
    ASSERT_EQ(h.bin_edges.size(), static_cast<std::size_t>(bins) + 1);
    EXPECT_TRUE(std::is_sorted(h.bin_edges.begin(), h.bin_edges.end()));
    const double lo = *std::min_element(s.begin(), s.end());
    const double hi = *std::max_element(s.begin(), s.end());
    std::map<std::string, std::vector<std::size_t>> expect;
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto& row = expect[c[i]];
      row.resize(static_cast<std::size_t>(bins), 0);
      int b = 0;
      while (b + 1 < bins && s[i] >= h.bin_edges[static_cast<std::size_t>(b) + 1]) ++b;
      row[static_cast<std::size_t>(b)]++;
    }
    EXPECT_EQ(h.bin_edges.front(), lo);
    EXPECT_EQ(h.bin_edges.back(), hi);
    EXPECT_EQ(h.counts, expect);
  }
}

TEST(Histogram, TwoClassForm) {
  const auto h = ls::histogram(items({1, 2, 3}, {0, 0.5}), 3);
  std::size_t pos = 0, neg = 0;
  for (auto n : h.counts.at("positive")) pos += n;
  for (auto n : h.counts.at("negative")) neg += n;
  EXPECT_EQ(pos, 3u);
  EXPECT_EQ(neg, 2u);
}

TEST(Retention, SelfIsOneAndIndependentNoiseNearZero) {
  const auto a = ls::testing::random_image(64, 64, 3, 1, false);
  EXPECT_NEAR(ls::residual_retention(a, a), 1.0, 1e-12);
  int small = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = ls::testing::random_image(64, 64, 3, 1000 + 2 * i, false);
    const auto y = ls::testing::random_image(64, 64, 3, 1001 + 2 * i, false);
    small += std::abs(ls::residual_retention(x, y)) <= 0.1;
  }
  EXPECT_GE(small, 95);
}

TEST(Retention, Errors) {
  EXPECT_THROW(ls::residual_retention(ls::ImageBuffer(32, 32, 3), ls::ImageBuffer(32, 32, 3)), ls::DataError);
  EXPECT_THROW(ls::residual_retention(ls::ImageBuffer(32, 32, 3), ls::ImageBuffer(32, 16, 3)), ls::DataError);
}

TEST(Retention, LaunderingWashesOutMoreThanJpeg) {
  ls::FixtureConfig cfg;
  cfg.seed = 11;
  double laundered = 0.0, jpeg = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto img = ls::gen_pristine(cfg, i);
    laundered += ls::residual_retention(img, ls::launder_proxy(img));
    jpeg += ls::residual_retention(img, ls::apply_postproc(img, ls::PostProcOp::jpeg(80)));
  }
  EXPECT_LT(laundered, jpeg);
  EXPECT_LT(laundered / 20.0, 0.5);
}

TEST(Pearson, KnownValues) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1};
  EXPECT_NEAR(ls::pearson(a, b), 1.0, 1e-12);
  EXPECT_NEAR(ls::pearson(a, c), -1.0, 1e-12);
  EXPECT_THROW(ls::pearson(a, std::vector<double>{1, 1, 1, 1}), ls::DataError);
}

}  // namespace
