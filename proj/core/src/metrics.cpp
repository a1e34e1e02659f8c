#include "launderscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "launderscope/error.hpp"

namespace launderscope {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts count_classes(std::span<const ScoredItem> items) {
  ClassCounts c;
  for (const auto& it : items) {
    if (std::isnan(it.score)) throw DataError("score is NaN for " + it.id);
    (it.is_positive ? c.pos : c.neg)++;
  }
  if (c.pos == 0 || c.neg == 0) throw DataError("single-class input");
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const ScoredItem> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].score < items[b].score;
  });
  return order;
}

}  // namespace

double roc_auc(std::span<const ScoredItem> items) {
  const auto counts = count_classes(items);
  const auto order = order_by_score(items);
  // Sum over tie groups: each positive beats all negatives strictly below it
  // and gets half credit for negatives in its own group.
  double wins = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0, group_neg = 0;
    while (j < order.size() && items[order[j]].score == items[order[i]].score) {
      (items[order[j]].is_positive ? group_pos : group_neg)++;
      ++j;
    }
    wins += static_cast<double>(group_pos) *
            (static_cast<double>(neg_below) + 0.5 * static_cast<double>(group_neg));
    neg_below += group_neg;
    i = j;
  }
  return wins / (static_cast<double>(counts.pos) * static_cast<double>(counts.neg));
}

Confusion confusion_at(std::span<const ScoredItem> items, double threshold) {
  const auto counts = count_classes(items);
  std::size_t tp = 0, fp = 0;
  for (const auto& it : items) {
    if (it.score >= threshold) (it.is_positive ? tp : fp)++;
  }
  Confusion c;
  c.tpr = static_cast<double>(tp) / static_cast<double>(counts.pos);
  c.fpr = static_cast<double>(fp) / static_cast<double>(counts.neg);
  c.ba = 0.5 * (c.tpr + 1.0 - c.fpr);
  return c;
}

BalancedAccuracyMax ba_max(std::span<const ScoredItem> items) {
  const auto counts = count_classes(items);
  const auto order = order_by_score(items);
  const auto P = static_cast<long double>(counts.pos);
  const auto N = static_cast<long double>(counts.neg);

  // Threshold -inf: everything positive, ba = 0.5. Scaled objective
  // tp*N + tn*P is compared exactly in integers.
  std::size_t tp = counts.pos, tn = 0;
  auto objective = [&] {
    return static_cast<unsigned long long>(tp) * counts.neg +
           static_cast<unsigned long long>(tn) * counts.pos;
  };
  unsigned long long best = objective();
  BalancedAccuracyMax result{0.5, -std::numeric_limits<double>::infinity()};

  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    const double s = items[order[i]].score;
    while (j < order.size() && items[order[j]].score == s) {
      if (items[order[j]].is_positive) {
        --tp;
      } else {
        ++tn;
      }
      ++j;
    }
    // Threshold just above s: midpoint to the next distinct score or +inf.
    const double thr = j < order.size()
                           ? s + 0.5 * (items[order[j]].score - s)
                           : std::numeric_limits<double>::infinity();
    const auto value = objective();
    if (value > best) {
      best = value;
      result.threshold = thr;
    }
    i = j;
  }
  result.ba = static_cast<double>(static_cast<long double>(best) / (2.0L * P * N));
  return result;
}

MetricRow metric_row(std::span<const ScoredItem> items, double threshold) {
  MetricRow row;
  const auto counts = count_classes(items);
  row.n_pos = counts.pos;
  row.n_neg = counts.neg;
  row.auc = roc_auc(items);
  const auto best = ba_max(items);
  row.ba_max = best.ba;
  row.ba_max_threshold = best.threshold;
  const auto at = confusion_at(items, threshold);
  row.ba_at_0 = at.ba;
  row.tpr_at_0 = at.tpr;
  row.fpr_at_0 = at.fpr;
  return row;
}

Histogram histogram(std::span<const double> scores,
                    std::span<const std::string> classes, int n_bins) {
  if (scores.empty()) throw DataError("histogram of empty input");
  if (scores.size() != classes.size()) {
    throw UsageError("histogram: scores and classes differ in length");
  }
  if (n_bins < 1) throw UsageError("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw DataError("histogram of non-finite scores");
  }
  Histogram h;
  const int bins = hi > lo ? n_bins : 1;
  h.bin_edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) {
    h.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
  }
  h.bin_edges.back() = hi;
  for (const auto& c : classes) h.counts.try_emplace(c, bins, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    // Bin i covers [edge_i, edge_{i+1}); the last bin is closed.
    auto it = std::upper_bound(h.bin_edges.begin(), h.bin_edges.end(), scores[i]);
    auto bin = static_cast<int>(it - h.bin_edges.begin()) - 1;
    bin = std::clamp(bin, 0, bins - 1);
    h.counts[classes[i]][bin]++;
  }
  return h;
}

Histogram histogram(std::span<const ScoredItem> items, int n_bins) {
  std::vector<double> scores;
  std::vector<std::string> classes;
  for (const auto& it : items) {
    scores.push_back(it.score);
    classes.emplace_back(it.is_positive ? "positive" : "negative");
  }
  return histogram(scores, classes, n_bins);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw DataError("correlation inputs differ in size");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw DataError("zero-variance residual");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double residual_retention(const ImageBuffer& a, const ImageBuffer& b,
                          const Denoiser& denoiser) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DataError("residual retention needs equally sized images");
  }
  const auto ra = extract_residual(a, denoiser);
  const auto rb = extract_residual(b, denoiser);
  return pearson(ra.data, rb.data);
}

}  // namespace launderscope
