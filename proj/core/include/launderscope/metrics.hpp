#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "launderscope/image.hpp"
#include "launderscope/spectral.hpp"

namespace launderscope {

struct ScoredItem {
  double score = 0.0;
  bool is_positive = false;
  std::string id;
};

struct Confusion {
  double tpr = 0.0;
  double fpr = 0.0;
  double ba = 0.0;
};

struct BalancedAccuracyMax {
  double ba = 0.5;
  double threshold = 0.0;
};

/// One row of detection metrics, keyed like the published result tables.
struct MetricRow {
  double auc = 0.5;
  double ba_max = 0.5;
  double ba_max_threshold = 0.0;
  double ba_at_0 = 0.5;
  double tpr_at_0 = 0.0;
  double fpr_at_0 = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

struct Histogram {
  std::vector<double> bin_edges;
  /// Per class name, one count per bin.
  std::map<std::string, std::vector<std::size_t>> counts;
};

/// Mann-Whitney AUC; tied (pos, neg) pairs count one half.
/// Throws DataError("single-class input") unless both classes are present.
double roc_auc(std::span<const ScoredItem> items);

/// Rates at `threshold`; an item is called positive when score >= threshold.
Confusion confusion_at(std::span<const ScoredItem> items, double threshold);

/// Exact sweep over -inf, midpoints of consecutive distinct scores, +inf.
/// Ties in balanced accuracy resolve to the smallest threshold.
BalancedAccuracyMax ba_max(std::span<const ScoredItem> items);

MetricRow metric_row(std::span<const ScoredItem> items, double threshold = 0.0);

/// Equal-width bins over [min, max]; a zero span yields a single bin.
/// `classes[i]` names the class of `scores[i]`.
Histogram histogram(std::span<const double> scores,
                    std::span<const std::string> classes, int n_bins);
/// Two-class form with "positive" / "negative" keys.
Histogram histogram(std::span<const ScoredItem> items, int n_bins);

/// Pearson correlation of the two images' noise residuals.
double residual_retention(const ImageBuffer& a, const ImageBuffer& b,
                          const Denoiser& denoiser = {});

double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace launderscope
