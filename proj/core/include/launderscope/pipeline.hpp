#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "launderscope/degradations.hpp"
#include "launderscope/manifest.hpp"
#include "launderscope/metrics.hpp"
#include "launderscope/patch.hpp"
#include "launderscope/scorer.hpp"

namespace launderscope {

/// Everything needed to run the two-stage classifier on one image.
struct PipelineConfig {
  SamplerConfig sampler;
  AggregationConfig aggregation;
  ScorerSpec stage1;
  ScorerSpec stage2;
  double stage1_threshold = 0.0;
  double stage2_threshold = 0.0;
  /// Draw a second, independent patch set for stage 2 instead of reusing
  /// the stage-1 patches.
  bool resample_stage2 = false;
  /// Resolved paths of the images the built-in models were calibrated on.
  std::vector<std::string> training_paths;

  void validate() const;
};

struct ClassificationResult {
  ClassLabel label = ClassLabel::Real;
  double s1 = 0.0;
  std::optional<double> s2;
};

/// Stage 1 separates real from synthetic; only images at or above
/// `stage1_threshold` reach stage 2, which separates laundered (>= its
/// threshold) from fully synthetic.
ClassificationResult classify_image(const ImageBuffer& img,
                                    const PipelineConfig& cfg,
                                    PatchScorer& stage1, PatchScorer& stage2);
ClassificationResult classify_image(const ImageBuffer& img,
                                    const PipelineConfig& cfg);

/// Patches stage 2 consumes for `img`: the stage-1 set unless
/// `cfg.resample_stage2` is set.
SamplerConfig stage2_sampler(const PipelineConfig& cfg);

void save_pipeline(const PipelineConfig& cfg, const std::filesystem::path& dir);
PipelineConfig load_pipeline(const std::filesystem::path& dir);

// ------------------------------------------------------------ calibration

struct CalibrationOptions {
  FeatureConfig features;
  /// Patches drawn per training image.
  int patches_per_image = 64;
  std::uint64_t seed = 0;
  /// Fit stage 1 on real vs fully synthetic only, leaving laundered images
  /// unseen (the "detector never saw laundering" experiment).
  bool stage1_excludes_laundered = false;
  int workers = 1;
};

struct CalibrationResult {
  PipelineConfig config;
  std::vector<std::string> warnings;
};

CalibrationResult calibrate_pipeline(const DatasetManifest& train,
                                     const PipelineConfig& skeleton,
                                     const CalibrationOptions& options);

/// Paths present in both lists, in order of first appearance in `a`.
std::vector<std::string> shared_paths(const std::vector<std::string>& a,
                                      const std::vector<std::string>& b);

std::vector<std::string> resolved_paths(const DatasetManifest& manifest);

// ------------------------------------------------------------ evaluation

struct EvalOptions {
  int workers = 1;
  bool skip_errors = false;
  int histogram_bins = 20;
  bool include_timing = false;
};

struct ItemResult {
  std::string path;
  ClassLabel label = ClassLabel::Real;
  std::string group;
  double s1 = 0.0;
  std::optional<double> s2;
  ClassLabel predicted = ClassLabel::Real;
};

struct GroupRows {
  std::optional<MetricRow> stage1;
  std::optional<MetricRow> stage2;
};

/// Metrics for one post-processing condition ("none" for the clean run).
struct ConditionReport {
  std::string name;
  std::optional<MetricRow> stage1;
  std::optional<MetricRow> stage2;
  /// Rows are ground truth, columns predictions, both in kAllLabels order.
  std::array<std::array<std::size_t, 3>, 3> confusion{};
  std::optional<double> three_class_ba;
  std::optional<Histogram> stage1_histogram;
  std::optional<Histogram> stage2_histogram;
  std::map<std::string, GroupRows> groups;
  std::vector<std::string> warnings;
  std::vector<ItemResult> items;
};

struct SkippedItem {
  std::string path;
  std::string reason;
};

struct EvalReport {
  PipelineConfig config;
  std::vector<PostProcOp> postproc;
  std::size_t n_items = 0;
  std::vector<ConditionReport> conditions;
  std::vector<SkippedItem> skipped;
  std::vector<std::string> warnings;
  std::size_t stage1_invocations = 0;
  std::size_t stage2_invocations = 0;
  std::optional<double> runtime_seconds;
};

/// Per-item randomness derives from (cfg.sampler.seed, manifest index) so
/// the report does not depend on the worker count.
EvalReport run_eval(const DatasetManifest& manifest, const PipelineConfig& cfg,
                    const std::vector<PostProcOp>& postproc,
                    const EvalOptions& options = {});

/// Derives the sampler used for manifest item `index`.
SamplerConfig item_sampler(const SamplerConfig& base, std::size_t index);

/// Stable JSON rendering of an evaluation report.
std::string report_to_json(const EvalReport& report);
std::string classification_to_json(const ClassificationResult& result);

}  // namespace launderscope
