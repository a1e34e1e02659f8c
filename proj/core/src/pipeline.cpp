#include "launderscope/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "json_io.hpp"
#include "parallel.hpp"

namespace launderscope {

namespace {

std::size_t label_index(ClassLabel l) { return static_cast<std::size_t>(l); }

void check_scorer_spec(const ScorerSpec& spec, const char* stage) {
  if (const auto* ext = std::get_if<ExternalScorerConfig>(&spec)) {
    if (ext->command.empty()) {
      throw UsageError(std::string(stage) + ": external scorer command is empty");
    }
    if (ext->timeout.count() <= 0) {
      throw UsageError(std::string(stage) + ": scorer timeout must be positive");
    }
  }
}

// Patches of one image plus their spectral features, computed at most once
// per feature configuration so both built-in stages can share them.
class PatchSet {
 public:
  explicit PatchSet(std::vector<Patch> patches) : patches_(std::move(patches)) {}

  const std::vector<Patch>& patches() const noexcept { return patches_; }

  const std::vector<SpectralFeatures>& features(const FeatureConfig& cfg) {
    if (!features_ || cfg_ != cfg) {
      std::vector<SpectralFeatures> f;
      f.reserve(patches_.size());
      for (const auto& p : patches_) f.push_back(spectral_features(p, cfg));
      features_ = std::move(f);
      cfg_ = cfg;
    }
    return *features_;
  }

 private:
  std::vector<Patch> patches_;
  std::optional<std::vector<SpectralFeatures>> features_;
  FeatureConfig cfg_;
};

double aggregate(PatchSet& set, PatchScorer& scorer, const AggregationConfig& aggregation) {
  std::vector<double> scores;
  scores.reserve(set.patches().size());
  if (auto* builtin = dynamic_cast<BuiltinScorer*>(&scorer)) {
    for (const auto& f : set.features(builtin->model().feature_cfg)) {
      scores.push_back(builtin->score(f));
    }
  } else {
    for (const auto& p : set.patches()) scores.push_back(scorer.score(p));
  }
  return aggregate_top_fraction(scores, aggregation);
}

double aggregate(std::vector<Patch> patches, PatchScorer& scorer,
                 const AggregationConfig& aggregation) {
  PatchSet set(std::move(patches));
  return aggregate(set, scorer, aggregation);
}

// Rethrows with the stage prefixed to the message, keeping the error kind.
template <class Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage) + ": " + e.what());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  sampler.validate();
  aggregation.validate();
  if (!std::isfinite(stage1_threshold) || !std::isfinite(stage2_threshold)) {
    throw UsageError("stage thresholds must be finite");
  }
  check_scorer_spec(stage1, "stage1");
  check_scorer_spec(stage2, "stage2");
}

SamplerConfig stage2_sampler(const PipelineConfig& cfg) {
  SamplerConfig s = cfg.sampler;
  if (cfg.resample_stage2) s.seed = mix_seed(cfg.sampler.seed, 0, 2);
  return s;
}

SamplerConfig item_sampler(const SamplerConfig& base, std::size_t index) {
  SamplerConfig s = base;
  s.seed = mix_seed(base.seed, index, 0);
  return s;
}

ClassificationResult classify_image(const ImageBuffer& img,
                                    const PipelineConfig& cfg,
                                    PatchScorer& stage1, PatchScorer& stage2) {
  cfg.validate();
  PatchSet patches(in_stage("stage1", [&] { return sample_patches(img, cfg.sampler); }));
  ClassificationResult result;
  result.s1 = in_stage("stage1", [&] { return aggregate(patches, stage1, cfg.aggregation); });
  if (result.s1 < cfg.stage1_threshold) {
    result.label = ClassLabel::Real;
    return result;
  }
  result.s2 = in_stage("stage2", [&] {
    if (!cfg.resample_stage2) return aggregate(patches, stage2, cfg.aggregation);
    return aggregate(sample_patches(img, stage2_sampler(cfg)), stage2, cfg.aggregation);
  });
  result.label = *result.s2 >= cfg.stage2_threshold ? ClassLabel::Laundered
                                                    : ClassLabel::FullySynthetic;
  return result;
}

ClassificationResult classify_image(const ImageBuffer& img,
                                    const PipelineConfig& cfg) {
  cfg.validate();
  auto s1 = make_scorer(cfg.stage1);
  auto s2 = make_scorer(cfg.stage2);
  return classify_image(img, cfg, *s1, *s2);
}

// ------------------------------------------------------------ persistence

namespace {

using detail::Json;

Json scorer_spec_json(const ScorerSpec& spec, const std::string& model_file) {
  if (std::holds_alternative<ScorerModel>(spec)) return Json{{"model", model_file}};
  const auto& ext = std::get<ExternalScorerConfig>(spec);
  return Json{{"external", {{"command", ext.command}, {"timeout_ms", ext.timeout.count()}}}};
}

ScorerSpec scorer_spec_from(const Json& j, const std::filesystem::path& dir) {
  if (j.contains("model")) {
    std::filesystem::path p = j.at("model").get<std::string>();
    if (p.is_relative()) p = dir / p;
    return load_model(p);
  }
  if (j.contains("external")) {
    const auto& e = j.at("external");
    ExternalScorerConfig cfg;
    cfg.command = e.at("command").get<std::vector<std::string>>();
    if (e.contains("timeout_ms")) {
      cfg.timeout = std::chrono::milliseconds(e.at("timeout_ms").get<long long>());
    }
    return cfg;
  }
  throw DataError("scorer spec needs \"model\" or \"external\"");
}

}  // namespace

void save_pipeline(const PipelineConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
  if (const auto* m = std::get_if<ScorerModel>(&cfg.stage1)) save_model(*m, dir / "stage1.json");
  if (const auto* m = std::get_if<ScorerModel>(&cfg.stage2)) save_model(*m, dir / "stage2.json");
  Json j;
  j["format"] = "launderscope.pipeline/1";
  j["sampler"] = {{"n_patches", cfg.sampler.n_patches},
                  {"patch_size", cfg.sampler.patch_size},
                  {"seed", cfg.sampler.seed}};
  j["aggregation"] = {{"top_fraction", cfg.aggregation.top_fraction}};
  j["stage1"] = scorer_spec_json(cfg.stage1, "stage1.json");
  j["stage2"] = scorer_spec_json(cfg.stage2, "stage2.json");
  j["stage1_threshold"] = cfg.stage1_threshold;
  j["stage2_threshold"] = cfg.stage2_threshold;
  j["resample_stage2"] = cfg.resample_stage2;
  j["training_paths"] = cfg.training_paths;
  std::ofstream out(dir / "pipeline.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "pipeline.json").string());
  out << j.dump(2) << "\n";
}

PipelineConfig load_pipeline(const std::filesystem::path& dir) {
  const auto path = dir / "pipeline.json";
  std::ifstream in(path);
  if (!in) throw DataError("file not found: " + path.string());
  PipelineConfig cfg;
  try {
    const Json j = Json::parse(std::string{std::istreambuf_iterator<char>(in),
                                           std::istreambuf_iterator<char>()});
    const auto& s = j.at("sampler");
    cfg.sampler.n_patches = s.at("n_patches").get<int>();
    cfg.sampler.patch_size = s.at("patch_size").get<int>();
    cfg.sampler.seed = s.at("seed").get<std::uint64_t>();
    cfg.aggregation.top_fraction = j.at("aggregation").at("top_fraction").get<double>();
    cfg.stage1 = scorer_spec_from(j.at("stage1"), dir);
    cfg.stage2 = scorer_spec_from(j.at("stage2"), dir);
    cfg.stage1_threshold = j.value("stage1_threshold", 0.0);
    cfg.stage2_threshold = j.value("stage2_threshold", 0.0);
    cfg.resample_stage2 = j.value("resample_stage2", false);
    if (j.contains("training_paths")) {
      cfg.training_paths = j.at("training_paths").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed " + path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

// ------------------------------------------------------------ calibration

std::vector<std::string> resolved_paths(const DatasetManifest& manifest) {
  std::vector<std::string> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    std::error_code ec;
    auto p = std::filesystem::weakly_canonical(manifest.resolve(e), ec);
    out.push_back(ec ? manifest.resolve(e).lexically_normal().string() : p.string());
  }
  return out;
}

std::vector<std::string> shared_paths(const std::vector<std::string>& a,
                                      const std::vector<std::string>& b) {
  const std::set<std::string> in_b(b.begin(), b.end());
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : a) {
    if (in_b.count(p) && seen.insert(p).second) out.push_back(p);
  }
  return out;
}

CalibrationResult calibrate_pipeline(const DatasetManifest& train,
                                     const PipelineConfig& skeleton,
                                     const CalibrationOptions& options) {
  if (options.patches_per_image < 1) {
    throw UsageError("patches per image must be at least 1");
  }
  for (ClassLabel l : kAllLabels) {
    const bool present = std::any_of(train.entries.begin(), train.entries.end(),
                                     [&](const ManifestEntry& e) { return e.label == l; });
    if (!present) {
      throw DataError("training manifest is missing class \"" +
                      std::string(to_string(l)) + "\"");
    }
  }

  const std::size_t n = train.entries.size();
  std::vector<std::vector<SpectralFeatures>> per_image(n);
  SamplerConfig base = skeleton.sampler;
  base.n_patches = options.patches_per_image;
  base.seed = options.seed;
  detail::parallel_for(
      n, options.workers, [](int) {},
      [&](int, std::size_t i) {
        const auto& entry = train.entries[i];
        const auto path = train.resolve(entry);
        const ImageBuffer img = load_image(path);
        std::vector<Patch> patches;
        try {
          patches = sample_patches(img, item_sampler(base, i));
        } catch (const DataError& e) {
          throw DataError(path.string() + ": " + e.what());
        }
        auto& feats = per_image[i];
        feats.reserve(patches.size());
        for (const auto& p : patches) feats.push_back(spectral_features(p, options.features));
      });

  std::vector<SpectralFeatures> real, synthetic, laundered, fully;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = train.entries[i].label;
    auto& bucket = label == ClassLabel::Real        ? real
                   : label == ClassLabel::Laundered ? laundered
                                                    : fully;
    bucket.insert(bucket.end(), per_image[i].begin(), per_image[i].end());
    if (label != ClassLabel::Real &&
        !(options.stage1_excludes_laundered && label == ClassLabel::Laundered)) {
      synthetic.insert(synthetic.end(), per_image[i].begin(), per_image[i].end());
    }
  }

  CalibrationResult result;
  result.config = skeleton;
  result.config.stage1 = calibrate_features(synthetic, real, options.features,
                                            ClassLabel::FullySynthetic);
  result.config.stage2 = calibrate_features(laundered, fully, options.features,
                                            ClassLabel::Laundered);
  result.config.training_paths = resolved_paths(train);

  auto check_sign = [&](const ScorerModel& m, const std::vector<SpectralFeatures>& pos,
                        const std::vector<SpectralFeatures>& neg, const char* stage) {
    double mp = 0.0, mn = 0.0;
    for (const auto& f : pos) mp += m.score_features(f);
    for (const auto& f : neg) mn += m.score_features(f);
    mp /= static_cast<double>(pos.size());
    mn /= static_cast<double>(neg.size());
    if (!(mp > 0.0 && mn < 0.0)) {
      result.warnings.push_back(std::string(stage) +
                                ": calibration classes are not separated in mean");
    }
  };
  check_sign(std::get<ScorerModel>(result.config.stage1), synthetic, real, "stage1");
  check_sign(std::get<ScorerModel>(result.config.stage2), laundered, fully, "stage2");
  return result;
}

// ------------------------------------------------------------ evaluation

namespace {

struct ItemScores {
  double s1 = 0.0;
  std::optional<double> s2;
  ClassLabel predicted = ClassLabel::Real;
};

template <class Fn>
std::optional<MetricRow> guarded_row(const std::string& what, std::vector<std::string>& warnings,
                                     Fn&& fn) {
  try {
    return fn();
  } catch (const DataError& e) {
    warnings.push_back(what + ": " + e.what());
    return std::nullopt;
  }
}

ConditionReport summarize(const std::string& name, const DatasetManifest& manifest,
                          const std::vector<std::size_t>& kept,
                          const std::vector<ItemScores>& scores,
                          const PipelineConfig& cfg, const EvalOptions& options) {
  ConditionReport rep;
  rep.name = name;

  std::vector<ScoredItem> s1_items, s2_items;
  std::vector<double> h1_scores, h2_scores;
  std::vector<std::string> h1_classes, h2_classes;
  std::map<std::string, std::vector<std::size_t>> by_group;

  for (std::size_t k : kept) {
    const auto& e = manifest.entries[k];
    const auto& sc = scores[k];
    const bool synthetic = e.label != ClassLabel::Real;
    s1_items.push_back({sc.s1, synthetic, e.path});
    h1_scores.push_back(sc.s1);
    h1_classes.emplace_back(to_string(e.label));
    if (synthetic && sc.s2) {
      s2_items.push_back({*sc.s2, e.label == ClassLabel::Laundered, e.path});
      h2_scores.push_back(*sc.s2);
      h2_classes.emplace_back(to_string(e.label));
    }
    rep.confusion[label_index(e.label)][label_index(sc.predicted)]++;
    by_group[e.group].push_back(k);
    rep.items.push_back({e.path, e.label, e.group, sc.s1, sc.s2, sc.predicted});
  }

  rep.stage1 = guarded_row("stage1", rep.warnings,
                           [&] { return metric_row(s1_items, cfg.stage1_threshold); });
  if (s2_items.empty()) {
    rep.warnings.push_back("stage2: skipped, no synthetic items");
  } else {
    rep.stage2 = guarded_row("stage2", rep.warnings,
                             [&] { return metric_row(s2_items, cfg.stage2_threshold); });
  }

  double recall_sum = 0.0;
  int present = 0;
  for (const auto& row : rep.confusion) {
    std::size_t total = 0;
    for (auto c : row) total += c;
    if (total == 0) continue;
    recall_sum += static_cast<double>(row[&row - rep.confusion.data()]) / static_cast<double>(total);
    ++present;
  }
  if (present > 0) rep.three_class_ba = recall_sum / present;

  if (!h1_scores.empty()) rep.stage1_histogram = histogram(h1_scores, h1_classes, options.histogram_bins);
  if (!h2_scores.empty()) rep.stage2_histogram = histogram(h2_scores, h2_classes, options.histogram_bins);

  // Per-group rows: the group's synthetic items against every real item
  // (stage 1) and against each other (stage 2).
  for (const auto& [group, members] : by_group) {
    std::vector<ScoredItem> g1, g2;
    bool has_synthetic = false;
    for (std::size_t k : members) {
      const auto& e = manifest.entries[k];
      if (e.label == ClassLabel::Real) continue;
      has_synthetic = true;
      g1.push_back({scores[k].s1, true, e.path});
      if (scores[k].s2) g2.push_back({*scores[k].s2, e.label == ClassLabel::Laundered, e.path});
    }
    if (!has_synthetic) continue;
    for (const auto& it : s1_items) {
      if (!it.is_positive) g1.push_back(it);
    }
    GroupRows rows;
    rows.stage1 = guarded_row("group " + group + " stage1", rep.warnings,
                              [&] { return metric_row(g1, cfg.stage1_threshold); });
    rows.stage2 = guarded_row("group " + group + " stage2", rep.warnings,
                              [&] { return metric_row(g2, cfg.stage2_threshold); });
    rep.groups.emplace(group, std::move(rows));
  }
  return rep;
}

}  // namespace

EvalReport run_eval(const DatasetManifest& manifest, const PipelineConfig& cfg,
                    const std::vector<PostProcOp>& postproc,
                    const EvalOptions& options) {
  cfg.validate();
  if (manifest.entries.empty()) throw DataError("manifest: no entries");
  if (options.histogram_bins < 1) throw UsageError("histogram needs at least one bin");
  for (const auto& op : postproc) op.validate();
  const auto started = std::chrono::steady_clock::now();

  const std::size_t n = manifest.entries.size();
  const std::size_t n_cond = postproc.size() + 1;
  std::vector<std::vector<ItemScores>> scores(n_cond, std::vector<ItemScores>(n));
  std::vector<std::optional<std::string>> failures(n);

  const int workers = std::max(1, options.workers);
  std::vector<std::unique_ptr<PatchScorer>> stage1(workers), stage2(workers);

  detail::parallel_for(
      n, workers,
      [&](int w) {
        stage1[w] = make_scorer(cfg.stage1);
        stage2[w] = make_scorer(cfg.stage2);
      },
      [&](int w, std::size_t i) {
        const auto& entry = manifest.entries[i];
        const auto path = manifest.resolve(entry);
        ImageBuffer original;
        try {
          original = load_image(path);
          if (original.channels() != 3) throw DataError("color image required");
        } catch (const DataError& e) {
          if (!options.skip_errors) throw;
          failures[i] = e.what();
          return;
        }
        PipelineConfig item_cfg = cfg;
        item_cfg.sampler = item_sampler(cfg.sampler, i);
        const bool synthetic = entry.label != ClassLabel::Real;
        for (std::size_t c = 0; c < n_cond; ++c) {
          ImageBuffer img;
          std::optional<PatchSet> patches;
          try {
            img = c == 0 ? original : apply_postproc(original, postproc[c - 1]);
            patches.emplace(sample_patches(img, item_cfg.sampler));
          } catch (const DataError& e) {
            const std::string where = c == 0 ? "" : " (" + postproc[c - 1].name() + ")";
            if (!options.skip_errors) throw DataError(path.string() + where + ": " + e.what());
            failures[i] = std::string(e.what()) + where;
            return;
          }
          auto& out = scores[c][i];
          out.s1 = in_stage("stage1", [&] {
            return aggregate(*patches, *stage1[w], cfg.aggregation);
          });
          const bool reaches_stage2 = out.s1 >= cfg.stage1_threshold;
          // Stage-2 metrics cover every ground-truth synthetic item, as if
          // stage 1 had filtered the real ones perfectly.
          if (reaches_stage2 || synthetic) {
            out.s2 = in_stage("stage2", [&] {
              if (!cfg.resample_stage2) return aggregate(*patches, *stage2[w], cfg.aggregation);
              return aggregate(sample_patches(img, stage2_sampler(item_cfg)), *stage2[w],
                               cfg.aggregation);
            });
          }
          out.predicted = !reaches_stage2 ? ClassLabel::Real
                          : *out.s2 >= cfg.stage2_threshold ? ClassLabel::Laundered
                                                            : ClassLabel::FullySynthetic;
        }
      });

  EvalReport report;
  report.config = cfg;
  report.postproc = postproc;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (failures[i]) {
      report.skipped.push_back({manifest.entries[i].path, *failures[i]});
    } else {
      kept.push_back(i);
    }
  }
  report.n_items = kept.size();
  if (kept.empty()) throw DataError("no evaluable items in manifest");

  if (!cfg.training_paths.empty()) {
    const auto overlap = shared_paths(resolved_paths(manifest), cfg.training_paths);
    if (!overlap.empty()) {
      report.warnings.push_back(std::to_string(overlap.size()) +
                                " evaluation image(s) were also used for calibration");
    }
  }

  for (std::size_t c = 0; c < n_cond; ++c) {
    report.conditions.push_back(summarize(c == 0 ? "none" : postproc[c - 1].name(), manifest,
                                          kept, scores[c], cfg, options));
  }
  for (int w = 0; w < workers; ++w) {
    if (stage1[w]) report.stage1_invocations += stage1[w]->invocations();
    if (stage2[w]) report.stage2_invocations += stage2[w]->invocations();
  }
  if (options.include_timing) {
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return report;
}

}  // namespace launderscope
