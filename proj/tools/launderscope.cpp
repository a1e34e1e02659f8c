#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "launderscope/degradations.hpp"
#include "launderscope/error.hpp"
#include "launderscope/image.hpp"
#include "launderscope/manifest.hpp"
#include "launderscope/pipeline.hpp"
#include "launderscope/spectral.hpp"

namespace ls = launderscope;
namespace fs = std::filesystem;

namespace {

int exit_code(ls::ErrorKind kind) {
  switch (kind) {
    case ls::ErrorKind::Usage: return 1;
    case ls::ErrorKind::Data: return 2;
    case ls::ErrorKind::Scorer: return 3;
  }
  return 2;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw ls::DataError("cannot write " + path.string());
}

std::vector<ls::PostProcOp> parse_ops(const std::string& list) {
  std::vector<ls::PostProcOp> ops;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      ops.push_back(ls::PostProcOp::parse(item));
    } catch (const ls::Error& e) {
      throw ls::UsageError(e.what());
    }
  }
  return ops;
}

// ------------------------------------------------------------ subcommands

struct GenFixtures {
  fs::path out;
  int count = 150;
  int size = 256;
  std::uint64_t seed = 0;

  void run() const {
    ls::FixtureConfig cfg;
    cfg.count_per_class = count;
    cfg.size = size;
    cfg.seed = seed;
    cfg.validate();
    ls::DatasetManifest manifest;
    manifest.base_dir = out;
    for (ls::ClassLabel label : ls::kAllLabels) {
      const std::string cls(ls::to_string(label));
      const std::string group = label == ls::ClassLabel::Real ? "pristine" : "proxy-f8";
      for (int i = 0; i < count; ++i) {
        const std::string rel = cls + "/" + std::to_string(i) + ".png";
        ls::save_image(ls::gen_fixture(label, cfg, static_cast<std::uint64_t>(i)), out / rel);
        manifest.entries.push_back({rel, label, group});
      }
    }
    ls::save_manifest(manifest, out / "manifest.csv");
  }
};

struct Launder {
  fs::path in, out;
  int factor = 8;
  double leak = ls::LaunderProxyConfig{}.overlap_leak;

  void run() const {
    ls::LaunderProxyConfig cfg;
    cfg.factor = factor;
    cfg.overlap_leak = leak;
    ls::save_image(ls::launder_proxy(ls::load_image(in), cfg), out);
  }
};

struct PostProc {
  fs::path in, out;
  std::string op;

  void run() const {
    const auto ops = parse_ops(op);
    if (ops.size() != 1) throw ls::UsageError("--op takes exactly one operation");
    ls::save_image(ls::apply_postproc(ls::load_image(in), ops.front()), out);
  }
};

struct SpectrumCmd {
  fs::path manifest;
  std::string label;
  std::string out;
  int factor = 8;

  void run() const {
    if (factor < 2) throw ls::UsageError("--factor must be at least 2");
    ls::ClassLabel cls;
    try {
      cls = ls::parse_label(label);
    } catch (const ls::Error& e) {
      throw ls::UsageError(e.what());
    }
    const auto m = ls::load_manifest(manifest);
    ls::SpectrumAccumulator acc;
    for (const auto& e : m.entries) {
      if (e.label != cls) continue;
      acc.add(ls::extract_residual(ls::load_image(m.resolve(e)), ls::Denoiser::median3()));
    }
    if (acc.count() == 0) throw ls::DataError("no manifest entries with label " + label);
    const auto spec = acc.mean();
    const auto peaks = ls::detect_peaks(spec, factor);
    ls::save_image(ls::render_spectrum(spec), out + ".png");
    nlohmann::ordered_json j{{"width", spec.width},
                             {"height", spec.height},
                             {"count", spec.count},
                             {"factor", factor},
                             {"peak_strength", peaks.peak_strength},
                             {"low_freq_ratio", ls::low_freq_ratio(spec)},
                             {"flatness", ls::spectral_flatness(spec)}};
    write_text(out + ".json", j.dump(2) + "\n");
  }
};

struct Calibrate {
  fs::path manifest, out;
  int n_patches = 800;
  int train_patches = 64;
  std::uint64_t seed = 0;
  int workers = 1;
  bool stage1_no_laundered = false;
  bool resample_stage2 = false;

  void run() const {
    ls::PipelineConfig skeleton;
    skeleton.sampler.n_patches = n_patches;
    skeleton.sampler.seed = seed;
    skeleton.resample_stage2 = resample_stage2;
    skeleton.sampler.validate();
    ls::CalibrationOptions opts;
    opts.patches_per_image = train_patches;
    opts.seed = seed;
    opts.workers = workers;
    opts.stage1_excludes_laundered = stage1_no_laundered;
    const auto result = ls::calibrate_pipeline(ls::load_manifest(manifest), skeleton, opts);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    ls::save_pipeline(result.config, out);
  }
};

struct Score {
  fs::path image, models;
  bool json = false;

  void run() const {
    const auto cfg = ls::load_pipeline(models);
    const auto result = ls::classify_image(ls::load_image(image), cfg);
    if (json) {
      std::cout << ls::classification_to_json(result);
      return;
    }
    std::cout << ls::to_string(result.label) << " s1=" << result.s1;
    if (result.s2) std::cout << " s2=" << *result.s2;
    std::cout << "\n";
  }
};

struct Eval {
  fs::path manifest, models, out;
  std::string postproc;
  std::optional<int> n_patches;
  std::optional<std::uint64_t> seed;
  bool skip_errors = false;
  bool resample_stage2 = false;
  bool timing = false;
  bool verbose = false;
  int workers = 1;
  int histogram_bins = 20;

  void run() const {
    auto cfg = ls::load_pipeline(models);
    if (n_patches) cfg.sampler.n_patches = *n_patches;
    if (seed) cfg.sampler.seed = *seed;
    if (resample_stage2) cfg.resample_stage2 = true;
    ls::EvalOptions opts;
    opts.workers = workers;
    opts.skip_errors = skip_errors;
    opts.histogram_bins = histogram_bins;
    opts.include_timing = timing;
    const auto report = ls::run_eval(ls::load_manifest(manifest), cfg, parse_ops(postproc), opts);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& s : report.skipped) std::cerr << "skipped: " << s.path << ": " << s.reason << "\n";
    if (verbose) {
      for (const auto& c : report.conditions) {
        std::cerr << c.name;
        if (c.stage1) std::cerr << " stage1_auc=" << c.stage1->auc;
        if (c.stage2) std::cerr << " stage2_auc=" << c.stage2->auc;
        if (c.three_class_ba) std::cerr << " three_class_ba=" << *c.three_class_ba;
        std::cerr << "\n";
      }
      std::cerr << "stage1 invocations: " << report.stage1_invocations << "\n"
                << "stage2 invocations: " << report.stage2_invocations << "\n";
    }
    write_text(out, ls::report_to_json(report));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect real, fully synthetic and laundered images"};
  app.require_subcommand(1);

  GenFixtures gen;
  auto* g = app.add_subcommand("gen-fixtures", "Write a labelled synthetic fixture set");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--count", gen.count, "Images per class")->check(CLI::PositiveNumber);
  g->add_option("--size", gen.size, "Side length in pixels");
  g->add_option("--seed", gen.seed, "Generator seed");

  Launder launder;
  auto* l = app.add_subcommand("launder", "Apply the laundering proxy to one image");
  l->add_option("--in", launder.in, "Input image")->required();
  l->add_option("--out", launder.out, "Output image (.png or .ppm)")->required();
  l->add_option("--factor", launder.factor, "Resampling factor");
  l->add_option("--leak", launder.leak, "Overlap leakage of the upsampler");

  PostProc pp;
  auto* p = app.add_subcommand("postproc", "Apply one post-processing operation");
  p->add_option("--in", pp.in, "Input image")->required();
  p->add_option("--out", pp.out, "Output image (.png or .ppm)")->required();
  p->add_option("--op", pp.op, "jpeg<Q>, resize<S> or downup<F>")->required();

  SpectrumCmd spectrum;
  auto* s = app.add_subcommand("spectrum", "Average residual spectrum of one class");
  s->add_option("--manifest", spectrum.manifest, "Dataset manifest")->required();
  s->add_option("--class", spectrum.label, "real, fully_synthetic or laundered")->required();
  s->add_option("--out", spectrum.out, "Output prefix for .png and .json")->required();
  s->add_option("--factor", spectrum.factor, "Lattice factor for peak detection");

  Calibrate cal;
  auto* c = app.add_subcommand("calibrate", "Fit both stage scorers on a training manifest");
  c->add_option("--manifest", cal.manifest, "Training manifest")->required();
  c->add_option("--out", cal.out, "Model directory")->required();
  c->add_option("--n-patches", cal.n_patches, "Patches sampled per image at inference");
  c->add_option("--train-patches", cal.train_patches, "Patches sampled per training image");
  c->add_option("--seed", cal.seed, "Sampling seed");
  c->add_option("--workers", cal.workers, "Worker threads")->check(CLI::PositiveNumber);
  c->add_flag("--stage1-no-laundered", cal.stage1_no_laundered,
              "Fit stage 1 on real vs fully synthetic only");
  c->add_flag("--resample-stage2", cal.resample_stage2,
              "Draw a separate patch set for stage 2");

  Score score;
  auto* sc = app.add_subcommand("score", "Classify one image");
  sc->add_option("--image", score.image, "Image to classify")->required();
  sc->add_option("--models", score.models, "Model directory")->required();
  sc->add_flag("--json", score.json, "Print the result as JSON");

  Eval ev;
  auto* e = app.add_subcommand("eval", "Evaluate a manifest and write a JSON report");
  e->add_option("--manifest", ev.manifest, "Test manifest")->required();
  e->add_option("--models", ev.models, "Model directory")->required();
  e->add_option("--out", ev.out, "Report path")->required();
  e->add_option("--postproc", ev.postproc, "Comma-separated operations, e.g. jpeg70,resize0.5");
  e->add_option("--n-patches", ev.n_patches, "Override patches per image");
  e->add_option("--seed", ev.seed, "Override the sampling seed");
  e->add_flag("--skip-errors", ev.skip_errors, "Skip unreadable images instead of failing");
  e->add_flag("--resample-stage2", ev.resample_stage2, "Draw a separate patch set for stage 2");
  e->add_flag("--timing", ev.timing, "Record runtime in the report");
  e->add_flag("--verbose", ev.verbose, "Print summary metrics and scorer invocation counts");
  e->add_option("--workers", ev.workers, "Worker threads")->check(CLI::PositiveNumber);
  e->add_option("--histogram-bins", ev.histogram_bins, "Bins per score histogram")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*g) gen.run();
    else if (*l) launder.run();
    else if (*p) pp.run();
    else if (*s) spectrum.run();
    else if (*c) cal.run();
    else if (*sc) score.run();
    else if (*e) ev.run();
  } catch (const ls::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
