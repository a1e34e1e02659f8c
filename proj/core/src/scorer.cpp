#include "launderscope/scorer.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "json_io.hpp"

namespace launderscope {

double ScorerModel::score_features(const SpectralFeatures& f) const {
  const auto x = f.as_array();
  double s = bias;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
  return s;
}

double score_patch(const ScorerModel& model, const ImageBuffer& pixels) {
  return model.score_features(spectral_features(pixels, model.feature_cfg));
}

double score_patch(const ScorerModel& model, const Patch& patch) {
  return score_patch(model, patch.pixels);
}

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

Vec3 mean_of(std::span<const SpectralFeatures> xs) {
  Vec3 m{};
  for (const auto& f : xs) {
    const auto a = f.as_array();
    for (int i = 0; i < 3; ++i) m[i] += a[i];
  }
  for (double& v : m) v /= static_cast<double>(xs.size());
  return m;
}

void accumulate_scatter(Mat3& s, std::span<const SpectralFeatures> xs, const Vec3& mu) {
  for (const auto& f : xs) {
    const auto a = f.as_array();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) s[i][j] += (a[i] - mu[i]) * (a[j] - mu[j]);
    }
  }
}

// Cholesky solve of a symmetric positive-definite 3x3 system.
bool solve_spd(Mat3 a, Vec3 b, Vec3& x) {
  Mat3 l{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[i][j];
      for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
      if (i == j) {
        if (!(sum > 0.0) || !std::isfinite(sum)) return false;
        l[i][i] = std::sqrt(sum);
      } else {
        l[i][j] = sum / l[j][j];
      }
    }
  }
  Vec3 y{};
  for (int i = 0; i < 3; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k) sum -= l[i][k] * y[k];
    y[i] = sum / l[i][i];
  }
  for (int i = 2; i >= 0; --i) {
    double sum = y[i];
    for (int k = i + 1; k < 3; ++k) sum -= l[k][i] * x[k];
    x[i] = sum / l[i][i];
  }
  return true;
}

}  // namespace

ScorerModel calibrate_features(std::span<const SpectralFeatures> positives,
                               std::span<const SpectralFeatures> negatives,
                               const FeatureConfig& feature_cfg,
                               ClassLabel positive_class) {
  if (positives.size() < 10 || negatives.size() < 10) {
    throw DataError("calibration needs at least 10 patches per class (got " +
                    std::to_string(positives.size()) + " positive, " +
                    std::to_string(negatives.size()) + " negative)");
  }
  const Vec3 mu_pos = mean_of(positives);
  const Vec3 mu_neg = mean_of(negatives);
  Mat3 pooled{};
  accumulate_scatter(pooled, positives, mu_pos);
  accumulate_scatter(pooled, negatives, mu_neg);
  const double dof = static_cast<double>(positives.size() + negatives.size() - 2);
  double trace = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) pooled[i][j] /= dof;
    trace += pooled[i][i];
  }
  if (!(trace > 0.0) || !std::isfinite(trace)) {
    throw DataError("degenerate calibration set");
  }
  const double ridge = 1e-6 * trace / 3.0;
  for (int i = 0; i < 3; ++i) pooled[i][i] += ridge;

  Vec3 diff{};
  for (int i = 0; i < 3; ++i) diff[i] = mu_pos[i] - mu_neg[i];
  Vec3 w{};
  if (!solve_spd(pooled, diff, w)) throw DataError("degenerate calibration set");

  ScorerModel model;
  model.weights = w;
  model.positive_class = positive_class;
  model.feature_cfg = feature_cfg;
  double mid = 0.0;
  for (int i = 0; i < 3; ++i) mid += w[i] * 0.5 * (mu_pos[i] + mu_neg[i]);
  model.bias = -mid;
  return model;
}

ScorerModel calibrate(std::span<const Patch> positives,
                      std::span<const Patch> negatives,
                      const FeatureConfig& feature_cfg,
                      ClassLabel positive_class) {
  auto features = [&](std::span<const Patch> patches) {
    std::vector<SpectralFeatures> out;
    out.reserve(patches.size());
    for (const auto& p : patches) out.push_back(spectral_features(p, feature_cfg));
    return out;
  };
  const auto pos = features(positives);
  const auto neg = features(negatives);
  return calibrate_features(pos, neg, feature_cfg, positive_class);
}

// ------------------------------------------------------------ JSON

namespace detail {

Json denoiser_to_json(const Denoiser& d) {
  if (d.kind == Denoiser::Kind::Median3) return Json{{"kind", "median3"}};
  return Json{{"kind", "gaussian"}, {"sigma", d.sigma}};
}

Denoiser denoiser_from_json(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "median3") return Denoiser::median3();
  if (kind == "gaussian") return Denoiser::gaussian(j.at("sigma").get<double>());
  throw DataError("unknown denoiser \"" + kind + "\"");
}

Json model_json(const ScorerModel& model) {
  Json j;
  j["format"] = "launderscope.scorer/1";
  j["features"] = {"peak_strength", "low_freq_ratio", "flatness"};
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["positive_class"] = std::string(to_string(model.positive_class));
  j["denoiser"] = denoiser_to_json(model.feature_cfg.denoiser);
  j["factor"] = model.feature_cfg.factor;
  return j;
}

ScorerModel model_from(const Json& j) {
  ScorerModel m;
  try {
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != 3) throw DataError("model weights must have 3 entries");
    for (int i = 0; i < 3; ++i) {
      if (!std::isfinite(w[i])) throw DataError("model weights must be finite");
      m.weights[i] = w[i];
    }
    m.bias = j.at("bias").get<double>();
    m.positive_class = parse_label(j.at("positive_class").get<std::string>());
    m.feature_cfg.denoiser = denoiser_from_json(j.at("denoiser"));
    m.feature_cfg.factor = j.at("factor").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed scorer model: ") + e.what());
  }
  return m;
}

}  // namespace detail

std::string model_to_json(const ScorerModel& model) {
  return detail::model_json(model).dump(2) + "\n";
}

ScorerModel model_from_json(const std::string& text) {
  detail::Json j;
  try {
    j = detail::Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed scorer model: ") + e.what());
  }
  return detail::model_from(j);
}

void save_model(const ScorerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << model_to_json(model);
}

ScorerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("file not found: " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>()};
  return model_from_json(text);
}

std::unique_ptr<PatchScorer> make_scorer(const ScorerSpec& spec) {
  if (const auto* m = std::get_if<ScorerModel>(&spec)) {
    return std::make_unique<BuiltinScorer>(*m);
  }
  return std::make_unique<ExternalScorer>(std::get<ExternalScorerConfig>(spec));
}

}  // namespace launderscope
