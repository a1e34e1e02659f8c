#include "launderscope/patch.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "launderscope/error.hpp"

namespace launderscope {

void SamplerConfig::validate() const {
  if (n_patches < 1) throw UsageError("n_patches must be at least 1");
  if (patch_size < 8) throw UsageError("patch_size must be at least 8");
}

void AggregationConfig::validate() const {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw UsageError("top_fraction must lie in (0,1]");
  }
}

std::size_t AggregationConfig::kept(std::size_t n) const {
  const auto m =
      static_cast<std::size_t>(std::floor(top_fraction * static_cast<double>(n) + 0.5));
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(n, 1));
}

std::vector<PatchOrigin> sample_origins(int width, int height,
                                        const SamplerConfig& cfg) {
  cfg.validate();
  if (width < cfg.patch_size || height < cfg.patch_size) {
    throw DataError("image too small: " + std::to_string(width) + "x" +
                    std::to_string(height) + " for patch size " +
                    std::to_string(cfg.patch_size));
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> xs(0, width - cfg.patch_size);
  std::uniform_int_distribution<int> ys(0, height - cfg.patch_size);
  std::vector<PatchOrigin> origins(static_cast<std::size_t>(cfg.n_patches));
  for (auto& o : origins) {
    o.x = xs(rng);
    o.y = ys(rng);
  }
  return origins;
}

std::vector<Patch> sample_patches(const ImageBuffer& img,
                                  const SamplerConfig& cfg) {
  if (img.channels() != 3) throw DataError("color image required");
  const auto origins = sample_origins(img.width(), img.height(), cfg);
  std::vector<Patch> patches;
  patches.reserve(origins.size());
  for (const auto& o : origins) {
    patches.push_back(
        {img.crop(o.x, o.y, cfg.patch_size, cfg.patch_size), o});
  }
  return patches;
}

double aggregate_top_fraction(std::span<const double> scores,
                              const AggregationConfig& cfg) {
  cfg.validate();
  if (scores.empty()) throw UsageError("cannot aggregate an empty score list");
  for (double s : scores) {
    if (std::isnan(s)) throw UsageError("score list contains NaN");
    if (!std::isfinite(s)) throw UsageError("score list contains inf");
  }
  const std::size_t m = cfg.kept(scores.size());
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + (m - 1), sorted.end(),
                   std::greater<>());
  // Sort the kept prefix so the summation order is input-order independent.
  std::sort(sorted.begin(), sorted.begin() + m, std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum += sorted[i];
  return sum / static_cast<double>(m);
}

}  // namespace launderscope
