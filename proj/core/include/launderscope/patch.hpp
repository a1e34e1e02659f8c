#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "launderscope/image.hpp"

namespace launderscope {

struct PatchOrigin {
  int x = 0;
  int y = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

/// Square crop of a source image together with where it came from.
struct Patch {
  ImageBuffer pixels;
  PatchOrigin origin;
};

struct SamplerConfig {
  int n_patches = 800;
  int patch_size = 96;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AggregationConfig {
  double top_fraction = 0.75;

  void validate() const;
  /// Number of scores kept out of `n`: max(1, round-half-up(fraction * n)).
  std::size_t kept(std::size_t n) const;
};

/// Top-left corners drawn uniformly with replacement from the valid grid,
/// using mt19937_64 seeded with `cfg.seed`.
std::vector<PatchOrigin> sample_origins(int width, int height,
                                        const SamplerConfig& cfg);

/// Requires a 3-channel image at least patch_size on each side.
std::vector<Patch> sample_patches(const ImageBuffer& img,
                                  const SamplerConfig& cfg);

/// Mean of the highest `cfg.kept(scores.size())` scores.
double aggregate_top_fraction(std::span<const double> scores,
                              const AggregationConfig& cfg);

}  // namespace launderscope
