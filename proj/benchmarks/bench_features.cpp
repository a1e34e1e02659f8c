#include <benchmark/benchmark.h>

#include "launderscope/degradations.hpp"
#include "launderscope/patch.hpp"
#include "launderscope/spectral.hpp"

namespace ls = launderscope;

static void BM_SpectralFeatures(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  ls::FixtureConfig fx;
  fx.size = side;
  const auto img = ls::gen_fixture(ls::ClassLabel::Laundered, fx, 0);
  const ls::FeatureConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(ls::spectral_features(img, cfg));
}
BENCHMARK(BM_SpectralFeatures)->Arg(64)->Arg(96)->Arg(128);

static void BM_LaunderProxy(benchmark::State& state) {
  const auto img = ls::gen_pristine({}, 0);
  for (auto _ : state) benchmark::DoNotOptimize(ls::launder_proxy(img));
}
BENCHMARK(BM_LaunderProxy);
