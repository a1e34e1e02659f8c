#include <benchmark/benchmark.h>

#include <random>

#include "launderscope/metrics.hpp"
#include "launderscope/patch.hpp"

namespace ls = launderscope;

static void BM_AggregateTopFraction(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<double> v(static_cast<std::size_t>(state.range(0)));
  for (double& x : v) x = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ls::aggregate_top_fraction(v, {0.75}));
}
BENCHMARK(BM_AggregateTopFraction)->Arg(128)->Arg(800)->Arg(10000);

static void BM_RocAuc(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<ls::ScoredItem> items;
  for (int i = 0; i < state.range(0); ++i) {
    const bool pos = i % 2 == 0;
    items.push_back({normal(rng) + (pos ? 1.0 : 0.0), pos, ""});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ls::roc_auc(items));
    benchmark::DoNotOptimize(ls::ba_max(items));
  }
}
BENCHMARK(BM_RocAuc)->Arg(300)->Arg(10000);
