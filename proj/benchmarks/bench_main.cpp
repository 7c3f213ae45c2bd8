#include <benchmark/benchmark.h>

#include <vector>

#include "vista/corpus.hpp"
#include "vista/layout.hpp"
#include "vista/metric.hpp"
#include "vista/neighbors.hpp"
#include "vista/random.hpp"
#include "vista/synthetic.hpp"

namespace {

using namespace vista;

metric::DistanceMatrix random_distances(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<metric::Point2> pts(n);
  for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
  return metric::euclidean_distances(pts);
}

corpus::LatentSlice synthetic_slice(std::size_t n) {
  synthetic::ClusterSpec spec;
  spec.per_cluster = n / spec.clusters;
  spec.distractors = 0;
  auto slice = corpus::select_top_activating(synthetic::clustered_corpus(spec), spec.latent(),
                                             corpus::SelectionTarget::count(n));
  corpus::normalize_activations(slice);
  return slice;
}

void BM_PairwiseDistances(benchmark::State& state) {
  const auto slice = synthetic_slice(static_cast<std::size_t>(state.range(0)));
  const metric::MetricConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(metric::pairwise_distances(slice, cfg, 1));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PairwiseDistances)->Arg(250)->Arg(500)->Arg(1000)->Complexity();

void BM_KnnExact(benchmark::State& state) {
  const auto d = random_distances(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(neighbors::knn_exact(d, 15));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KnnExact)->Arg(500)->Arg(1000)->Arg(2000)->Complexity();

void BM_MutualKnn(benchmark::State& state) {
  const std::size_t n = 2000;
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto a = neighbors::knn_exact(random_distances(n, 1), k);
  const auto b = neighbors::knn_exact(random_distances(n, 2), k);
  for (auto _ : state) benchmark::DoNotOptimize(neighbors::mutual_knn(a, b, k));
}
BENCHMARK(BM_MutualKnn)->Arg(20)->Arg(100)->Arg(200);

void BM_Optimize(benchmark::State& state) {
  const auto d = random_distances(static_cast<std::size_t>(state.range(0)), 3);
  const auto fg = layout::fuzzy_simplicial_set(neighbors::knn_exact(d, 15));
  layout::LayoutConfig cfg;
  cfg.epochs = 200;
  for (auto _ : state) benchmark::DoNotOptimize(layout::optimize(fg, cfg));
}
BENCHMARK(BM_Optimize)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
