#include <benchmark/benchmark.h>

#include <random>

#include "gazespiral/analysis.hpp"
#include "gazespiral/metrics.hpp"

using namespace gazespiral;

namespace {

FeatureSequence random_sequence(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureSequence s;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector v;
    for (int d = 0; d < kFeatureDim; ++d) v.values.push_back(rng() % 3 ? 0.0 : u(rng));
    s.items.push_back(std::move(v));
  }
  return s;
}

void BM_Levenshtein(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_sequence(n, 1), b = random_sequence(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(levenshtein(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Levenshtein)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNSquared);

void BM_SmithWaterman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_sequence(n, 3), b = random_sequence(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(smith_waterman(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SmithWaterman)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNSquared);

void BM_Dtw(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_sequence(n, 5), b = random_sequence(n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(dtw(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dtw)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNSquared);

void BM_PairwiseMatrix(benchmark::State& state) {
  std::vector<ScanpathSequence> seqs;
  for (int i = 0; i < state.range(0); ++i) seqs.emplace_back(random_sequence(60, 100 + i));
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_matrix(seqs, AlignmentMethod::Levenshtein));
}
BENCHMARK(BM_PairwiseMatrix)->Arg(14)->Arg(40)->Unit(benchmark::kMillisecond);

DistanceMatrix random_matrix(std::size_t n) {
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, u(rng));
  return m;
}

void BM_Smacof(benchmark::State& state) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(embed_smacof(m, 300, 1e-10, 42, 1));
}
BENCHMARK(BM_Smacof)->Arg(14)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_AverageLinkage(benchmark::State& state) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(hca_average_linkage(m));
}
BENCHMARK(BM_AverageLinkage)->Arg(14)->Arg(100);

}  // namespace
