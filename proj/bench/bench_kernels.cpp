#include <benchmark/benchmark.h>

#include <random>

#include "dtfl/kernels.hpp"
#include "dtfl/rng.hpp"

using dtfl::Tensor;
using dtfl::kernels::Exec;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  dtfl::Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = n(rng);
  return t;
}

Exec exec_of(const benchmark::State& state) { return state.range(1) ? Exec::Parallel : Exec::Serial; }

void BM_LinearForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_matrix(n, n, 1);
  const Tensor w = random_matrix(n, n, 2);
  const Tensor b = random_matrix(1, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(dtfl::kernels::linear_forward(x, w, b, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}

void BM_GradWeight(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor g = random_matrix(n, n, 4);
  const Tensor x = random_matrix(n, n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(dtfl::kernels::matmul_grad_weight(g, x, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}

void BM_PairwiseDistances(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_matrix(n, 64, 6);
  for (auto _ : state) benchmark::DoNotOptimize(dtfl::kernels::pairwise_distances(x, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * 64));
}

// Second argument: 0 serial, 1 OpenMP.
BENCHMARK(BM_LinearForward)->ArgsProduct({{64, 256, 512}, {0, 1}})->UseRealTime();
BENCHMARK(BM_GradWeight)->ArgsProduct({{64, 256, 512}, {0, 1}})->UseRealTime();
BENCHMARK(BM_PairwiseDistances)->ArgsProduct({{100, 500, 1000}, {0, 1}})->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
