#include <benchmark/benchmark.h>

#include "tanger/ops.hpp"
#include "tanger/rng.hpp"
#include "tanger/tensor.hpp"

namespace {

tanger::Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t key) {
  tanger::SeqRng rng(key);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.next_uniform(-1.0, 1.0);
  return tanger::Tensor::from_data({rows, cols}, std::move(v));
}

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  tanger::Tensor a = random_matrix(n, n, 1);
  tanger::Tensor b = random_matrix(n, n, 2);
  for (auto _ : state) {
    tanger::Tensor c = tanger::matmul(a, b);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_softmax(benchmark::State& state) {
  tanger::Tensor a = random_matrix(64, 64, 3);
  for (auto _ : state) {
    tanger::Tensor y = tanger::softmax(a, 1);
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_softmax);

}  // namespace

BENCHMARK_MAIN();
