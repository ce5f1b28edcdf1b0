#include <benchmark/benchmark.h>

#include <random>

#include "falcon/ops.hpp"

namespace {

falcon::Tensor random_tensor(falcon::Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<falcon::Scalar> data(falcon::shape_numel(shape));
  for (auto& v : data) v = static_cast<falcon::Scalar>(u(rng));
  return falcon::Tensor(std::move(shape), std::move(data), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  falcon::NoGradGuard off;
  for (auto _ : state) benchmark::DoNotOptimize(falcon::ops::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_tensor({n, n}, 1, true), b = random_tensor({n, n}, 2, true);
  for (auto _ : state) {
    falcon::backward(falcon::ops::sum(falcon::ops::matmul(a, b)));
    a.clear_grad();
    b.clear_grad();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_Conv2d(benchmark::State& state) {
  const auto x = random_tensor({32, 8, 14, 14}, 1), w = random_tensor({16, 8, 5, 5}, 2), b = random_tensor({16}, 3);
  falcon::NoGradGuard off;
  for (auto _ : state) benchmark::DoNotOptimize(falcon::ops::conv2d(x, w, b, 1, 2));
}
BENCHMARK(BM_Conv2d);

void BM_SoftmaxRows(benchmark::State& state) {
  const auto z = random_tensor({128, 10}, 1);
  falcon::NoGradGuard off;
  for (auto _ : state) benchmark::DoNotOptimize(falcon::ops::softmax_rows(z));
}
BENCHMARK(BM_SoftmaxRows);

}  // namespace

BENCHMARK_MAIN();
