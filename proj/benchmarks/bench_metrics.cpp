#include <benchmark/benchmark.h>

#include <random>

#include "falcon/metrics.hpp"

namespace {

std::vector<falcon::PredictionRecord> records(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0, 3);
  std::vector<falcon::PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(10);
    double total = 0;
    for (auto& v : p) total += v = std::exp(z(rng));
    for (auto& v : p) v /= total;
    out.push_back(falcon::PredictionRecord::make(i, std::move(p), static_cast<int>(i % 10)));
  }
  return out;
}

void BM_Ece(benchmark::State& state) {
  const auto rs = records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(falcon::ece(rs, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ece)->Arg(1000)->Arg(100000);

void BM_FitTemperature(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0, 3);
  std::vector<falcon::Scalar> logits(5000 * 10);
  for (auto& v : logits) v = static_cast<falcon::Scalar>(z(rng));
  std::vector<int> y(5000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 10);
  const falcon::Tensor t({5000, 10}, logits);
  for (auto _ : state) benchmark::DoNotOptimize(falcon::fit_temperature(t, y));
}
BENCHMARK(BM_FitTemperature)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
