#include <benchmark/benchmark.h>

#include <random>

#include "falcon/shift.hpp"

namespace {

falcon::Tensor image() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<falcon::Scalar> data(28 * 28);
  for (auto& v : data) v = static_cast<falcon::Scalar>(u(rng));
  return falcon::Tensor({28, 28}, std::move(data));
}

void BM_Perturb(benchmark::State& state) {
  const auto kind = static_cast<falcon::PerturbationKind>(state.range(0));
  const auto img = image();
  const auto spec = falcon::PerturbationSpec::make(kind, 50);
  for (auto _ : state) benchmark::DoNotOptimize(falcon::apply_perturbation(img, spec, 7));
  state.SetLabel(std::string(falcon::to_string(kind)));
}
BENCHMARK(BM_Perturb)->DenseRange(0, falcon::kPerturbationKinds - 1);

}  // namespace

BENCHMARK_MAIN();
