#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "falcon/adversary.hpp"
#include "falcon/harness.hpp"
#include "falcon/losses.hpp"
#include "falcon/optimizer.hpp"

namespace {

falcon::Tensor random_batch(std::size_t b, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<falcon::Scalar> data(b * d);
  for (auto& v : data) v = static_cast<falcon::Scalar>(u(rng));
  return falcon::Tensor({b, d}, std::move(data));
}

std::vector<int> labels(std::size_t b) {
  std::vector<int> y(b);
  for (std::size_t i = 0; i < b; ++i) y[i] = static_cast<int>(i % 10);
  return y;
}

// One clean forward/backward/update of mlp-small on a 128-sample batch.
void BM_CleanStep(benchmark::State& state) {
  falcon::Model model(falcon::make_preset("mlp-small", 10), 1);
  model.set_training(true);
  falcon::Optimizer opt({falcon::OptimizerKind::rmsprop, 1e-3}, model);
  const auto x = random_batch(128, 784, 2);
  const auto onehot = falcon::one_hot(labels(128), 10);
  for (auto _ : state) {
    falcon::backward(falcon::cce_loss(falcon::softmax(model.forward(x)), onehot));
    opt.step(model);
  }
}
BENCHMARK(BM_CleanStep)->Unit(benchmark::kMillisecond);

void BM_Fgsm(benchmark::State& state) {
  falcon::Model model(falcon::make_preset("mlp-small", 10), 1);
  const auto x = random_batch(128, 784, 3);
  const auto y = labels(128);
  for (auto _ : state) benchmark::DoNotOptimize(falcon::fgsm_generate(model, x, y, 0.1, {}));
}
BENCHMARK(BM_Fgsm)->Unit(benchmark::kMillisecond);

// A full Algorithm 1 iteration: clean step, FGSM batch, adversarial step.
void BM_FalconStep(benchmark::State& state) {
  const auto data = falcon::gen_synthetic_shift(1, 4096, 0.0);
  falcon::TrainConfig cfg;
  cfg.model = "mlp-tiny";
  cfg.dropout = 0;
  cfg.max_steps = 32;
  cfg.patience = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(falcon::train_falcon(falcon::build_model(cfg, data.train), data.train, cfg));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_FalconStep)->Unit(benchmark::kMillisecond);

void BM_LenetForward(benchmark::State& state) {
  falcon::Model model(falcon::make_preset("lenet-like", 10), 1);
  auto x = random_batch(64, 784, 4);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict_logits(x));
}
BENCHMARK(BM_LenetForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
