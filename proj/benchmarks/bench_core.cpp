#include <benchmark/benchmark.h>

#include "ncsae/autoencoder.hpp"
#include "ncsae/data.hpp"
#include "ncsae/matrix.hpp"
#include "ncsae/rng.hpp"
#include "ncsae/training.hpp"

namespace {

using namespace ncsae;

// Shapes below follow a 784-10 layer on a 1200-sample batch unless the
// benchmark argument says otherwise.
constexpr std::size_t kBatch = 1200;
constexpr std::size_t kInputs = 784;
constexpr std::size_t kHidden = 10;

void BM_EncodeProduct(benchmark::State& state) {  // X * W1^T
  Rng rng(1);
  const Matrix x = rng_uniform(rng, 0, 1, kBatch, kInputs);
  const Matrix w = rng_uniform(rng, -1, 1, kHidden, kInputs);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_bt(x, w));
  state.SetItemsProcessed(state.iterations() * kBatch * kInputs * kHidden);
}
BENCHMARK(BM_EncodeProduct)->Unit(benchmark::kMillisecond);

void BM_DecodeProduct(benchmark::State& state) {  // H * W2^T
  Rng rng(2);
  const Matrix h = rng_uniform(rng, 0, 1, kBatch, kHidden);
  const Matrix w = rng_uniform(rng, -1, 1, kInputs, kHidden);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_bt(h, w));
  state.SetItemsProcessed(state.iterations() * kBatch * kInputs * kHidden);
}
BENCHMARK(BM_DecodeProduct)->Unit(benchmark::kMillisecond);

void BM_WeightGradient(benchmark::State& state) {  // delta^T * X
  Rng rng(3);
  const Matrix d = rng_uniform(rng, -1, 1, kBatch, kHidden);
  const Matrix x = rng_uniform(rng, 0, 1, kBatch, kInputs);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_at(d, x));
  state.SetItemsProcessed(state.iterations() * kBatch * kInputs * kHidden);
}
BENCHMARK(BM_WeightGradient)->Unit(benchmark::kMillisecond);

void BM_SquareMatmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const Matrix a = rng_uniform(rng, -1, 1, n, n);
  const Matrix b = rng_uniform(rng, -1, 1, n, n);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_SquareMatmul)->RangeMultiplier(2)->Range(32, 256);

void BM_AeLossAndGrad(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const Matrix x = rng_uniform(rng, 0, 1, m, kInputs);
  const AeParams p = init_ae_params(kInputs, kHidden, rng);
  const Hyperparams hp;
  for (auto _ : state) benchmark::DoNotOptimize(ae_loss_and_grad(p, x, hp));
  state.SetItemsProcessed(state.iterations() * m);
}
BENCHMARK(BM_AeLossAndGrad)->Arg(100)->Arg(1200)->Unit(benchmark::kMillisecond);

void BM_FinetuneGrad(benchmark::State& state) {
  Rng rng(6);
  const Matrix x = rng_uniform(rng, 0, 1, kBatch, kInputs);
  Labels y(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) y[i] = i % 3;
  StackedNetwork net;
  net.encoders.push_back(init_ae_params(kInputs, kHidden, rng));
  net.encoders.push_back(init_ae_params(kHidden, kHidden, rng));
  net.softmax_w = rng_uniform(rng, -0.1, 0.1, 3, kHidden);
  net.softmax_b.assign(3, 0.0);
  const Hyperparams hp;
  for (auto _ : state) benchmark::DoNotOptimize(finetune_grad(net, x, y, hp));
}
BENCHMARK(BM_FinetuneGrad)->Unit(benchmark::kMillisecond);

void BM_InfoGain(benchmark::State& state) {
  const auto terms = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  BowCorpus c;
  c.counts = Matrix(2000, terms);
  for (double& v : c.counts.data()) v = rng.next_unit() < 0.05 ? 1.0 : 0.0;
  for (std::size_t t = 0; t < terms; ++t) c.vocab.push_back("t" + std::to_string(t));
  for (std::size_t d = 0; d < 2000; ++d) c.labels.push_back(d % 8);
  for (int k = 0; k < 8; ++k) c.class_names.push_back(std::to_string(k));
  for (auto _ : state) benchmark::DoNotOptimize(information_gain(c));
}
BENCHMARK(BM_InfoGain)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
