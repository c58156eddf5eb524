#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "pmp/bandstop.hpp"
#include "pmp/data.hpp"
#include "pmp/histogram.hpp"
#include "pmp/tensor.hpp"
#include "pmp/trainer.hpp"

namespace {

pmp::Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  pmp::Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

void BM_Matmul64(benchmark::State& state) {
  const pmp::Tensor a = random_tensor(64, 64, 1);
  const pmp::Tensor b = random_tensor(64, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(pmp::matmul(a, b));
}
BENCHMARK(BM_Matmul64);

void BM_GateApply(benchmark::State& state) {
  // one desk-scale model's worth of prunable weights
  const pmp::Tensor w = random_tensor(536, 64, 3);
  pmp::BandStopConfig cfg;
  cfg.a = 0.7;
  for (auto _ : state) benchmark::DoNotOptimize(pmp::effective_weights(w, cfg));
}
BENCHMARK(BM_GateApply);

void BM_SoftHistogram(benchmark::State& state) {
  const pmp::Tensor w = random_tensor(536, 64, 4);
  const pmp::BinGrid grid = pmp::make_grid(-1.0, 1.0, 100);
  const std::vector<const pmp::Tensor*> latents{&w};
  for (auto _ : state) benchmark::DoNotOptimize(pmp::soft_histogram_eval(latents, grid));
}
BENCHMARK(BM_SoftHistogram);

void BM_TrainEpochTiny(benchmark::State& state) {
  pmp::RawDataset raw = pmp::synth_dataset(8, 2, 4, 30, 0.05, 11);
  raw.meta.chunks = 8;
  const pmp::Dataset ds = pmp::build_dataset(raw);
  pmp::GcnHyper hyper;
  hyper.s_emb = 8;
  hyper.heads = 4;
  hyper.filters = 8;
  hyper.dense_dim = 16;
  const pmp::GcnConfig gcn = pmp::make_gcn_config(ds, hyper);
  pmp::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.rate = 0.5;
  tc.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(pmp::train_pmp(ds, gcn, tc));
}
BENCHMARK(BM_TrainEpochTiny);

}  // namespace

BENCHMARK_MAIN();
