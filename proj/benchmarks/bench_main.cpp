/* Copyright 2026 The csnas Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <benchmark/benchmark.h>

#include <vector>

#include "csnas/cell_space.hpp"
#include "csnas/contrastive_loss.hpp"
#include "csnas/data_pipeline.hpp"
#include "csnas/mini_encoder.hpp"
#include "csnas/rng.hpp"
#include "csnas/tpe.hpp"

namespace csnas {
namespace {

ContrastiveBatch random_batch(std::size_t K, std::size_t M, std::size_t p, Rng& rng) {
  ContrastiveBatch b;
  b.views = M;
  b.dim = p;
  for (std::size_t i = 0; i < K; ++i) b.ids.push_back(i);
  auto fill = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = rng.normal();
  };
  fill(b.anchors, K * p);
  fill(b.targets, K * p);
  fill(b.view_projections, K * M * p);
  return b;
}

// Full-size batch: K = 150, M = 2, p = 128.
void BM_BatchLoss(benchmark::State& state) {
  Rng rng(1);
  const auto b = random_batch(static_cast<std::size_t>(state.range(0)), 2, 128, rng);
  const MemoryBank bank(128, 0.5);
  const bool grad = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_batch(b, bank, grad).mean);
}
BENCHMARK(BM_BatchLoss)->Args({150, 0})->Args({150, 1})->Args({32, 1})->Unit(benchmark::kMillisecond);

void BM_Suggest(benchmark::State& state) {
  Rng rng(2);
  std::vector<TrialRecord> history;
  for (std::size_t i = 0; i < 100; ++i) {
    TrialRecord r;
    r.index = i;
    r.theta = random_theta(28, 8, rng);
    r.loss = rng.normal();
    history.push_back(std::move(r));
  }
  TpeConfig cfg;
  cfg.n_candidates = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Rng r(3);
    benchmark::DoNotOptimize(suggest(history, 28, cfg, r));
  }
}
BENCHMARK(BM_Suggest)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

// One training step of the desk-scale encoder (N=2, L=3, C=4, 16x16).
void BM_EncoderStep(benchmark::State& state) {
  SyntheticConfig sc;
  const auto data = make_synthetic_dataset(sc);
  AugmentPolicy aug;
  aug.crop_size = 16;
  aug.pad = 2;
  EncoderConfig cfg;
  cfg.layers = 3;
  cfg.channels = 4;
  cfg.input_height = cfg.input_width = 16;
  cfg.proj_dim = 16;
  MiniNetwork net(random_genotype(2, 7), cfg, 1);
  MemoryBank bank(16, 0.5);
  Rng rng(4);
  const auto mb = make_minibatch(data, static_cast<std::size_t>(state.range(0)), 2, aug, rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.loss_and_gradient(mb, bank, 0.07, 0.5).loss);
}
BENCHMARK(BM_EncoderStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Augment(benchmark::State& state) {
  Image img(32, 32);
  AugmentPolicy aug;
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(augment(img, aug, rng));
}
BENCHMARK(BM_Augment);

}  // namespace
}  // namespace csnas

BENCHMARK_MAIN();
