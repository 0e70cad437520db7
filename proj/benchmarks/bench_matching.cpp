// Copyright (c) 2026, The phrasegen Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <benchmark/benchmark.h>

#include "phrasegen/damsm.hpp"

using namespace phrasegen;

static void BM_MatchingLoss(benchmark::State& state) {
  const auto M = state.range(0);
  const auto T = state.range(1);
  torch::manual_seed(0);
  MatchingBatch batch;
  for (std::int64_t i = 0; i < M; ++i) batch.queries.push_back(torch::randn({T, 128}));
  batch.regions = torch::randn({M, 128, 289});
  batch.global_queries = torch::randn({M, 128});
  batch.global_keys = torch::randn({M, 128});
  GammaConfig gamma;
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(damsm_loss(batch, gamma));
}
BENCHMARK(BM_MatchingLoss)->Args({8, 6})->Args({8, 20})->Args({16, 20})->Unit(benchmark::kMillisecond);

static void BM_MatchingLossBackward(benchmark::State& state) {
  const auto M = state.range(0);
  torch::manual_seed(0);
  MatchingBatch batch;
  for (std::int64_t i = 0; i < M; ++i) batch.queries.push_back(torch::randn({12, 128}, torch::requires_grad()));
  batch.regions = torch::randn({M, 128, 289}, torch::requires_grad());
  batch.global_queries = torch::randn({M, 128}, torch::requires_grad());
  batch.global_keys = torch::randn({M, 128}, torch::requires_grad());
  GammaConfig gamma;
  for (auto _ : state) damsm_loss(batch, gamma).backward();
}
BENCHMARK(BM_MatchingLossBackward)->Arg(8)->Unit(benchmark::kMillisecond);
