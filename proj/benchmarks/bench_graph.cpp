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

#include "phrasegen/config.hpp"
#include "phrasegen/implicit_graph.hpp"

using namespace phrasegen;

static void BM_GraphConvLayer(benchmark::State& state) {
  const auto n = state.range(0);
  torch::manual_seed(0);
  GraphConvLayer layer(128, 512);
  auto pairs = enumerate_pairs(n);
  auto nodes = torch::randn({n, 128});
  auto edges = torch::randn({pairs.size(0), 128});
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(layer(nodes, edges, pairs));
}
BENCHMARK(BM_GraphConvLayer)->Arg(3)->Arg(8)->Unit(benchmark::kMicrosecond);

static void BM_GraphEncoder(benchmark::State& state) {
  const auto n = state.range(0);
  torch::manual_seed(0);
  ImplicitGraphEncoder ige(8, Config::full_scale().model);
  ige->eval();
  auto pairs = enumerate_pairs(n);
  auto labels = torch::arange(n, torch::kInt64);
  auto relations = torch::randn({pairs.size(0), 128});
  torch::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(ige(ige->build(labels, relations, pairs)).global);
}
BENCHMARK(BM_GraphEncoder)->Arg(3)->Arg(8)->Unit(benchmark::kMicrosecond);
