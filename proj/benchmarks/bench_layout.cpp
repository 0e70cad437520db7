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

#include "phrasegen/implicit_graph.hpp"
#include "phrasegen/scene_composer.hpp"

using namespace phrasegen;

static void BM_ComposePhraseLayout(benchmark::State& state) {
  const auto n = state.range(0);
  const auto res = state.range(1);
  torch::manual_seed(0);
  auto pairs = enumerate_pairs(n);
  auto objects = torch::randn({n, 128});
  auto relations = torch::randn({pairs.size(0), 128});
  auto corners = std::get<0>(torch::sort(torch::rand({n, 2, 2}), 2));
  auto boxes = corners.permute({0, 2, 1}).reshape({n, 4});
  torch::NoGradGuard ng;
  for (auto _ : state) {
    benchmark::DoNotOptimize(compose_phrase_layout(objects, relations, boxes, pairs, res, res));
  }
  state.SetItemsProcessed(state.iterations() * pairs.size(0));
}
BENCHMARK(BM_ComposePhraseLayout)->Args({3, 64})->Args({8, 64})->Args({8, 256})->Unit(benchmark::kMillisecond);
