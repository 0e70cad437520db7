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


#include <random>

#include "doctest_torch.hpp"

#include "oracles.hpp"
#include "phrasegen/common.hpp"
#include "phrasegen/scene_composer.hpp"

using namespace phrasegen;
namespace ora = phrasegen::oracle;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kDouble);

std::vector<std::array<std::int64_t, 2>> pair_list(const torch::Tensor& pairs) {
  std::vector<std::array<std::int64_t, 2>> out;
  for (std::int64_t p = 0; p < pairs.size(0); ++p)
    out.push_back({pairs[p][0].item<std::int64_t>(), pairs[p][1].item<std::int64_t>()});
  return out;
}

torch::Tensor oracle_tensor(const std::vector<ora::Mat>& m) {
  const auto D = static_cast<std::int64_t>(m.size());
  const auto H = static_cast<std::int64_t>(m[0].size());
  const auto W = static_cast<std::int64_t>(m[0][0].size());
  auto t = torch::zeros({D, H, W}, kF64);
  auto a = t.accessor<double, 3>();
  for (std::int64_t d = 0; d < D; ++d)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x) a[d][y][x] = m[d][y][x];
  return t;
}

torch::Tensor all_pairs(std::int64_t n) {
  std::vector<std::int64_t> flat;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = 0; k < n; ++k)
      if (i != k) {
        flat.push_back(i);
        flat.push_back(k);
      }
  return torch::tensor(flat, torch::kInt64).view({-1, 2});
}

}  // namespace

TEST_SUITE("scene_composer") {
  TEST_CASE("box parameterization stays valid") {
    const double eps = 1.0 / 32.0;
    auto boxes = boxes_from_raw(torch::randn({200, 4}, kF64) * 20, eps);
    CHECK(boxes.min().item<double>() >= 0.0);
    CHECK(boxes.max().item<double>() <= 1.0);
    auto w = boxes.select(1, 2) - boxes.select(1, 0);
    auto h = boxes.select(1, 3) - boxes.select(1, 1);
    CHECK(w.min().item<double>() >= eps - 1e-12);
    CHECK(h.min().item<double>() >= eps - 1e-12);

    auto zero = boxes_from_raw(torch::zeros({1, 4}, kF64), eps);
    const double x0 = (1 - eps) / 2;
    CHECK(zero[0][0].item<double>() == doctest::Approx(x0).epsilon(1e-12));
    CHECK(zero[0][2].item<double>() == doctest::Approx(x0 + eps + (1 - eps - x0) / 2).epsilon(1e-12));
  }

  TEST_CASE("rasterization uses pixel centers") {
    auto r = rasterize(0.25, 0.25, 0.75, 0.75, 8, 8);
    CHECK(r.x0 == 2);
    CHECK(r.x1 == 6);
    CHECK(r.y0 == 2);
    CHECK(r.y1 == 6);
    auto full = rasterize(0, 0, 1, 1, 4, 4);
    CHECK((full.x0 == 0 && full.y0 == 0 && full.x1 == 4 && full.y1 == 4));
    CHECK(rasterize(0.13, 0.0, 0.18, 1.0, 4, 4).empty());
    CHECK_THROWS_AS(parse_layout_merge("mean"), ConfigError);
  }

  TEST_CASE("hand-checked two-object layout") {
    auto objects = torch::tensor({{1.0}, {2.0}}, kF64);
    auto relations = torch::tensor({{5.0}, {-3.0}}, kF64);
    auto boxes = torch::tensor({{0.0, 0.0, 0.5, 0.5}, {0.5, 0.5, 1.0, 1.0}}, kF64);
    auto pairs = all_pairs(2);
    auto mx = compose_phrase_layout(objects, relations, boxes, pairs, 4, 4, LayoutMerge::kMax);
    CHECK(mx[0][0][0].item<double>() == 1.0);
    CHECK(mx[0][3][3].item<double>() == 2.0);
    CHECK(mx[0][0][3].item<double>() == 5.0);
    auto sum = compose_phrase_layout(objects, relations, boxes, pairs, 4, 4, LayoutMerge::kSumThenMax);
    CHECK(sum[0][0][0].item<double>() == 2.0);
    CHECK(sum[0][3][3].item<double>() == 4.0);
    CHECK(sum[0][0][3].item<double>() == 2.0);

    // uncovered pixels stay zero, negative features survive
    auto small = torch::tensor({{0.0, 0.0, 0.25, 0.25}, {0.25, 0.0, 0.5, 0.25}}, kF64);
    auto neg = compose_phrase_layout(-objects, relations, small, pairs, 4, 4);
    CHECK(neg[0][3][3].item<double>() == 0.0);
    CHECK(neg[0][0][0].item<double>() == -1.0);
  }

  TEST_CASE("layout equals the brute-force oracle on random scenes") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const std::int64_t n = 2 + trial % 3;
      torch::manual_seed(100 + trial);
      auto objects = torch::randn({n, 3}, kF64);
      auto pairs = all_pairs(n);
      auto relations = torch::randn({pairs.size(0), 3}, kF64);
      auto boxes = torch::zeros({n, 4}, kF64);
      for (std::int64_t i = 0; i < n; ++i) {
        double a = unit(rng), b = unit(rng), c = unit(rng), d = unit(rng);
        boxes[i][0] = std::min(a, b);
        boxes[i][2] = std::max(a, b);
        boxes[i][1] = std::min(c, d);
        boxes[i][3] = std::max(c, d);
      }
      for (bool use_max : {true, false}) {
        auto got = compose_phrase_layout(objects, relations, boxes, pairs, 8, 8,
                                         use_max ? LayoutMerge::kMax : LayoutMerge::kSumThenMax);
        auto want = oracle_tensor(ora::phrase_layout(ora::to_mat(objects), ora::to_mat(relations), ora::to_mat(boxes),
                                                     pair_list(pairs), 8, 8, use_max));
        if (use_max) {
          CHECK(torch::equal(got, want));
        } else {
          CHECK(torch::allclose(got, want, 1e-12, 1e-12));
        }
      }
    }
  }

  TEST_CASE("layout ignores phrase order") {
    torch::manual_seed(32);
    auto objects = torch::randn({3, 4}, kF64);
    auto pairs = all_pairs(3);
    auto relations = torch::randn({6, 4}, kF64);
    auto boxes = torch::tensor({{0.1, 0.1, 0.5, 0.6}, {0.4, 0.3, 0.9, 0.8}, {0.0, 0.6, 0.3, 1.0}}, kF64);
    auto perm = torch::tensor({5, 2, 0, 4, 1, 3}, torch::kInt64);
    auto a = compose_phrase_layout(objects, relations, boxes, pairs, 16, 16);
    auto b = compose_phrase_layout(objects, relations.index_select(0, perm), boxes, pairs.index_select(0, perm), 16, 16);
    CHECK(torch::equal(a, b));
  }

  TEST_CASE("graph semantic map doubles from 4x4") {
    GraphSemanticMap map(128, 16, 64);
    CHECK(map->blocks->size() == 4);
    map->eval();
    auto out = map(torch::randn({2, 128}));
    CHECK(out.sizes() == torch::IntArrayRef{2, 16, 64, 64});
  }

  TEST_CASE("pixel attention matches per-pixel softmax") {
    torch::manual_seed(33);
    auto u = torch::randn({3, 5}, kF64);
    auto h = torch::randn({5, 2, 3}, kF64);
    auto att = phrase_pixel_attention(u, h);
    REQUIRE(att.sizes() == torch::IntArrayRef{3, 6});
    const auto um = ora::to_mat(u);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x) {
        ora::Vec hv(5), s(3);
        for (int d = 0; d < 5; ++d) hv[d] = h[d][y][x].item<double>();
        for (int t = 0; t < 3; ++t) s[t] = ora::dot(um[t], hv);
        const auto ref = ora::softmax(s);
        for (int t = 0; t < 3; ++t) CHECK(att[t][y * 3 + x].item<double>() == doctest::Approx(ref[t]).epsilon(1e-12));
      }
    CHECK(torch::allclose(att.sum(0), torch::ones({6}, kF64), 1e-12, 1e-12));
    CHECK(torch::equal(phrase_pixel_attention(u.narrow(0, 0, 1), h), torch::ones({1, 6}, kF64)));
    auto same = u.narrow(0, 0, 1).expand({4, 5}).contiguous();
    CHECK(torch::allclose(phrase_pixel_attention(same, h), torch::full({4, 6}, 0.25, kF64), 1e-12, 1e-12));
  }

  TEST_CASE("phrase context with one phrase broadcasts it") {
    PhraseContext ctx(16, 8);
    auto u = torch::randn({1, 8});
    auto out = ctx(std::vector<torch::Tensor>{u, u}, torch::randn({2, 16, 4, 4}));
    CHECK(out.sizes() == torch::IntArrayRef{2, 8, 4, 4});
    CHECK(torch::allclose(out[1], u[0].view({8, 1, 1}).expand({8, 4, 4})));
  }

  TEST_CASE("hidden feature aggregator fuses 320 to 256 channels") {
    HiddenFeatureAggregator hfa(320, 256);
    hfa->eval();
    auto out = hfa(std::vector<torch::Tensor>{torch::randn({2, 200, 8, 8}), torch::randn({2, 120, 8, 8})});
    CHECK(out.sizes() == torch::IntArrayRef{2, 256, 8, 8});
  }
}
