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


#include "doctest_torch.hpp"

#include "phrasegen/common.hpp"
#include "phrasegen/config.hpp"
#include "phrasegen/generator.hpp"

using namespace phrasegen;

namespace {

std::vector<SceneCondition> conditions(SceneEncoder& scene, const ModelConfig& cfg, std::int64_t batch) {
  torch::NoGradGuard ng;
  auto ids = torch::randint(2, 30, {batch, 12}, torch::kInt64);
  auto lens = torch::full({batch}, 12, torch::kInt64);
  std::vector<torch::Tensor> labels;
  for (std::int64_t b = 0; b < batch; ++b) labels.push_back(torch::tensor({0, 2, 4}, torch::kInt64));
  return scene(ids, lens, labels, torch::randn({batch, cfg.noise_dim}));
}

}  // namespace

TEST_SUITE("generator") {
  TEST_CASE("CRM fuses a 1280-channel input into 512 channels") {
    Crm crm(256, 1024, 512);
    crm->eval();
    auto first = crm->body->ptr(0)->as<torch::nn::Conv2d>();
    REQUIRE(first != nullptr);
    CHECK(first->weight.size(1) == 1280);
    torch::NoGradGuard ng;
    auto out = crm(torch::randn({1, 256, 64, 64}), torch::randn({1, 1024, 8, 8}), 16);
    CHECK(out.sizes() == torch::IntArrayRef{1, 512, 16, 16});
    Crm first_crm(256, 0, 64);
    first_crm->eval();
    CHECK(first_crm(torch::randn({1, 256, 64, 64}), std::nullopt, 4).sizes() == torch::IntArrayRef{1, 64, 4, 4});
  }

  TEST_CASE("three stages at 64, 128 and 256") {
    torch::manual_seed(41);
    const auto cfg = Config::full_scale().model;
    SceneEncoder scene(torch::randn({30, cfg.word_dim}), torch::randn({5, cfg.word_dim}), cfg);
    freeze(*scene);
    Generator gen(cfg);
    gen->eval();
    auto conds = conditions(scene, cfg, 1);
    torch::NoGradGuard ng;
    auto out = gen(conds);
    REQUIRE(out.images.size() == 3);
    const std::int64_t expected[] = {64, 128, 256};
    for (int s = 0; s < 3; ++s) {
      CHECK(out.images[s].sizes() == torch::IntArrayRef{1, 3, expected[s], expected[s]});
      CHECK(out.images[s].abs().max().item<float>() <= 1.0f);
      CHECK(out.hidden[s].size(1) == cfg.hidden_channels);
    }
    CHECK(out.predicted_boxes[0].sizes() == torch::IntArrayRef{3, 4});
    CHECK(torch::equal(out.layout_boxes[0], out.predicted_boxes[0]));
    auto maps = gen->layout_maps(conds, out.layout_boxes, 32);
    CHECK(maps.sizes() == torch::IntArrayRef{1, cfg.phrase_dim, 32, 32});
  }

  TEST_CASE("gradients reach the generator but not the frozen scene encoder") {
    torch::manual_seed(42);
    const auto cfg = Config::desk().model;
    SceneEncoder scene(torch::randn({30, cfg.word_dim}), torch::randn({5, cfg.word_dim}), cfg);
    freeze(*scene);
    Generator gen(cfg);
    gen->train();
    auto conds = conditions(scene, cfg, 2);
    std::vector<torch::Tensor> boxes(2, torch::tensor({{0.1, 0.1, 0.5, 0.5}, {0.4, 0.2, 0.9, 0.7}, {0.0, 0.5, 0.6, 1.0}}));
    auto out = gen(conds, boxes);
    CHECK(torch::equal(out.layout_boxes[1], boxes[1]));
    (out.images.back().mean() + out.predicted_boxes[0].sum()).backward();
    int with_grad = 0, total = 0;
    for (const auto& p : gen->named_parameters()) {
      ++total;
      if (!p.value().grad().defined()) continue;
      CHECK(torch::isfinite(p.value().grad()).all().item<bool>());
      if (p.value().grad().abs().sum().item<double>() > 0) ++with_grad;
    }
    CHECK(with_grad > total / 2);
    CHECK(gen->box_regressor->fc2->weight.grad().abs().sum().item<double>() > 0);
    for (const auto& p : scene->parameters()) {
      CHECK(!p.requires_grad());
      CHECK(!p.grad().defined());
    }
  }
}
