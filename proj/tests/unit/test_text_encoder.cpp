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
#include "phrasegen/text_encoder.hpp"

using namespace phrasegen;

namespace {

TextEncoder make_encoder() {
  torch::manual_seed(3);
  TextEncoder te(30, Config::full_scale().model);
  te->eval();
  return te;
}

}  // namespace

TEST_SUITE("text_encoder") {
  TEST_CASE("a 12-token caption gives 256 x 20 features with 12 valid columns") {
    auto te = make_encoder();
    auto ids = torch::zeros({1, 20}, torch::kInt64);
    ids.narrow(1, 0, 12).copy_(torch::arange(2, 14));
    auto wf = te(ids, torch::tensor({12}, torch::kInt64));
    CHECK(wf.words.sizes() == torch::IntArrayRef{1, 256, 20});
    CHECK(wf.sentence.sizes() == torch::IntArrayRef{1, 256});
    CHECK(wf.mask.sum().item<std::int64_t>() == 12);
    CHECK(wf.words.narrow(2, 12, 8).abs().max().item<float>() == 0.0f);
    CHECK(wf.words.narrow(2, 0, 12).abs().sum(1).min().item<float>() > 0.0f);
  }

  TEST_CASE("evaluation mode is deterministic") {
    auto te = make_encoder();
    auto ids = torch::randint(2, 30, {2, 20}, torch::kInt64);
    auto lens = torch::tensor({20, 7}, torch::kInt64);
    auto a = te(ids, lens);
    auto b = te(ids, lens);
    CHECK(torch::equal(a.words, b.words));
    CHECK(torch::equal(a.sentence, b.sentence));
  }

  TEST_CASE("padding content does not reach valid outputs") {
    auto te = make_encoder();
    auto ids = torch::zeros({1, 20}, torch::kInt64);
    ids.narrow(1, 0, 5).copy_(torch::tensor({3, 4, 5, 6, 7}));
    auto lens = torch::tensor({5}, torch::kInt64);
    auto a = te(ids, lens);
    auto noisy = ids.clone();
    noisy.narrow(1, 5, 15).copy_(torch::randint(2, 30, {15}));
    auto b = te(noisy, lens);
    CHECK(torch::allclose(a.words, b.words, 0.0, 0.0));
    CHECK(torch::allclose(a.sentence, b.sentence, 0.0, 0.0));
  }

  TEST_CASE("reversed caption changes the sentence vector") {
    auto te = make_encoder();
    auto ids = torch::tensor({{3, 9, 4, 17, 5}}, torch::kInt64);
    auto rev = ids.flip(1);
    auto lens = torch::tensor({5}, torch::kInt64);
    CHECK_FALSE(torch::allclose(te(ids, lens).sentence, te(rev, lens).sentence));
  }

  TEST_CASE("empty captions are rejected") {
    auto te = make_encoder();
    CHECK_THROWS_AS(te(torch::zeros({1, 20}, torch::kInt64), torch::tensor({0}, torch::kInt64)), DataError);
  }

  TEST_CASE("length mask") {
    auto m = length_mask(torch::tensor({2, 0, 3}), 3);
    CHECK(torch::equal(m, torch::tensor({{true, true, false}, {false, false, false}, {true, true, true}})));
  }
}
