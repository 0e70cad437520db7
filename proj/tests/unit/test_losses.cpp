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


#include <cmath>

#include "doctest_torch.hpp"

#include "phrasegen/backbones.hpp"
#include "phrasegen/common.hpp"
#include "phrasegen/losses.hpp"

using namespace phrasegen;

namespace {

double softplus(double x) { return std::log1p(std::exp(x)); }

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("default weights in term order") {
    LossBundle bundle{LossWeights{}};
    const std::array<double, kNumLossTerms> expected{1.0, 1.0, 0.5, 1.0, 0.1, 0.5, 5.0, 10.0};
    CHECK(bundle.weights == expected);
    CHECK(loss_term_names()[kBox] == "box");
    CHECK(bundle.total().item<double>() == 0.0);
  }

  TEST_CASE("total is the weighted sum") {
    LossBundle bundle{LossWeights{}};
    double expected = 0.0;
    for (std::size_t i = 0; i < kNumLossTerms; ++i) {
      const double v = 0.37 * static_cast<double>(i + 1) - 1.1;
      bundle.terms[i] = torch::tensor(v, torch::kDouble);
      expected += bundle.weights[i] * v;
    }
    CHECK(bundle.total().item<double>() == doctest::Approx(expected).epsilon(1e-7));
    CHECK(bundle.values()["box"].get<double>() == doctest::Approx(0.37 * 8 - 1.1));
  }

  TEST_CASE("non-finite terms are reported by name") {
    LossBundle bundle{LossWeights{}};
    bundle.terms[kGanPhrase] = torch::tensor(std::nan(""));
    try {
      bundle.check_finite();
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("gan_phr") != std::string::npos);
    }
  }

  TEST_CASE("box loss hand example") {
    auto loss = box_l1_loss({torch::tensor({{0.1, 0.1, 0.5, 0.5}}, torch::kDouble)},
                            {torch::tensor({{0.15, 0.1, 0.45, 0.6}}, torch::kDouble)});
    CHECK(loss.item<double>() == doctest::Approx(0.2).epsilon(1e-12));
    CHECK_THROWS_AS(box_l1_loss({}, {}), ShapeError);
  }

  TEST_CASE("logistic losses") {
    CHECK(logistic_loss(torch::zeros({4}, torch::kDouble), true).item<double>() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(discriminator_loss(torch::zeros({3}), torch::zeros({3})).item<double>() ==
          doctest::Approx(2 * std::log(2.0)).epsilon(1e-6));
    CHECK(discriminator_loss(torch::full({3}, 20.0, torch::kDouble), torch::full({3}, -20.0, torch::kDouble))
              .item<double>() < 1e-6);
    CHECK(generator_adversarial_loss(torch::full({2}, 20.0, torch::kDouble)).item<double>() < 1e-6);

    auto rm = torch::tensor({1.5, -0.5}, torch::kDouble);
    auto fm = torch::tensor({0.3, 2.0}, torch::kDouble);
    auto rx = torch::tensor({-1.0, 0.7}, torch::kDouble);
    const double expected = (softplus(-1.5) + softplus(0.5)) / 2 + 0.5 * (softplus(0.3) + softplus(2.0)) / 2 +
                            0.5 * (softplus(-1.0) + softplus(0.7)) / 2;
    CHECK(conditional_discriminator_loss(rm, fm, rx).item<double>() == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("mismatch swaps a two-sample batch") {
    auto c = torch::tensor({{1.0, 2.0}, {3.0, 4.0}});
    CHECK(torch::equal(mismatch(c), torch::tensor({{3.0, 4.0}, {1.0, 2.0}})));
    auto three = torch::arange(3).view({3, 1});
    auto rolled = mismatch(three);
    for (int i = 0; i < 3; ++i) CHECK(rolled[i][0].item<int>() != three[i][0].item<int>());
  }

  TEST_CASE("image reconstruction terms vanish for identical images") {
    auto vgg = make_stub_vgg({8, 16, 32, 64, 512}, 5);
    auto img = torch::rand({2, 3, 64, 64}) * 2 - 1;
    torch::NoGradGuard ng;
    CHECK(perceptual_l1(*vgg, img, img).item<double>() == 0.0);
    CHECK((img - img).abs().mean().item<double>() == 0.0);
    CHECK(perceptual_l1(*vgg, img, -img).item<double>() > 0.0);
  }
}
