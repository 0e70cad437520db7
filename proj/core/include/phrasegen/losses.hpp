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


#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "phrasegen/config.hpp"

namespace phrasegen {

/// The eight generator loss terms in weight order.
enum LossTerm : std::size_t {
  kGanImage = 0,
  kL1Image,
  kPerceptualImage,
  kGanObject,
  kClassObject,
  kGanPhrase,
  kDamsmPhrase,
  kBox,
  kNumLossTerms
};

const std::array<std::string, kNumLossTerms>& loss_term_names();

struct LossBundle {
  std::array<torch::Tensor, kNumLossTerms> terms;
  std::array<double, kNumLossTerms> weights{};

  explicit LossBundle(const LossWeights& w);

  /// Sum of weight * term. Disabled terms are zero tensors.
  torch::Tensor total() const;
  /// Throws NumericError naming every non-finite term.
  void check_finite() const;
  nlohmann::json values() const;
};

/// L1 box error: summed over objects and coordinates, averaged over examples.
torch::Tensor box_l1_loss(const std::vector<torch::Tensor>& predicted, const std::vector<torch::Tensor>& target);

/// Mean logistic loss pushing logits towards `real` (1) or fake (0).
torch::Tensor logistic_loss(const torch::Tensor& logits, bool real);

/// Unconditional discriminator loss: real towards 1, fake towards 0.
torch::Tensor discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);

/// Conditional discriminator loss: matched real towards 1, plus half of
/// (matched fake towards 0) and half of (mismatched real towards 0).
torch::Tensor conditional_discriminator_loss(const torch::Tensor& real_matched, const torch::Tensor& fake_matched,
                                             const torch::Tensor& real_mismatched);

/// Non-saturating generator loss -E log sigmoid(D(fake)).
torch::Tensor generator_adversarial_loss(const torch::Tensor& fake_logits);

/// Mismatched conditions: every row replaced by its neighbour (roll by one).
torch::Tensor mismatch(const torch::Tensor& conditions);

}  // namespace phrasegen
