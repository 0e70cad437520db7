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


#include "phrasegen/losses.hpp"

#include "phrasegen/common.hpp"

namespace F = torch::nn::functional;

namespace phrasegen {

const std::array<std::string, kNumLossTerms>& loss_term_names() {
  static const std::array<std::string, kNumLossTerms> names{
      "gan_img", "l1_img", "perceptual_img", "gan_obj", "ac_obj", "gan_phr", "damsm_phr", "box"};
  return names;
}

LossBundle::LossBundle(const LossWeights& w) : weights(w.lambda) {
  for (auto& t : terms) t = torch::zeros({});
}

torch::Tensor LossBundle::total() const {
  auto sum = torch::zeros({}, terms[0].options());
  for (std::size_t i = 0; i < kNumLossTerms; ++i) sum = sum + weights[i] * terms[i];
  return sum;
}

void LossBundle::check_finite() const {
  std::string bad;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) {
    if (!std::isfinite(terms[i].item<double>())) bad += " " + loss_term_names()[i];
  }
  if (!bad.empty()) throw NumericError("non-finite generator loss terms:" + bad + " (" + values().dump() + ")");
}

nlohmann::json LossBundle::values() const {
  nlohmann::json j;
  for (std::size_t i = 0; i < kNumLossTerms; ++i) j[loss_term_names()[i]] = terms[i].item<double>();
  return j;
}

torch::Tensor box_l1_loss(const std::vector<torch::Tensor>& predicted, const std::vector<torch::Tensor>& target) {
  if (predicted.size() != target.size() || predicted.empty()) throw ShapeError("box loss needs matching non-empty sets");
  auto total = torch::zeros({}, predicted[0].options());
  for (std::size_t b = 0; b < predicted.size(); ++b) total = total + (predicted[b] - target[b]).abs().sum();
  return total / static_cast<double>(predicted.size());
}

torch::Tensor logistic_loss(const torch::Tensor& logits, bool real) {
  // -log sigmoid(x) = softplus(-x); -log(1 - sigmoid(x)) = softplus(x)
  return F::softplus(real ? -logits : logits).mean();
}

torch::Tensor discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  return logistic_loss(real_logits, true) + logistic_loss(fake_logits, false);
}

torch::Tensor conditional_discriminator_loss(const torch::Tensor& real_matched, const torch::Tensor& fake_matched,
                                             const torch::Tensor& real_mismatched) {
  return logistic_loss(real_matched, true) + 0.5 * logistic_loss(fake_matched, false) +
         0.5 * logistic_loss(real_mismatched, false);
}

torch::Tensor generator_adversarial_loss(const torch::Tensor& fake_logits) { return logistic_loss(fake_logits, true); }

torch::Tensor mismatch(const torch::Tensor& conditions) { return conditions.roll(1, 0); }

}  // namespace phrasegen
