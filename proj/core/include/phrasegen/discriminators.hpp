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

#include <torch/torch.h>

#include "phrasegen/backbones.hpp"
#include "phrasegen/config.hpp"

namespace phrasegen {

/// Strided patch discriminator with a 1 x 8 x 8 score map at any supported
/// resolution (64 * 2^k). With `condition_dim` > 0 the condition vector is
/// tiled over the 16 x 16 features before the last strided conv.
struct PatchDiscriminatorImpl : torch::nn::Module {
  PatchDiscriminatorImpl(std::int64_t resolution, std::int64_t channels, std::int64_t condition_dim = 0);

  torch::Tensor forward(const torch::Tensor& images, const std::optional<torch::Tensor>& condition = std::nullopt);

  torch::nn::Sequential trunk{nullptr};
  torch::nn::Conv2d last{nullptr}, score{nullptr};
  std::int64_t resolution, condition_dim;
};
TORCH_MODULE(PatchDiscriminator);

struct ObjectScores {
  torch::Tensor realness;  // K
  torch::Tensor logits;    // K x C
};

/// Per-object realness and category logits from crops at half the image size.
struct ObjectDiscriminatorImpl : torch::nn::Module {
  ObjectDiscriminatorImpl(std::int64_t channels, std::int64_t hidden, std::int64_t num_classes);

  ObjectScores forward(const torch::Tensor& crops);

  torch::nn::Sequential features{nullptr};
  torch::nn::Linear fc{nullptr}, real_head{nullptr}, class_head{nullptr};
};
TORCH_MODULE(ObjectDiscriminator);

/// Crops every object of every image to half the image side.
torch::Tensor object_crops(const torch::Tensor& images, const std::vector<torch::Tensor>& boxes);

/// Scores a phrase from subject, middle and object features (each K x C x 4
/// x 4). The middle slot holds the union-box crop features (unconditional)
/// or the tiled relation vector (conditional).
struct PhraseDiscriminatorImpl : torch::nn::Module {
  PhraseDiscriminatorImpl(std::int64_t middle_channels, std::int64_t hidden);

  torch::Tensor forward(const torch::Tensor& subject, const torch::Tensor& middle, const torch::Tensor& object);

  torch::nn::Sequential body{nullptr};
  std::int64_t in_channels;
};
TORCH_MODULE(PhraseDiscriminator);

/// Phrase selection for one batch: rows (example, subject, object, phrase).
struct PhraseSelection {
  torch::Tensor example;   // K
  torch::Tensor subject;   // K, object index within the example
  torch::Tensor object;    // K
  torch::Tensor phrase;    // K, phrase index within the example
};

/// Picks up to `per_image` phrases per example (all when 0). Deterministic
/// in `generator`.
PhraseSelection select_phrases(const std::vector<torch::Tensor>& pairs, int per_image, at::Generator& generator);

struct PhraseCropFeatures {
  torch::Tensor subject, predicate, object;  // K x 512 x 4 x 4
};

/// Subject, union and object crops of the selected phrases through the VGG trunk.
PhraseCropFeatures phrase_crop_features(VggTrunk& vgg, const torch::Tensor& images,
                                        const std::vector<torch::Tensor>& boxes, const PhraseSelection& sel);

/// Tiles K x D vectors to K x D x size x size.
torch::Tensor tile(const torch::Tensor& v, std::int64_t size);

}  // namespace phrasegen
