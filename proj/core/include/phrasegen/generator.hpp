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

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "phrasegen/config.hpp"
#include "phrasegen/implicit_graph.hpp"
#include "phrasegen/scene_composer.hpp"

namespace phrasegen {

/// Cascaded refinement module: the semantic map average-pooled to the output
/// resolution, concatenated with the nearest-upsampled prior features, then
/// two (conv3x3, BN, LeakyReLU 0.2) blocks. `prior_channels` may be zero.
struct CrmImpl : torch::nn::Module {
  CrmImpl(std::int64_t semantic_channels, std::int64_t prior_channels, std::int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& semantic, const std::optional<torch::Tensor>& prior,
                        std::int64_t out_resolution);

  torch::nn::Sequential body{nullptr};
  std::int64_t prior_channels;
};
TORCH_MODULE(Crm);

/// Chain of CRMs producing the stage's hidden map. Stage 0 starts at 4x4 and
/// doubles up to the base resolution. Later stages run one CRM at the
/// previous resolution on the previous hidden map, then one doubling CRM.
struct RefinerImpl : torch::nn::Module {
  RefinerImpl(const ModelConfig& cfg, int stage);
  torch::Tensor forward(const torch::Tensor& fused, const std::optional<torch::Tensor>& prev_hidden);

  torch::nn::ModuleList crms{nullptr};
  std::vector<std::int64_t> resolutions;
  int stage;
};
TORCH_MODULE(Refiner);

/// conv3x3, LeakyReLU, conv1x1 to RGB, tanh.
struct OutputHeadImpl : torch::nn::Module {
  explicit OutputHeadImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& hidden);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(OutputHead);

struct GeneratorOutput {
  std::vector<torch::Tensor> images;           // per stage, B x 3 x R x R in [-1, 1]
  std::vector<torch::Tensor> hidden;           // per stage, B x C_h x R x R
  std::vector<torch::Tensor> predicted_boxes;  // per example, n x 4
  std::vector<torch::Tensor> layout_boxes;     // boxes used for the layout maps
};

/// Box regression, scene composition and the cascaded decoder. Conditions
/// come from a (frozen) SceneEncoder.
struct GeneratorImpl : torch::nn::Module {
  explicit GeneratorImpl(const ModelConfig& cfg);

  /// `boxes` supplies per-example layout boxes; when absent the predicted
  /// boxes (detached) are used.
  GeneratorOutput forward(const std::vector<SceneCondition>& conditions,
                          const std::optional<std::vector<torch::Tensor>>& boxes = std::nullopt);

  /// Stage-i phrase layout maps for a batch, B x D_p x R x R.
  torch::Tensor layout_maps(const std::vector<SceneCondition>& conditions, const std::vector<torch::Tensor>& boxes,
                            std::int64_t resolution) const;

  ModelConfig cfg;
  LayoutMerge merge;
  BoxRegressor box_regressor{nullptr};
  torch::nn::ModuleList graph_maps{nullptr};  // one per stage that consumes L^ig
  torch::nn::ModuleList contexts{nullptr};    // stages >= 1
  torch::nn::ModuleList aggregators{nullptr};
  torch::nn::ModuleList refiners{nullptr};
  torch::nn::ModuleList heads{nullptr};
};
TORCH_MODULE(Generator);

}  // namespace phrasegen
