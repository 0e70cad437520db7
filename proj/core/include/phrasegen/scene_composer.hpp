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

#include <string>
#include <vector>

#include <torch/torch.h>

#include "phrasegen/config.hpp"

namespace phrasegen {

/// Maps raw network outputs (n x 4) to valid normalized corner boxes:
/// x0 = (1 - eps) sigmoid(a0), x1 = x0 + eps + (1 - eps - x0) sigmoid(a2),
/// likewise for y. Every box lies in [0, 1] with extent at least eps.
torch::Tensor boxes_from_raw(const torch::Tensor& raw, double min_extent);

/// Object vector to box: Linear, ReLU, Linear, then boxes_from_raw.
struct BoxRegressorImpl : torch::nn::Module {
  explicit BoxRegressorImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& object_vectors);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
  double min_extent;
};
TORCH_MODULE(BoxRegressor);

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  std::int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

/// Pixels whose centers lie inside the half-open normalized box.
PixelRect rasterize(double x0, double y0, double x1, double y1, std::int64_t height, std::int64_t width);

enum class LayoutMerge { kMax, kSumThenMax };
LayoutMerge parse_layout_merge(const std::string& name);

/// Phrase layout map, D x H x W. For each phrase (i, k) the subject vector
/// fills box i, the object vector fills box k (elementwise max where both
/// cover), the relation vector fills the rest of the enclosing box. With
/// kMax phrases combine by elementwise maximum over the phrases that cover
/// a pixel; with kSumThenMax they are summed. Uncovered pixels are zero.
torch::Tensor compose_phrase_layout(const torch::Tensor& objects, const torch::Tensor& relations,
                                    const torch::Tensor& boxes, const torch::Tensor& pairs, std::int64_t height,
                                    std::int64_t width, LayoutMerge merge = LayoutMerge::kMax);

/// Global graph vector to a C x H x W map: a linear projection to C x 4 x 4
/// followed by (nearest x2, conv3x3, BN, ReLU) blocks up to H.
struct GraphSemanticMapImpl : torch::nn::Module {
  GraphSemanticMapImpl(std::int64_t in_dim, std::int64_t channels, std::int64_t resolution);
  torch::Tensor forward(const torch::Tensor& global);  // B x in_dim -> B x C x H x W

  torch::nn::Linear fc{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  std::int64_t channels;
};
TORCH_MODULE(GraphSemanticMap);

/// Attention weights of every pixel over the phrases: T_p x (H*W), columns
/// sum to one. u: T_p x D, projected_hidden: D x H x W.
torch::Tensor phrase_pixel_attention(const torch::Tensor& u, const torch::Tensor& projected_hidden);

/// Per-pixel mix of phrase vectors driven by the previous hidden map.
struct PhraseContextImpl : torch::nn::Module {
  PhraseContextImpl(std::int64_t hidden_channels, std::int64_t phrase_dim);

  /// phrases: per example T_p x D; hidden: B x C_h x H x W. Returns B x D x H x W.
  torch::Tensor forward(const std::vector<torch::Tensor>& phrases, const torch::Tensor& hidden);

  torch::nn::Conv2d proj{nullptr};
};
TORCH_MODULE(PhraseContext);

/// conv3x3, BN, ReLU, conv3x3, plus an identity or 1x1 skip.
struct ResBlockImpl : torch::nn::Module {
  ResBlockImpl(std::int64_t in, std::int64_t out);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(ResBlock);

/// Concatenates its inputs along channels and fuses them with two residual
/// blocks into the stage's semantic map.
struct HiddenFeatureAggregatorImpl : torch::nn::Module {
  HiddenFeatureAggregatorImpl(std::int64_t in_channels, std::int64_t out_channels);
  torch::Tensor forward(const std::vector<torch::Tensor>& maps);

  ResBlock block1{nullptr}, block2{nullptr};
  std::int64_t in_channels;
};
TORCH_MODULE(HiddenFeatureAggregator);

}  // namespace phrasegen
