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


#include "phrasegen/generator.hpp"

#include "phrasegen/common.hpp"

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace phrasegen {

namespace {

torch::Tensor upsample_to(const torch::Tensor& x, std::int64_t resolution) {
  if (x.size(2) == resolution) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{resolution, resolution})
                               .mode(torch::kNearest));
}

}  // namespace

CrmImpl::CrmImpl(std::int64_t semantic_channels, std::int64_t prior_channels_, std::int64_t out_channels)
    : prior_channels(prior_channels_) {
  const auto in = semantic_channels + prior_channels;
  body = register_module(
      "body", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out_channels, 3).padding(1)),
                             nn::BatchNorm2d(out_channels), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                             nn::Conv2d(nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)),
                             nn::BatchNorm2d(out_channels), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
}

torch::Tensor CrmImpl::forward(const torch::Tensor& semantic, const std::optional<torch::Tensor>& prior,
                               std::int64_t out_resolution) {
  if (semantic.size(2) % out_resolution != 0) {
    throw ShapeError("semantic map " + std::to_string(semantic.size(2)) + " cannot pool to " +
                     std::to_string(out_resolution));
  }
  auto pooled = F::adaptive_avg_pool2d(semantic, F::AdaptiveAvgPool2dFuncOptions(out_resolution));
  if (prior_channels == 0) {
    if (prior) throw ShapeError("CRM without prior input received one");
    return body->forward(pooled);
  }
  if (!prior) throw ShapeError("CRM expects prior features");
  return body->forward(torch::cat({pooled, upsample_to(*prior, out_resolution)}, 1));
}

RefinerImpl::RefinerImpl(const ModelConfig& cfg, int stage_) : stage(stage_) {
  crms = register_module("crms", nn::ModuleList());
  const std::int64_t fused = cfg.fused_channels;
  if (stage == 0) {
    std::int64_t r = 4;
    std::int64_t prev = 0;
    for (int c : cfg.crm_channels) {
      crms->push_back(Crm(fused, prev, c));
      resolutions.push_back(r);
      prev = c;
      r *= 2;
    }
    if (resolutions.back() != cfg.base_resolution) {
      throw ConfigError("crm_channels must hold one width per resolution from 4 to " +
                        std::to_string(cfg.base_resolution));
    }
    if (prev != cfg.hidden_channels) throw ConfigError("last crm width must equal hidden_channels");
  } else {
    const std::int64_t res = cfg.resolution(stage);
    const std::int64_t h = cfg.hidden_channels;
    crms->push_back(Crm(fused, h, 2 * h));
    resolutions.push_back(res / 2);
    crms->push_back(Crm(fused, 2 * h, h));
    resolutions.push_back(res);
  }
}

torch::Tensor RefinerImpl::forward(const torch::Tensor& fused, const std::optional<torch::Tensor>& prev_hidden) {
  std::optional<torch::Tensor> x = stage == 0 ? std::nullopt : prev_hidden;
  if (stage > 0 && !prev_hidden) throw ShapeError("refiner for stage >= 1 needs the previous hidden map");
  for (std::size_t i = 0; i < crms->size(); ++i) {
    x = crms[i]->as<Crm>()->forward(fused, x, resolutions[i]);
  }
  return *x;
}

OutputHeadImpl::OutputHeadImpl(std::int64_t channels) {
  conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)));
  conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(channels, 3, 1)));
}

torch::Tensor OutputHeadImpl::forward(const torch::Tensor& hidden) {
  return torch::tanh(conv2(F::leaky_relu(conv1(hidden), F::LeakyReLUFuncOptions().negative_slope(0.2))));
}

GeneratorImpl::GeneratorImpl(const ModelConfig& cfg_) : cfg(cfg_), merge(parse_layout_merge(cfg_.layout_merge)) {
  cfg.validate();
  box_regressor = register_module("box_regressor", BoxRegressor(cfg));
  graph_maps = register_module("graph_maps", nn::ModuleList());
  contexts = register_module("contexts", nn::ModuleList());
  aggregators = register_module("aggregators", nn::ModuleList());
  refiners = register_module("refiners", nn::ModuleList());
  heads = register_module("heads", nn::ModuleList());
  const std::int64_t D = cfg.phrase_dim;
  for (int s = 0; s < cfg.n_stages; ++s) {
    const std::int64_t res = cfg.resolution(s);
    const bool with_graph_map = s == 0 || cfg.lig_all_stages;
    if (with_graph_map) graph_maps->push_back(GraphSemanticMap(D, cfg.lig_channels, res));
    std::int64_t in = D + (with_graph_map ? cfg.lig_channels : 0);
    if (s > 0) {
      contexts->push_back(PhraseContext(cfg.hidden_channels, D));
      in += cfg.hidden_channels + D;
    }
    aggregators->push_back(HiddenFeatureAggregator(in, cfg.fused_channels));
    refiners->push_back(Refiner(cfg, s));
    heads->push_back(OutputHead(cfg.hidden_channels));
  }
}

torch::Tensor GeneratorImpl::layout_maps(const std::vector<SceneCondition>& conditions,
                                         const std::vector<torch::Tensor>& boxes, std::int64_t resolution) const {
  std::vector<torch::Tensor> maps;
  maps.reserve(conditions.size());
  for (std::size_t b = 0; b < conditions.size(); ++b) {
    const auto& g = conditions[b].graph;
    maps.push_back(compose_phrase_layout(g.objects, g.relations, boxes[b], conditions[b].pairs, resolution,
                                         resolution, merge));
  }
  return torch::stack(maps);
}

GeneratorOutput GeneratorImpl::forward(const std::vector<SceneCondition>& conditions,
                                       const std::optional<std::vector<torch::Tensor>>& boxes) {
  if (conditions.empty()) throw ShapeError("generator needs at least one condition");
  GeneratorOutput out;
  for (const auto& c : conditions) out.predicted_boxes.push_back(box_regressor(c.graph.objects));
  if (boxes) {
    if (boxes->size() != conditions.size()) throw ShapeError("one box set per example required");
    out.layout_boxes = *boxes;
  } else {
    for (const auto& b : out.predicted_boxes) out.layout_boxes.push_back(b.detach());
  }
  std::vector<torch::Tensor> globals, phrases;
  for (const auto& c : conditions) {
    globals.push_back(c.graph.global);
    phrases.push_back(c.graph.phrases);
  }
  auto global = torch::stack(globals);

  std::optional<torch::Tensor> hidden;
  std::size_t graph_map_index = 0;
  for (int s = 0; s < cfg.n_stages; ++s) {
    const std::int64_t res = cfg.resolution(s);
    std::vector<torch::Tensor> maps;
    torch::Tensor upsampled;
    if (s > 0) {
      upsampled = upsample_to(*hidden, res);
      maps.push_back(upsampled);
    }
    maps.push_back(layout_maps(conditions, out.layout_boxes, res));
    if (s > 0) maps.push_back(contexts[s - 1]->as<PhraseContext>()->forward(phrases, upsampled));
    if (s == 0 || cfg.lig_all_stages) {
      maps.push_back(graph_maps[graph_map_index++]->as<GraphSemanticMap>()->forward(global));
    }
    auto fused = aggregators[s]->as<HiddenFeatureAggregator>()->forward(maps);
    hidden = refiners[s]->as<Refiner>()->forward(fused, hidden);
    out.hidden.push_back(*hidden);
    out.images.push_back(heads[s]->as<OutputHead>()->forward(*hidden));
  }
  return out;
}

}  // namespace phrasegen
