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


#include "phrasegen/scene_composer.hpp"

#include <cmath>

#include "phrasegen/common.hpp"

namespace nn = torch::nn;
namespace F = torch::nn::functional;
using torch::indexing::Slice;

namespace phrasegen {

torch::Tensor boxes_from_raw(const torch::Tensor& raw, double eps) {
  if (raw.dim() != 2 || raw.size(1) != 4) throw ShapeError("raw box outputs must be n x 4");
  auto s = torch::sigmoid(raw);
  auto x0 = (1.0 - eps) * s.select(1, 0);
  auto y0 = (1.0 - eps) * s.select(1, 1);
  auto x1 = x0 + eps + (1.0 - eps - x0) * s.select(1, 2);
  auto y1 = y0 + eps + (1.0 - eps - y0) * s.select(1, 3);
  return torch::stack({x0, y0, x1, y1}, 1);
}

BoxRegressorImpl::BoxRegressorImpl(const ModelConfig& cfg) : min_extent(cfg.min_box_extent) {
  fc1 = register_module("fc1", nn::Linear(cfg.phrase_dim, cfg.box_hidden));
  fc2 = register_module("fc2", nn::Linear(cfg.box_hidden, 4));
}

torch::Tensor BoxRegressorImpl::forward(const torch::Tensor& object_vectors) {
  return boxes_from_raw(fc2(torch::relu(fc1(object_vectors))), min_extent);
}

PixelRect rasterize(double x0, double y0, double x1, double y1, std::int64_t height, std::int64_t width) {
  // First and one-past-last cell whose center c satisfies lo <= c < hi.
  auto span = [](double lo, double hi, std::int64_t n) {
    std::int64_t first = n, last = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double c = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      if (c >= lo && c < hi) {
        first = std::min(first, i);
        last = i + 1;
      }
    }
    return std::pair{first, std::max(first, last)};
  };
  auto [cx0, cx1] = span(x0, x1, width);
  auto [cy0, cy1] = span(y0, y1, height);
  return {cx0, cy0, cx1, cy1};
}

LayoutMerge parse_layout_merge(const std::string& name) {
  if (name == "max") return LayoutMerge::kMax;
  if (name == "sum_then_max") return LayoutMerge::kSumThenMax;
  throw ConfigError("unknown layout_merge '" + name + "' (expected max or sum_then_max)");
}

torch::Tensor compose_phrase_layout(const torch::Tensor& objects, const torch::Tensor& relations,
                                    const torch::Tensor& boxes, const torch::Tensor& pairs, std::int64_t H,
                                    std::int64_t W, LayoutMerge merge) {
  const auto n = objects.size(0);
  const auto D = objects.size(1);
  if (boxes.size(0) != n || boxes.size(1) != 4) throw ShapeError("one box per object required");
  if (relations.size(0) != pairs.size(0) || relations.size(1) != D) throw ShapeError("one relation per phrase required");
  auto b = boxes.detach().to(torch::kCPU, torch::kDouble).contiguous();
  auto ba = b.accessor<double, 2>();
  auto pc = pairs.to(torch::kCPU, torch::kInt64).contiguous();
  auto pa = pc.accessor<std::int64_t, 2>();

  std::vector<PixelRect> rects;
  rects.reserve(n);
  for (std::int64_t i = 0; i < n; ++i) {
    rects.push_back(rasterize(ba[i][0], ba[i][1], ba[i][2], ba[i][3], H, W));
    if (rects.back().empty()) log::debug("object box ", i, " covers no pixel at ", H, "x", W);
  }

  const bool use_max = merge == LayoutMerge::kMax;
  auto layout = use_max ? torch::full({D, H, W}, -std::numeric_limits<double>::infinity(), objects.options())
                        : torch::zeros({D, H, W}, objects.options());
  auto covered = torch::zeros({H, W}, torch::kBool);

  auto fill = [D](torch::Tensor& patch, const PixelRect& r, const PixelRect& origin, const torch::Tensor& v) {
    if (r.empty()) return;
    patch.index_put_({Slice(), Slice(r.y0 - origin.y0, r.y1 - origin.y0), Slice(r.x0 - origin.x0, r.x1 - origin.x0)},
                     v.view({D, 1, 1}));
  };

  for (std::int64_t p = 0; p < pairs.size(0); ++p) {
    const auto i = pa[p][0];
    const auto k = pa[p][1];
    const auto u = rasterize(std::min(ba[i][0], ba[k][0]), std::min(ba[i][1], ba[k][1]),
                             std::max(ba[i][2], ba[k][2]), std::max(ba[i][3], ba[k][3]), H, W);
    if (u.empty()) {
      log::debug("phrase ", p, " covers no pixel at ", H, "x", W);
      continue;
    }
    const auto& ri = rects[i];
    const auto& rk = rects[k];
    auto patch = relations[p].view({D, 1, 1}).expand({D, u.y1 - u.y0, u.x1 - u.x0}).clone();
    fill(patch, ri, u, objects[i]);
    fill(patch, rk, u, objects[k]);
    const PixelRect both{std::max(ri.x0, rk.x0), std::max(ri.y0, rk.y0), std::min(ri.x1, rk.x1),
                         std::min(ri.y1, rk.y1)};
    fill(patch, both, u, torch::maximum(objects[i], objects[k]));

    const auto where = std::vector<torch::indexing::TensorIndex>{Slice(), Slice(u.y0, u.y1), Slice(u.x0, u.x1)};
    auto current = layout.index(where);
    layout.index_put_(where, use_max ? torch::maximum(current, patch) : current + patch);
    covered.index_put_({Slice(u.y0, u.y1), Slice(u.x0, u.x1)}, true);
  }
  if (!use_max) return layout;
  return torch::where(covered.to(layout.device()), layout, torch::zeros({}, layout.options()));
}

GraphSemanticMapImpl::GraphSemanticMapImpl(std::int64_t in_dim, std::int64_t channels_, std::int64_t resolution)
    : channels(channels_) {
  if (resolution < 4 || (resolution & (resolution - 1)) != 0) {
    throw ConfigError("graph semantic map resolution must be a power of two >= 4, got " + std::to_string(resolution));
  }
  fc = register_module("fc", nn::Linear(in_dim, channels * 16));
  blocks = register_module("blocks", nn::ModuleList());
  for (std::int64_t r = 4; r < resolution; r *= 2) {
    blocks->push_back(nn::Sequential(nn::Upsample(nn::UpsampleOptions()
                                                      .scale_factor(std::vector<double>{2.0, 2.0})
                                                      .mode(torch::kNearest)),
                                     nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)),
                                     nn::BatchNorm2d(channels), nn::ReLU()));
  }
}

torch::Tensor GraphSemanticMapImpl::forward(const torch::Tensor& global) {
  auto x = fc(global).view({global.size(0), channels, 4, 4});
  for (const auto& block : *blocks) x = block->as<nn::Sequential>()->forward(x);
  return x;
}

torch::Tensor phrase_pixel_attention(const torch::Tensor& u, const torch::Tensor& projected_hidden) {
  if (u.size(0) == 0) throw ShapeError("phrase context needs at least one phrase");
  auto scores = u.matmul(projected_hidden.flatten(1));  // T_p x HW
  return torch::softmax(scores, 0);
}

PhraseContextImpl::PhraseContextImpl(std::int64_t hidden_channels, std::int64_t phrase_dim) {
  proj = register_module("proj", nn::Conv2d(nn::Conv2dOptions(hidden_channels, phrase_dim, 1)));
}

torch::Tensor PhraseContextImpl::forward(const std::vector<torch::Tensor>& phrases, const torch::Tensor& hidden) {
  if (static_cast<std::int64_t>(phrases.size()) != hidden.size(0)) throw ShapeError("one phrase set per example");
  auto projected = proj(hidden);
  std::vector<torch::Tensor> out;
  out.reserve(phrases.size());
  for (std::size_t b = 0; b < phrases.size(); ++b) {
    auto beta = phrase_pixel_attention(phrases[b], projected[b]);
    out.push_back(phrases[b].t().matmul(beta).view({phrases[b].size(1), hidden.size(2), hidden.size(3)}));
  }
  return torch::stack(out);
}

ResBlockImpl::ResBlockImpl(std::int64_t in, std::int64_t out) {
  conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
  bn = register_module("bn", nn::BatchNorm2d(out));
  conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1)));
  if (in != out) skip = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in, out, 1)));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
  auto y = conv2(torch::relu(bn(conv1(x))));
  return y + (skip ? skip(x) : x);
}

HiddenFeatureAggregatorImpl::HiddenFeatureAggregatorImpl(std::int64_t in, std::int64_t out) : in_channels(in) {
  block1 = register_module("block1", ResBlock(in, out));
  block2 = register_module("block2", ResBlock(out, out));
}

torch::Tensor HiddenFeatureAggregatorImpl::forward(const std::vector<torch::Tensor>& maps) {
  for (const auto& m : maps) {
    if (m.size(0) != maps[0].size(0) || m.size(2) != maps[0].size(2) || m.size(3) != maps[0].size(3)) {
      throw ShapeError("aggregator inputs differ in batch or spatial size");
    }
  }
  auto x = torch::cat(maps, 1);
  if (x.size(1) != in_channels) {
    throw ShapeError("aggregator expected " + std::to_string(in_channels) + " channels, got " +
                     std::to_string(x.size(1)));
  }
  return block2(block1(x));
}

}  // namespace phrasegen
