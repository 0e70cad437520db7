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


#include "phrasegen/discriminators.hpp"

#include "phrasegen/common.hpp"

namespace nn = torch::nn;

namespace phrasegen {

namespace {

nn::Conv2d down(std::int64_t in, std::int64_t out) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1));
}

nn::LeakyReLU lrelu() { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); }

}  // namespace

PatchDiscriminatorImpl::PatchDiscriminatorImpl(std::int64_t resolution_, std::int64_t c, std::int64_t condition_dim_)
    : resolution(resolution_), condition_dim(condition_dim_) {
  if (resolution < 64 || (resolution & (resolution - 1)) != 0) {
    throw ConfigError("patch discriminator supports 64 * 2^k inputs, got " + std::to_string(resolution));
  }
  trunk = register_module("trunk", nn::Sequential());
  trunk->push_back(down(3, c));
  trunk->push_back(nn::BatchNorm2d(c));
  trunk->push_back(lrelu());
  for (std::int64_t r = resolution; r > 64; r /= 2) {
    trunk->push_back(down(c, c));
    trunk->push_back(nn::BatchNorm2d(c));
    trunk->push_back(lrelu());
  }
  trunk->push_back(down(c, 2 * c));
  trunk->push_back(nn::BatchNorm2d(2 * c));
  trunk->push_back(lrelu());
  const std::int64_t out = condition_dim > 0 ? 8 * c : 4 * c;
  last = register_module("last", down(2 * c + condition_dim, out));
  score = register_module("score", nn::Conv2d(nn::Conv2dOptions(out, 1, 1)));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& images, const std::optional<torch::Tensor>& condition) {
  if (images.size(2) != resolution || images.size(3) != resolution) {
    throw ShapeError("patch discriminator built for " + std::to_string(resolution) + " got " +
                     std::to_string(images.size(2)));
  }
  auto x = trunk->forward(images);
  if (condition_dim > 0) {
    if (!condition || condition->size(1) != condition_dim) throw ShapeError("conditional patch discriminator needs its condition");
    x = torch::cat({x, tile(*condition, x.size(2))}, 1);
  }
  return score(last(x));
}

ObjectDiscriminatorImpl::ObjectDiscriminatorImpl(std::int64_t c, std::int64_t hidden, std::int64_t num_classes) {
  features = register_module("features", nn::Sequential(down(3, c), nn::BatchNorm2d(c), lrelu(), down(c, 2 * c),
                                                        nn::BatchNorm2d(2 * c), lrelu(), down(2 * c, 4 * c)));
  fc = register_module("fc", nn::Linear(4 * c, hidden));
  real_head = register_module("real_head", nn::Linear(hidden, 1));
  class_head = register_module("class_head", nn::Linear(hidden, num_classes));
}

ObjectScores ObjectDiscriminatorImpl::forward(const torch::Tensor& crops) {
  auto h = features->forward(crops).mean({2, 3});
  h = torch::leaky_relu(fc(h), 0.2);
  return {real_head(h).squeeze(1), class_head(h)};
}

torch::Tensor object_crops(const torch::Tensor& images, const std::vector<torch::Tensor>& boxes) {
  std::vector<torch::Tensor> index;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    index.push_back(torch::full({boxes[b].size(0)}, static_cast<std::int64_t>(b), torch::kInt64));
  }
  return crop_and_resize(images, torch::cat(boxes), torch::cat(index), images.size(2) / 2);
}

PhraseDiscriminatorImpl::PhraseDiscriminatorImpl(std::int64_t middle_channels, std::int64_t hidden)
    : in_channels(2 * kCropFeatureChannels + middle_channels) {
  body = register_module("body", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in_channels, hidden, 3)),
                                                nn::BatchNorm2d(hidden), lrelu(),
                                                nn::Conv2d(nn::Conv2dOptions(hidden, 1, 1))));
}

torch::Tensor PhraseDiscriminatorImpl::forward(const torch::Tensor& subject, const torch::Tensor& middle,
                                               const torch::Tensor& object) {
  auto x = torch::cat({subject, middle, object}, 1);
  if (x.size(1) != in_channels) throw ShapeError("phrase discriminator got " + std::to_string(x.size(1)) + " channels");
  return body->forward(x);
}

PhraseSelection select_phrases(const std::vector<torch::Tensor>& pairs, int per_image, at::Generator& generator) {
  std::vector<std::int64_t> ex, sub, obj, phr;
  for (std::size_t b = 0; b < pairs.size(); ++b) {
    const auto T = pairs[b].size(0);
    auto order = per_image > 0 && per_image < T ? torch::randperm(T, generator, torch::kInt64).narrow(0, 0, per_image)
                                                : torch::arange(T, torch::kInt64);
    auto pa = pairs[b].accessor<std::int64_t, 2>();
    for (std::int64_t i = 0; i < order.size(0); ++i) {
      const auto p = order[i].item<std::int64_t>();
      ex.push_back(static_cast<std::int64_t>(b));
      sub.push_back(pa[p][0]);
      obj.push_back(pa[p][1]);
      phr.push_back(p);
    }
  }
  auto t = [](const std::vector<std::int64_t>& v) { return torch::tensor(v, torch::kInt64); };
  return {t(ex), t(sub), t(obj), t(phr)};
}

PhraseCropFeatures phrase_crop_features(VggTrunk& vgg, const torch::Tensor& images,
                                        const std::vector<torch::Tensor>& boxes, const PhraseSelection& sel) {
  const auto K = sel.example.size(0);
  std::vector<torch::Tensor> sb, ob;
  sb.reserve(K);
  ob.reserve(K);
  for (std::int64_t k = 0; k < K; ++k) {
    const auto& bx = boxes[sel.example[k].item<std::int64_t>()];
    sb.push_back(bx[sel.subject[k].item<std::int64_t>()]);
    ob.push_back(bx[sel.object[k].item<std::int64_t>()]);
  }
  auto s = torch::stack(sb);
  auto o = torch::stack(ob);
  auto all = torch::cat({s, union_boxes(s, o), o});
  auto feats = extract_crop_features(vgg, images, all, sel.example.repeat({3}));
  auto parts = feats.split(K);
  return {parts[0], parts[1], parts[2]};
}

torch::Tensor tile(const torch::Tensor& v, std::int64_t size) {
  return v.view({v.size(0), v.size(1), 1, 1}).expand({v.size(0), v.size(1), size, size});
}

}  // namespace phrasegen
