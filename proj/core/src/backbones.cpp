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


#include "phrasegen/backbones.hpp"

#include <cmath>
#include <filesystem>

#include <torch/script.h>

#include "phrasegen/common.hpp"

namespace nn = torch::nn;
namespace F = torch::nn::functional;
using torch::indexing::Slice;

namespace phrasegen {

namespace {

// He-uniform weights and zero biases drawn from a private generator, so a
// stub's weights depend only on its seed.
void reinitialize(nn::Module& module, std::uint64_t seed) {
  torch::NoGradGuard guard;
  auto gen = make_generator(seed);
  for (auto& p : module.named_parameters(true)) {
    auto& t = p.value();
    if (t.dim() >= 2) {
      const double fan_in = static_cast<double>(t.numel() / t.size(0));
      const double bound = std::sqrt(6.0 / fan_in);
      t.uniform_(-bound, bound, gen);
    } else {
      t.zero_();
    }
  }
}

std::vector<std::pair<std::string, torch::Tensor>> named_state(const torch::jit::Module& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : m.named_parameters(true)) out.emplace_back(p.name, p.value);
  for (const auto& b : m.named_buffers(true)) out.emplace_back(b.name, b.value);
  return out;
}

torch::jit::Module load_frozen_script(const std::string& path, const std::string& what) {
  if (path.empty() || !std::filesystem::exists(path)) {
    throw PrerequisiteError(
        "export-backbones",
        "pretrained " + what + " weights not found at '" + path +
            "'; run `python3 tools/export_backbones.py --out <dir>` (downloads torchvision weights) "
            "and set model.backbone.inception_path / vgg_path, or use model.backbone.kind = \"stub\"");
  }
  torch::jit::Module m;
  try {
    m = torch::jit::load(path);
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot load " + what + " export '" + path + "': " + e.what_without_backtrace());
  }
  for (auto p : m.parameters(true)) p.set_requires_grad(false);
  m.eval();
  return m;
}

struct StubInceptionNetImpl : nn::Module {
  StubInceptionNetImpl() {
    stem = register_module(
        "stem", nn::Sequential(nn::AdaptiveAvgPool2d(68),
                               nn::Conv2d(nn::Conv2dOptions(3, 32, 3).stride(2).padding(1)), nn::ReLU(),
                               nn::Conv2d(nn::Conv2dOptions(32, 64, 3).stride(2).padding(1)), nn::ReLU(),
                               nn::Conv2d(nn::Conv2dOptions(64, kMixedChannels, 1)), nn::ReLU()));
    fc = register_module("fc", nn::Linear(kMixedChannels, kPooledChannels));
  }
  nn::Sequential stem{nullptr};
  nn::Linear fc{nullptr};
};
TORCH_MODULE(StubInceptionNet);

class StubInception final : public InceptionTrunk {
 public:
  explicit StubInception(std::uint64_t seed) : seed_(seed) {
    reinitialize(*net_, seed);
    freeze(*net_);
  }
  InceptionOutputs forward(const torch::Tensor& images) override {
    auto mixed = net_->stem->forward(images);
    return {mixed, torch::relu(net_->fc(mixed.mean({2, 3})))};
  }
  std::string checksum() const override { return parameter_checksum(*net_); }
  std::string description() const override { return "stub-inception(seed=" + std::to_string(seed_) + ")"; }

 private:
  StubInceptionNet net_;
  std::uint64_t seed_;
};

struct StubVggNetImpl : nn::Module {
  explicit StubVggNetImpl(const std::vector<int>& channels) {
    if (channels.size() != 5 || channels.back() != kCropFeatureChannels) {
      throw ConfigError("stub VGG needs five stage widths ending in 512");
    }
    std::int64_t in = 3;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      stages.push_back(register_module("conv" + std::to_string(i + 1),
                                       nn::Conv2d(nn::Conv2dOptions(in, channels[i], 3).padding(1))));
      in = channels[i];
    }
  }
  std::vector<nn::Conv2d> stages;
};
TORCH_MODULE(StubVggNet);

class StubVgg final : public VggTrunk {
 public:
  StubVgg(const std::vector<int>& channels, std::uint64_t seed) : net_(channels), seed_(seed) {
    reinitialize(*net_, seed);
    freeze(*net_);
  }
  VggOutputs forward(const torch::Tensor& images) override {
    VggOutputs out;
    auto x = images;
    for (auto& conv : net_->stages) {
      x = torch::relu(conv(x));
      out.taps.push_back(x);
      x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2));
    }
    out.pooled = x;
    return out;
  }
  std::string checksum() const override { return parameter_checksum(*net_); }
  std::string description() const override { return "stub-vgg(seed=" + std::to_string(seed_) + ")"; }

 private:
  StubVggNet net_;
  std::uint64_t seed_;
};

class ScriptedInception final : public InceptionTrunk {
 public:
  explicit ScriptedInception(const std::string& path)
      : module_(load_frozen_script(path, "inception")), path_(path) {}
  InceptionOutputs forward(const torch::Tensor& images) override {
    auto out = module_.forward({images}).toTuple();
    return {out->elements().at(0).toTensor(), out->elements().at(1).toTensor()};
  }
  std::string checksum() const override { return tensors_checksum(named_state(module_)); }
  std::string description() const override { return "scripted-inception(" + path_ + ")"; }

 private:
  mutable torch::jit::Module module_;
  std::string path_;
};

class ScriptedVgg final : public VggTrunk {
 public:
  explicit ScriptedVgg(const std::string& path) : module_(load_frozen_script(path, "vgg")), path_(path) {}
  VggOutputs forward(const torch::Tensor& images) override {
    auto out = module_.forward({images}).toTuple();
    const auto& e = out->elements();
    if (e.size() != 6) throw ShapeError("vgg export must return five taps and the pooled map");
    VggOutputs v;
    for (std::size_t i = 0; i < 5; ++i) v.taps.push_back(e[i].toTensor());
    v.pooled = e[5].toTensor();
    return v;
  }
  std::string checksum() const override { return tensors_checksum(named_state(module_)); }
  std::string description() const override { return "scripted-vgg(" + path_ + ")"; }

 private:
  mutable torch::jit::Module module_;
  std::string path_;
};

}  // namespace

std::shared_ptr<InceptionTrunk> make_stub_inception(std::uint64_t seed) {
  return std::make_shared<StubInception>(seed);
}

std::shared_ptr<VggTrunk> make_stub_vgg(const std::vector<int>& channels, std::uint64_t seed) {
  return std::make_shared<StubVgg>(channels, seed);
}

std::shared_ptr<InceptionTrunk> load_scripted_inception(const std::string& path) {
  return std::make_shared<ScriptedInception>(path);
}

std::shared_ptr<VggTrunk> load_scripted_vgg(const std::string& path) {
  return std::make_shared<ScriptedVgg>(path);
}

std::string Backbones::provenance() const {
  return inception->description() + ":" + inception->checksum() + ";" + vgg->description() + ":" +
         vgg->checksum();
}

Backbones load_backbones(const BackboneConfig& cfg) {
  if (cfg.kind == "stub") {
    return {make_stub_inception(cfg.stub_seed), make_stub_vgg(cfg.stub_vgg_channels, mix_seed(cfg.stub_seed, 1))};
  }
  if (cfg.kind == "pretrained") {
    return {load_scripted_inception(cfg.inception_path), load_scripted_vgg(cfg.vgg_path)};
  }
  throw ConfigError("unknown backbone kind '" + cfg.kind + "' (expected stub or pretrained)");
}

torch::Tensor region_preprocess(const torch::Tensor& images, std::optional<at::Generator> generator) {
  if (images.dim() != 4 || images.size(1) != 3) throw ShapeError("region encoder expects B x 3 x H x W");
  auto resized = F::interpolate(images, F::InterpolateFuncOptions()
                                            .size(std::vector<std::int64_t>{kRegionResizeSize, kRegionResizeSize})
                                            .mode(torch::kBilinear)
                                            .align_corners(false)
                                            .antialias(images.size(2) > kRegionResizeSize));
  constexpr std::int64_t kSlack = kRegionResizeSize - kRegionInputSize;
  if (!generator) {
    constexpr std::int64_t off = kSlack / 2;
    return resized.index({Slice(), Slice(), Slice(off, off + kRegionInputSize), Slice(off, off + kRegionInputSize)});
  }
  auto offsets = torch::randint(kSlack + 1, {images.size(0), 2}, *generator, torch::kInt64);
  auto acc = offsets.accessor<std::int64_t, 2>();
  std::vector<torch::Tensor> crops;
  for (std::int64_t b = 0; b < images.size(0); ++b) {
    crops.push_back(resized[b].index({Slice(), Slice(acc[b][0], acc[b][0] + kRegionInputSize),
                                      Slice(acc[b][1], acc[b][1] + kRegionInputSize)}));
  }
  return torch::stack(crops);
}

RegionEncoderImpl::RegionEncoderImpl(std::shared_ptr<InceptionTrunk> trunk_, std::int64_t dim)
    : trunk(std::move(trunk_)) {
  region_proj = register_module("region_proj", nn::Linear(kMixedChannels, dim));
  global_proj = register_module("global_proj", nn::Linear(kPooledChannels, dim));
}

RegionFeatures RegionEncoderImpl::forward(const torch::Tensor& images, std::optional<at::Generator> generator) {
  auto out = trunk->forward(region_preprocess(images, generator));
  if (out.mixed.size(1) != kMixedChannels || out.mixed.size(2) != kRegionGrid || out.mixed.size(3) != kRegionGrid) {
    throw ShapeError("inception trunk returned an unexpected mixed-6e shape");
  }
  auto flat = out.mixed.flatten(2).transpose(1, 2);  // B x 289 x 768
  RegionFeatures f;
  f.regions = region_proj(flat).transpose(1, 2);  // B x D x 289
  f.global = global_proj(out.pooled);
  return f;
}

torch::Tensor crop_and_resize(const torch::Tensor& images, const torch::Tensor& boxes,
                              const torch::Tensor& batch_index, std::int64_t size) {
  if (boxes.dim() != 2 || boxes.size(1) != 4) throw ShapeError("boxes must be K x 4");
  auto b = boxes.to(images.dtype());
  auto w = b.select(1, 2) - b.select(1, 0);
  auto h = b.select(1, 3) - b.select(1, 1);
  if ((w <= 0).any().item<bool>() || (h <= 0).any().item<bool>()) {
    throw ShapeError("crop box without positive extent");
  }
  // Affine map from output to input in [-1, 1] coordinates.
  auto zeros = torch::zeros_like(w);
  auto row0 = torch::stack({w, zeros, b.select(1, 0) + b.select(1, 2) - 1.0}, 1);
  auto row1 = torch::stack({zeros, h, b.select(1, 1) + b.select(1, 3) - 1.0}, 1);
  auto theta = torch::stack({row0, row1}, 1);
  const auto K = boxes.size(0);
  auto grid = F::affine_grid(theta, {K, images.size(1), size, size}, /*align_corners=*/false);
  auto source = images.index_select(0, batch_index.to(torch::kInt64));
  return F::grid_sample(source, grid,
                        F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kBorder).align_corners(false));
}

torch::Tensor union_boxes(const torch::Tensor& a, const torch::Tensor& b) {
  auto lo = torch::minimum(a.index({Slice(), Slice(0, 2)}), b.index({Slice(), Slice(0, 2)}));
  auto hi = torch::maximum(a.index({Slice(), Slice(2, 4)}), b.index({Slice(), Slice(2, 4)}));
  return torch::cat({lo, hi}, 1);
}

torch::Tensor extract_crop_features(VggTrunk& vgg, const torch::Tensor& images, const torch::Tensor& boxes,
                                    const torch::Tensor& batch_index) {
  return vgg.forward(crop_and_resize(images, boxes, batch_index, kCropSize)).pooled;
}

torch::Tensor perceptual_l1(VggTrunk& vgg, const torch::Tensor& fake, const torch::Tensor& real) {
  auto f = vgg.forward(fake);
  auto r = vgg.forward(real);
  auto total = torch::zeros({}, fake.options());
  for (std::size_t i = 0; i < f.taps.size(); ++i) total = total + (f.taps[i] - r.taps[i].detach()).abs().mean();
  return total;
}

}  // namespace phrasegen
