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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "phrasegen/config.hpp"

namespace phrasegen {

constexpr int kRegionInputSize = 299;
constexpr int kRegionResizeSize = 355;  // 299 * 76 / 64, then cropped
constexpr int kRegionGrid = 17;
constexpr int kRegionCount = kRegionGrid * kRegionGrid;
constexpr int kMixedChannels = 768;
constexpr int kPooledChannels = 2048;
constexpr int kCropSize = 128;
constexpr int kCropFeatureChannels = 512;

/// Outputs of the Inception-style trunk for a batch of 299x299 images.
struct InceptionOutputs {
  torch::Tensor mixed;   // B x 768 x 17 x 17
  torch::Tensor pooled;  // B x 2048
};

/// Outputs of the VGG-style trunk.
struct VggOutputs {
  std::vector<torch::Tensor> taps;  // five pre-pool activations
  torch::Tensor pooled;             // output of the last max-pool
};

/// Frozen feature extractor behind the region encoder. Inputs are RGB in
/// [-1, 1]; any further normalization is the trunk's own business.
class InceptionTrunk {
 public:
  virtual ~InceptionTrunk() = default;
  virtual InceptionOutputs forward(const torch::Tensor& images) = 0;
  virtual std::string checksum() const = 0;
  virtual std::string description() const = 0;
};

/// Frozen feature extractor for crops and perceptual features.
class VggTrunk {
 public:
  virtual ~VggTrunk() = default;
  virtual VggOutputs forward(const torch::Tensor& images) = 0;
  virtual std::string checksum() const = 0;
  virtual std::string description() const = 0;
};

/// Small randomly initialized stand-ins with the pretrained output shapes.
std::shared_ptr<InceptionTrunk> make_stub_inception(std::uint64_t seed);
std::shared_ptr<VggTrunk> make_stub_vgg(const std::vector<int>& channels, std::uint64_t seed);

/// TorchScript exports produced by tools/export_backbones.py. Throws
/// PrerequisiteError when the file is missing.
std::shared_ptr<InceptionTrunk> load_scripted_inception(const std::string& path);
std::shared_ptr<VggTrunk> load_scripted_vgg(const std::string& path);

struct Backbones {
  std::shared_ptr<InceptionTrunk> inception;
  std::shared_ptr<VggTrunk> vgg;

  /// Combined fingerprint recorded in checkpoints.
  std::string provenance() const;
};

Backbones load_backbones(const BackboneConfig& cfg);

/// Resize to 355 and crop 299: random offsets from `generator` when given,
/// centered otherwise.
torch::Tensor region_preprocess(const torch::Tensor& images, std::optional<at::Generator> generator);

struct RegionFeatures {
  torch::Tensor regions;  // B x D x 289
  torch::Tensor global;   // B x D
};

/// Frozen trunk plus the two trainable projections into the matching space.
struct RegionEncoderImpl : torch::nn::Module {
  RegionEncoderImpl(std::shared_ptr<InceptionTrunk> trunk, std::int64_t dim);

  /// images: B x 3 x H x W in [-1, 1], any size. Gradients flow into the
  /// projections and back into `images`, never into the trunk.
  RegionFeatures forward(const torch::Tensor& images, std::optional<at::Generator> generator = std::nullopt);

  std::shared_ptr<InceptionTrunk> trunk;
  torch::nn::Linear region_proj{nullptr}, global_proj{nullptr};
};
TORCH_MODULE(RegionEncoder);

/// Crops `boxes` (K x 4 normalized x0,y0,x1,y1) out of `images[batch_index]`
/// and bilinearly resizes them to size x size. A box of (0,0,1,1) equals a
/// plain bilinear resize. Throws ShapeError on a box without positive extent.
torch::Tensor crop_and_resize(const torch::Tensor& images, const torch::Tensor& boxes,
                              const torch::Tensor& batch_index, std::int64_t size);

/// Elementwise enclosing box of two K x 4 box tensors.
torch::Tensor union_boxes(const torch::Tensor& a, const torch::Tensor& b);

/// Crops resized to 128 and encoded to 512 x 4 x 4.
torch::Tensor extract_crop_features(VggTrunk& vgg, const torch::Tensor& images,
                                    const torch::Tensor& boxes, const torch::Tensor& batch_index);

/// Sum over the five taps of the mean absolute feature difference.
torch::Tensor perceptual_l1(VggTrunk& vgg, const torch::Tensor& fake, const torch::Tensor& real);

}  // namespace phrasegen
