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
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace phrasegen {

/// Sharpening / smoothing factors of the attentional matching score.
struct GammaConfig {
  double gamma1 = 5.0;   // region attention sharpness
  double gamma2 = 5.0;   // phrase-to-context aggregation
  double gamma3 = 10.0;  // posterior smoothing over the batch

  void validate() const;
};

struct DataConfig {
  std::string data_dir;
  int min_objects = 3;
  int max_objects = 8;
  double min_area_frac = 0.02;
  int max_caption_len = 20;
  // Counts mode: val/test sizes drawn from the validation pool.
  int val_count = 1024;
  int test_count = 2048;
  // Ratio mode (train, val, test) when non-empty; overrides the counts.
  std::vector<double> split_ratios;
  // Whitespace separated "word v1 .. v50" file. Empty: seeded random vectors.
  std::string embeddings_path;
  std::uint64_t seed = 0;
};

struct BackboneConfig {
  // "stub": small randomly initialized CNNs with the pretrained output
  // shapes. "pretrained": TorchScript exports located by the paths below.
  std::string kind = "stub";
  std::string inception_path;
  std::string vgg_path;
  // Channel widths of the stub VGG stages.
  std::vector<int> stub_vgg_channels{16, 32, 64, 128, 512};
  std::uint64_t stub_seed = 1234;
};

struct ModelConfig {
  int word_dim = 50;
  int noise_dim = 50;
  int text_embed_dim = 300;
  int text_hidden = 128;  // per direction; word features are 2x this
  double text_dropout = 0.5;

  int phrase_dim = 128;
  int ire_hidden = 300;
  int gconv_hidden = 512;
  int gconv_layers = 3;
  int head_hidden = 768;
  int head_width = 384;

  int box_hidden = 512;
  double min_box_extent = 1.0 / 32.0;

  int lig_channels = 64;
  int fused_channels = 256;
  int hidden_channels = 64;
  // Output widths of the stage-0 refinement modules, 4x4 up to 64x64.
  std::vector<int> crm_channels{1024, 512, 256, 128, 64};
  int n_stages = 3;
  int base_resolution = 64;
  std::string layout_merge = "max";  // max | sum_then_max
  bool lig_all_stages = false;
  std::string box_source = "predicted";  // predicted | ground_truth

  int disc_channels = 64;
  int obj_disc_hidden = 1024;
  int phrase_disc_channels = 512;
  bool use_caption_patch_d = false;
  // Phrases sampled per image for phrase discrimination (0 = all).
  int phrase_pairs_per_image = 4;
  // Run phrase discriminators on upsampled low-resolution outputs when the
  // highest trained stage is below 256.
  bool phrase_d_upsampled = true;

  BackboneConfig backbone;

  int word_feature_dim() const { return 2 * text_hidden; }
  int resolution(int stage) const { return base_resolution << stage; }
  void validate() const;
};

struct PretrainConfig {
  double lr = 2e-4;
  int batch_size = 32;
  int steps = 2000;
  int log_every = 50;
};

struct LossWeights {
  // gan_img, l1_img, perceptual_img, gan_obj, ac_obj, gan_phr, damsm_phr, box
  std::array<double, 8> lambda{1.0, 1.0, 0.5, 1.0, 0.1, 0.5, 5.0, 10.0};
};

struct DiscriminatorEnable {
  bool patch_unc = true;
  bool patch_ig = true;
  bool object = true;
  bool phrase_unc = true;
  bool phrase_con = true;
};

struct TrainConfig {
  double lr = 5e-4;
  int batch_size = 32;
  int iterations = 200000;
  LossWeights weights;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int d_steps_per_g = 1;
  std::uint64_t seed = 0;
  int checkpoint_every = 5000;
  int log_every = 100;
  DiscriminatorEnable enable;
  std::string device = "cpu";
  std::string precision = "float32";
};

struct EvalConfig {
  int is_splits = 10;
  // TorchScript classifier returning (logits, pool features). Empty: a
  // small shape classifier is trained on the real split.
  std::string classifier_path;
  int stub_classifier_steps = 300;
};

struct Config {
  DataConfig data;
  ModelConfig model;
  GammaConfig gamma;
  PretrainConfig text_pretrain;
  PretrainConfig phrase_pretrain;
  TrainConfig train;
  EvalConfig eval;

  /// Values used for the published full-scale runs.
  static Config full_scale();
  /// CPU-sized preset: 64x64 single stage, narrow convolution stacks, stub
  /// backbones. Matching dimensions (D_p, D_w) are unchanged.
  static Config desk();

  nlohmann::json to_json() const;
  /// Applies a (partial) JSON document on top of this config. Unknown keys
  /// are rejected.
  void merge(const nlohmann::json& patch);
  void validate() const;
  std::string hash() const;
};

Config load_config_file(const std::string& path, Config base = Config::full_scale());

}  // namespace phrasegen
