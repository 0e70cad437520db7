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

#include "phrasegen/config.hpp"

#include <fstream>

#include "phrasegen/common.hpp"

namespace phrasegen {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GammaConfig, gamma1, gamma2, gamma3)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DataConfig, data_dir, min_objects, max_objects, min_area_frac,
                                   max_caption_len, val_count, test_count, split_ratios,
                                   embeddings_path, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BackboneConfig, kind, inception_path, vgg_path,
                                   stub_vgg_channels, stub_seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelConfig, word_dim, noise_dim, text_embed_dim, text_hidden,
                                   text_dropout, phrase_dim, ire_hidden, gconv_hidden,
                                   gconv_layers, head_hidden, head_width, box_hidden,
                                   min_box_extent, lig_channels, fused_channels, hidden_channels,
                                   crm_channels, n_stages, base_resolution, layout_merge,
                                   lig_all_stages, box_source, disc_channels, obj_disc_hidden,
                                   phrase_disc_channels, use_caption_patch_d,
                                   phrase_pairs_per_image, phrase_d_upsampled, backbone)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PretrainConfig, lr, batch_size, steps, log_every)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LossWeights, lambda)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DiscriminatorEnable, patch_unc, patch_ig, object, phrase_unc,
                                   phrase_con)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainConfig, lr, batch_size, iterations, weights, adam_beta1,
                                   adam_beta2, d_steps_per_g, seed, checkpoint_every, log_every,
                                   enable, device, precision)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalConfig, is_splits, classifier_path, stub_classifier_steps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Config, data, model, gamma, text_pretrain, phrase_pretrain,
                                   train, eval)

void GammaConfig::validate() const {
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0) || !(gamma3 > 0.0)) {
    throw ConfigError("gamma1, gamma2 and gamma3 must all be strictly positive");
  }
}

void ModelConfig::validate() const {
  if (n_stages < 1 || n_stages > 3) throw ConfigError("model.n_stages must be 1, 2 or 3");
  if (base_resolution < 8 || (base_resolution & (base_resolution - 1)) != 0) {
    throw ConfigError("model.base_resolution must be a power of two >= 8");
  }
  int expected = 0;
  for (int r = 4; r <= base_resolution; r *= 2) ++expected;
  if (static_cast<int>(crm_channels.size()) != expected) {
    throw ConfigError("model.crm_channels needs " + std::to_string(expected) +
                      " entries (one per doubling from 4x4 to the base resolution)");
  }
  if (crm_channels.back() != hidden_channels) {
    throw ConfigError("model.crm_channels must end at model.hidden_channels");
  }
  if (layout_merge != "max" && layout_merge != "sum_then_max") {
    throw ConfigError("model.layout_merge must be 'max' or 'sum_then_max'");
  }
  if (box_source != "predicted" && box_source != "ground_truth") {
    throw ConfigError("model.box_source must be 'predicted' or 'ground_truth'");
  }
  if (backbone.kind != "stub" && backbone.kind != "pretrained") {
    throw ConfigError("model.backbone.kind must be 'stub' or 'pretrained'");
  }
  if (backbone.stub_vgg_channels.size() != 5 || backbone.stub_vgg_channels.back() != 512) {
    throw ConfigError("model.backbone.stub_vgg_channels needs 5 stages ending at 512");
  }
  if (!(min_box_extent > 0.0 && min_box_extent < 1.0)) {
    throw ConfigError("model.min_box_extent must lie in (0, 1)");
  }
  if (head_width != 3 * phrase_dim) {
    throw ConfigError("model.head_width must equal 3 * model.phrase_dim");
  }
}

Config Config::full_scale() { return Config{}; }

Config Config::desk() {
  Config c;
  c.data.val_count = 2;
  c.data.test_count = 2;
  c.model.n_stages = 1;
  c.model.lig_channels = 16;
  c.model.fused_channels = 32;
  c.model.hidden_channels = 16;
  c.model.crm_channels = {64, 64, 32, 32, 16};
  c.model.gconv_hidden = 256;
  c.model.disc_channels = 16;
  c.model.obj_disc_hidden = 128;
  c.model.phrase_disc_channels = 64;
  c.model.phrase_pairs_per_image = 1;
  c.model.backbone.stub_vgg_channels = {8, 16, 32, 64, 512};
  c.text_pretrain.batch_size = 8;
  c.text_pretrain.steps = 200;
  c.text_pretrain.lr = 1e-3;
  c.phrase_pretrain.batch_size = 8;
  c.phrase_pretrain.steps = 300;
  c.phrase_pretrain.lr = 1e-3;
  c.train.batch_size = 8;
  c.train.iterations = 500;
  c.train.checkpoint_every = 100;
  c.train.log_every = 10;
  c.eval.is_splits = 2;
  return c;
}

nlohmann::json Config::to_json() const {
  nlohmann::json j = *this;
  return j;
}

namespace {

void check_known_keys(const nlohmann::json& base, const nlohmann::json& patch,
                      const std::string& prefix) {
  if (!patch.is_object()) return;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
    if (base.at(it.key()).is_object()) check_known_keys(base.at(it.key()), it.value(), path);
  }
}

}  // namespace

void Config::merge(const nlohmann::json& patch) {
  if (!patch.is_object()) throw ConfigError("config document must be a JSON object");
  nlohmann::json current = to_json();
  check_known_keys(current, patch, "");
  current.merge_patch(patch);
  try {
    *this = current.get<Config>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
}

void Config::validate() const {
  gamma.validate();
  model.validate();
  if (data.min_objects < 2) throw ConfigError("data.min_objects must be >= 2 (phrases need pairs)");
  if (data.max_objects < data.min_objects) throw ConfigError("data.max_objects < data.min_objects");
  if (data.max_caption_len < 1) throw ConfigError("data.max_caption_len must be positive");
  if (!data.split_ratios.empty()) {
    if (data.split_ratios.size() != 3) throw ConfigError("data.split_ratios needs 3 entries");
    double sum = 0.0;
    for (double r : data.split_ratios) {
      if (r < 0.0) throw ConfigError("data.split_ratios must be non-negative");
      sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("data.split_ratios must sum to 1");
  }
  if (train.batch_size < 1 || train.iterations < 0) throw ConfigError("invalid train sizes");
  if (train.device != "cpu") throw ConfigError("only train.device = 'cpu' is supported");
  if (train.precision != "float32") throw ConfigError("only train.precision = 'float32' is supported");
  if (eval.is_splits < 1) throw ConfigError("eval.is_splits must be positive");
}

std::string Config::hash() const { return hex64(fnv1a(to_json().dump())); }

Config load_config_file(const std::string& path, Config base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config file '" + path + "': " + e.what());
  }
  base.merge(j);
  return base;
}

}  // namespace phrasegen
