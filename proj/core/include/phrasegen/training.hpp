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

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "phrasegen/backbones.hpp"
#include "phrasegen/config.hpp"
#include "phrasegen/data.hpp"
#include "phrasegen/discriminators.hpp"
#include "phrasegen/generator.hpp"
#include "phrasegen/implicit_graph.hpp"
#include "phrasegen/losses.hpp"

namespace phrasegen {

/// File layout of a run directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path text_encoder() const { return root / "text_encoder.pt"; }
  std::filesystem::path phrase_damsm() const { return root / "phrase_damsm.pt"; }
  std::filesystem::path train_dir() const { return root / "train"; }
  std::filesystem::path latest() const { return train_dir() / "latest.pt"; }
  std::filesystem::path step_checkpoint(std::int64_t step) const;
  std::filesystem::path metrics() const { return root / "metrics.jsonl"; }
  std::filesystem::path pretrain_metrics(const std::string& stage) const { return root / (stage + ".jsonl"); }
  std::filesystem::path manifest(const std::string& command) const { return root / (command + ".manifest.json"); }
};

/// Records what a command did: effective config, seeds, timestamps and
/// produced files. Written next to the artifacts.
class RunManifest {
 public:
  RunManifest(std::string command, const Config& cfg);
  void artifact(const std::string& role, const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value);
  void write(const std::filesystem::path& path);

 private:
  nlohmann::json doc_;
};

/// Fingerprint of the model section; checkpoints refuse other architectures.
std::string model_fingerprint(const ModelConfig& model);

/// Splits and vocabulary of a prepared dataset directory.
struct DataContext {
  Splits splits;
  Vocabulary vocab;

  static DataContext load(const std::filesystem::path& dataset_dir);
  ExampleLoader loader(const DatasetIndex& index, std::vector<int> resolutions, const Config& cfg) const;
  int num_categories() const { return splits.train.num_categories(); }
};

/// Resolutions served to the trainer: one per generator stage.
std::vector<int> stage_resolutions(const ModelConfig& model);

/// Per-step loss trace of a pretraining run.
struct PretrainReport {
  std::vector<double> losses;
  std::filesystem::path checkpoint;
};

/// Word-level matching pretraining of the caption encoder. Writes
/// text_encoder.pt.
PretrainReport pretrain_text_encoder(const Config& cfg, const std::filesystem::path& dataset_dir,
                                     const std::filesystem::path& run_dir);

/// Phrase-level matching pretraining of the relation estimator, graph
/// encoder and region projections with the caption encoder frozen. Writes
/// phrase_damsm.pt. Throws PrerequisiteError without text_encoder.pt.
PretrainReport pretrain_phrase_damsm(const Config& cfg, const std::filesystem::path& dataset_dir,
                                     const std::filesystem::path& run_dir);

/// Builds the scene encoder for a dataset (untrained).
SceneEncoder make_scene_encoder(const DataContext& data, const Config& cfg);

/// Frozen conditioning stack loaded from phrase_damsm.pt.
struct FrozenConditioning {
  SceneEncoder scene{nullptr};
  RegionEncoder region{nullptr};
  Backbones backbones;
};

FrozenConditioning load_conditioning(const Config& cfg, const DataContext& data, const RunPaths& paths);

/// Scores image i against query set j for a batch and reports the fraction
/// of images whose own caption/graph scores highest among mismatched ones.
double retrieval_accuracy(const torch::Tensor& local_scores);

/// Every discriminator of the adversarial stage.
struct DiscriminatorSetImpl : torch::nn::Module {
  DiscriminatorSetImpl(const ModelConfig& cfg, const DiscriminatorEnable& enable, std::int64_t num_classes);

  torch::nn::ModuleList patch_unc{nullptr}, patch_ig{nullptr}, patch_cap{nullptr};
  ObjectDiscriminator object{nullptr};
  PhraseDiscriminator phrase_unc{nullptr}, phrase_con{nullptr};
};
TORCH_MODULE(DiscriminatorSet);

/// Alternating discriminator / generator optimization with resumable
/// checkpoints. Every step is a pure function of (seed, step, state).
class Trainer {
 public:
  Trainer(Config cfg, const std::filesystem::path& dataset_dir, const std::filesystem::path& run_dir);

  /// Runs until `cfg.train.iterations` steps are complete (or `max_steps`
  /// more steps when given). With `resume`, continues from latest.pt.
  void run(bool resume, std::optional<std::int64_t> max_steps = std::nullopt);

  /// One D step then one G step. Returns the metrics record.
  nlohmann::json step(std::int64_t index);

  void save_checkpoint();
  void load_checkpoint(const std::filesystem::path& path);

  std::int64_t completed_steps() const { return completed_; }
  const Config& config() const { return cfg_; }
  Generator& generator() { return generator_; }
  DiscriminatorSet& discriminators() { return discriminators_; }
  FrozenConditioning& conditioning() { return frozen_; }
  const DataContext& data() const { return data_; }

 private:
  Config cfg_;
  RunPaths paths_;
  DataContext data_;
  std::unique_ptr<ExampleLoader> loader_;
  FrozenConditioning frozen_;
  Generator generator_{nullptr};
  DiscriminatorSet discriminators_{nullptr};
  std::unique_ptr<torch::optim::Adam> g_opt_, d_opt_;
  std::int64_t completed_ = 0;
};

}  // namespace phrasegen
