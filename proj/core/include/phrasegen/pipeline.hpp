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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "phrasegen/config.hpp"
#include "phrasegen/data.hpp"
#include "phrasegen/generator.hpp"
#include "phrasegen/training.hpp"

namespace phrasegen {

struct GenerationRequest {
  std::vector<std::string> objects;  // category names
  std::string caption;
  std::uint64_t seed = 0;
  int stages = 0;                        // 0 = every stage
  std::string box_source = "predicted";  // predicted | ground_truth
  std::vector<Box> boxes;                // normalized, required for ground_truth
};

struct GenerationResult {
  std::vector<torch::Tensor> images;  // per stage, 3 x R x R in [-1, 1]
  torch::Tensor boxes;                // n x 4 layout boxes
};

/// A trained generator with its frozen conditioning, in evaluation mode.
class ScenePipeline {
 public:
  ScenePipeline(Config cfg, const std::filesystem::path& dataset_dir, const std::filesystem::path& run_dir,
                const std::filesystem::path& checkpoint);

  GenerationResult generate(const GenerationRequest& request);

  /// Batched generation for encoded inputs; `boxes` selects ground-truth
  /// layouts, otherwise predicted boxes are used.
  GeneratorOutput run(const torch::Tensor& caption_ids, const torch::Tensor& lengths,
                      const std::vector<torch::Tensor>& labels, const torch::Tensor& noise,
                      const std::optional<std::vector<torch::Tensor>>& boxes);

  /// Contiguous labels of category names. Throws DataError naming the known
  /// categories on an unknown name.
  torch::Tensor labels_of(const std::vector<std::string>& names) const;

  const Config& config() const { return cfg_; }
  const DataContext& data() const { return data_; }

 private:
  Config cfg_;
  DataContext data_;
  std::unique_ptr<ExampleLoader> encoder_;
  FrozenConditioning frozen_;
  Generator generator_{nullptr};
};

/// Writes stage_<R>.png for each generated stage plus grid.png (one row:
/// caption/objects cell then the stages). Returns the written paths.
std::vector<std::filesystem::path> write_generation(const std::filesystem::path& out_dir,
                                                    const GenerationRequest& request,
                                                    const GenerationResult& result);

/// One grid row per example: a text cell with caption and objects, then one
/// cell per stage. Cell count is examples x (stages + 1).
void emit_sample_grid(ScenePipeline& pipeline, const std::vector<GenerationRequest>& examples,
                      const std::filesystem::path& out_path);

}  // namespace phrasegen
