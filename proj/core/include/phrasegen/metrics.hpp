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
#include <memory>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

#include "phrasegen/config.hpp"

namespace phrasegen {

struct InceptionScore {
  double mean = 0.0;
  double std = 0.0;
};

/// exp(E_x KL(p(y|x) || p(y))) per split of `probs` (N x C, rows summing to
/// one), then mean and population std over splits. Split k covers rows
/// [k * N/splits, (k+1) * N/splits); a remainder is dropped.
InceptionScore inception_score(const torch::Tensor& probs, int n_splits);

/// Gaussian fit of feature activations, kept in double precision.
struct ActivationStats {
  torch::Tensor mean;  // d
  torch::Tensor cov;   // d x d
  std::int64_t count = 0;

  /// Sample mean and unbiased covariance of N x d features (N >= 2).
  static ActivationStats from_features(const torch::Tensor& features);
};

/// Frechet distance between two Gaussians:
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
/// The trace of the square root is taken from the eigenvalues of the
/// symmetric matrix S_a^(1/2) S_b S_a^(1/2).
double fid(const ActivationStats& a, const ActivationStats& b);

/// Scores images for the metrics: class logits and pool features.
class Classifier {
 public:
  virtual ~Classifier() = default;
  /// images: B x 3 x R x R in [-1, 1]. Returns (logits B x C, features B x d).
  virtual std::pair<torch::Tensor, torch::Tensor> score(const torch::Tensor& images) = 0;
  virtual std::string description() const = 0;
};

/// Small CNN for the synthetic shape classes: three stride-2 convolutions,
/// a global mean and a linear head. Its 64-d pooled features feed FID.
struct ShapeClassifierImpl : torch::nn::Module {
  ShapeClassifierImpl(std::int64_t num_classes, std::int64_t input_size);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& images);

  torch::nn::Sequential features{nullptr};
  torch::nn::Linear head{nullptr};
  std::int64_t input_size;
};
TORCH_MODULE(ShapeClassifier);

/// Trains (or loads from `cache`) the shape classifier on the real images of
/// `dataset_dir`'s train split, labelled by their largest object.
std::shared_ptr<Classifier> load_or_train_shape_classifier(const Config& cfg,
                                                           const std::filesystem::path& dataset_dir,
                                                           const std::filesystem::path& cache);

/// Loads a TorchScript classifier returning (logits, features).
std::shared_ptr<Classifier> load_scripted_classifier(const std::string& path);

struct EvaluationRequest {
  std::filesystem::path checkpoint;
  std::string split = "test";
  std::string metric = "both";  // is | fid | both
  int n_images = 64;
  std::uint64_t seed = 0;
};

/// Generates `n_images` samples conditioned on the records of a split
/// (cycling when the split is smaller) and scores IS and/or FID against the
/// real images. Writes `<run_dir>/eval_<split>.json` and a manifest.
nlohmann::json evaluate(const Config& cfg, const std::filesystem::path& dataset_dir,
                        const std::filesystem::path& run_dir, const EvaluationRequest& request);

}  // namespace phrasegen
