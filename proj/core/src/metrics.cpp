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


#include "phrasegen/metrics.hpp"

#include <torch/script.h>

#include <fstream>

#include "phrasegen/checkpoint.hpp"
#include "phrasegen/common.hpp"
#include "phrasegen/pipeline.hpp"
#include "phrasegen/training.hpp"

namespace fs = std::filesystem;
namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace phrasegen {

InceptionScore inception_score(const torch::Tensor& probs, int n_splits) {
  if (probs.dim() != 2) throw ShapeError("inception score expects an N x C probability matrix");
  if (n_splits < 1) throw ConfigError("inception score needs at least one split");
  const auto n = probs.size(0);
  if (n < n_splits) {
    throw DataError("inception score over " + std::to_string(n) + " images cannot form " +
                    std::to_string(n_splits) + " splits");
  }
  auto p = probs.to(torch::kDouble);
  const auto part = n / n_splits;
  std::vector<double> scores;
  for (int k = 0; k < n_splits; ++k) {
    auto pk = p.narrow(0, k * part, part);
    auto py = pk.mean(0, /*keepdim=*/true);
    auto kl = (torch::xlogy(pk, pk) - torch::xlogy(pk, py)).sum(1);
    scores.push_back(std::exp(kl.mean().item<double>()));
  }
  InceptionScore out;
  for (double s : scores) out.mean += s;
  out.mean /= static_cast<double>(scores.size());
  for (double s : scores) out.std += (s - out.mean) * (s - out.mean);
  out.std = std::sqrt(out.std / static_cast<double>(scores.size()));
  return out;
}

ActivationStats ActivationStats::from_features(const torch::Tensor& features) {
  if (features.dim() != 2) throw ShapeError("activation statistics expect N x d features");
  if (features.size(0) < 2) throw DataError("activation statistics need at least two samples");
  auto x = features.to(torch::kDouble);
  ActivationStats s;
  s.count = x.size(0);
  s.mean = x.mean(0);
  auto c = x - s.mean;
  s.cov = c.t().matmul(c) / static_cast<double>(s.count - 1);
  return s;
}

namespace {

torch::Tensor symmetric(const torch::Tensor& m) { return 0.5 * (m + m.t()); }

// Eigenvalues of a symmetric matrix, verified non-negative up to `tol`
// relative to the largest magnitude.
std::pair<torch::Tensor, torch::Tensor> psd_eigh(const torch::Tensor& m, const char* what) {
  auto [values, vectors] = torch::linalg_eigh(symmetric(m));
  const double scale = std::max(1.0, values.abs().max().item<double>());
  if (values.min().item<double>() < -1e-6 * scale) {
    throw NumericError(std::string(what) + " is not positive semidefinite (min eigenvalue " +
                       std::to_string(values.min().item<double>()) + ")");
  }
  return {values.clamp_min(0.0), vectors};
}

double trace_sqrt_product(const torch::Tensor& a, const torch::Tensor& b) {
  auto [va, ua] = psd_eigh(a, "covariance");
  auto root_a = ua.matmul(torch::diag(va.sqrt())).matmul(ua.t());
  auto [vm, um] = psd_eigh(root_a.matmul(b).matmul(root_a), "covariance product");
  return vm.sqrt().sum().item<double>();
}

}  // namespace

double fid(const ActivationStats& a, const ActivationStats& b) {
  if (a.mean.size(0) != b.mean.size(0) || a.cov.sizes() != b.cov.sizes()) {
    throw ShapeError("FID statistics differ in feature dimension");
  }
  auto ca = a.cov.to(torch::kDouble);
  auto cb = b.cov.to(torch::kDouble);
  const auto ma = a.mean.to(torch::kDouble);
  const auto mb = b.mean.to(torch::kDouble);
  if (torch::equal(ma, mb) && torch::equal(ca, cb)) return 0.0;
  const double mean_term = (ma - mb).pow(2).sum().item<double>();
  double tr_sqrt = 0.0;
  try {
    tr_sqrt = trace_sqrt_product(ca, cb);
  } catch (const NumericError& e) {
    const double eps = 1e-6;
    log::warn("FID: ", e.what(), "; retrying with ", eps, " diagonal jitter");
    auto jitter = eps * torch::eye(ca.size(0), ca.options());
    ca = ca + jitter;
    cb = cb + jitter;
    tr_sqrt = trace_sqrt_product(ca, cb);
  }
  return mean_term + ca.trace().item<double>() + cb.trace().item<double>() - 2.0 * tr_sqrt;
}

ShapeClassifierImpl::ShapeClassifierImpl(std::int64_t num_classes, std::int64_t input_size_)
    : input_size(input_size_) {
  auto down = [](std::int64_t in, std::int64_t out) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1));
  };
  features = register_module(
      "features", nn::Sequential(down(3, 16), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)), down(16, 32),
                                 nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)), down(32, 64),
                                 nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  head = register_module("head", nn::Linear(64, num_classes));
}

std::pair<torch::Tensor, torch::Tensor> ShapeClassifierImpl::forward(const torch::Tensor& images) {
  auto x = images;
  if (x.size(-1) != input_size || x.size(-2) != input_size) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .size(std::vector<std::int64_t>{input_size, input_size})
                              .mode(torch::kBilinear)
                              .align_corners(false));
  }
  auto pooled = features->forward(x).mean({2, 3});
  return {head(pooled), pooled};
}

namespace {

constexpr std::int64_t kClassifierInput = 64;
constexpr int kClassifierBatch = 16;
constexpr std::uint64_t kClassifierStream = 0x636c7366;  // "clsf"

class ModuleClassifier : public Classifier {
 public:
  explicit ModuleClassifier(ShapeClassifier net) : net_(std::move(net)) { freeze(*net_); }
  std::pair<torch::Tensor, torch::Tensor> score(const torch::Tensor& images) override {
    torch::NoGradGuard no_grad;
    return net_(images);
  }
  std::string description() const override { return "shape-classifier"; }

 private:
  ShapeClassifier net_;
};

class ScriptedClassifier : public Classifier {
 public:
  explicit ScriptedClassifier(const std::string& path) : path_(path) {
    try {
      module_ = torch::jit::load(path);
    } catch (const c10::Error& e) {
      throw CheckpointError("cannot load classifier '" + path + "': " + e.what_without_backtrace());
    }
    module_.eval();
  }
  std::pair<torch::Tensor, torch::Tensor> score(const torch::Tensor& images) override {
    torch::NoGradGuard no_grad;
    auto out = module_.forward({images});
    if (!out.isTuple() || out.toTuple()->elements().size() != 2) {
      throw ShapeError("classifier '" + path_ + "' must return (logits, features)");
    }
    const auto& el = out.toTuple()->elements();
    return {el[0].toTensor(), el[1].toTensor()};
  }
  std::string description() const override { return "scripted:" + path_; }

 private:
  std::string path_;
  torch::jit::script::Module module_;
};

torch::Tensor largest_object_labels(const Batch& batch) {
  std::vector<std::int64_t> out;
  for (std::int64_t b = 0; b < batch.size(); ++b) {
    const auto& bx = batch.boxes[b];
    auto area = (bx.select(1, 2) - bx.select(1, 0)) * (bx.select(1, 3) - bx.select(1, 1));
    out.push_back(batch.labels[b][area.argmax().item<std::int64_t>()].item<std::int64_t>());
  }
  return torch::tensor(out, torch::kInt64);
}

std::string category_key(const DatasetIndex& index) {
  std::string names;
  for (const auto& c : index.categories) names += c.name + "\n";
  return hex64(fnv1a(names + std::to_string(index.records.size())));
}

const DatasetIndex& split_by_name(const Splits& splits, const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "val") return splits.val;
  if (name == "test") return splits.test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

}  // namespace

std::shared_ptr<Classifier> load_or_train_shape_classifier(const Config& cfg, const fs::path& dataset_dir,
                                                           const fs::path& cache) {
  const auto data = DataContext::load(dataset_dir);
  const auto key = category_key(data.splits.train);
  const auto steps = std::to_string(cfg.eval.stub_classifier_steps);
  ShapeClassifier net(data.num_categories(), kClassifierInput);
  if (fs::exists(cache)) {
    CheckpointReader r(cache, "classifier");
    if (r.meta("dataset") == key && r.meta("steps") == steps) {
      r.module("classifier", *net);
      return std::make_shared<ModuleClassifier>(net);
    }
    log::info("classifier cache ", cache.string(), " is stale; retraining");
  }
  const auto seed = mix_seed(cfg.train.seed, kClassifierStream);
  torch::manual_seed(seed);
  net = ShapeClassifier(data.num_categories(), kClassifierInput);
  auto loader = data.loader(data.splits.train, {static_cast<int>(kClassifierInput)}, cfg);
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(1e-3));
  net->train();
  double last_loss = 0.0;
  for (int step = 0; step < cfg.eval.stub_classifier_steps; ++step) {
    Batch batch = load_batch(loader, step, kClassifierBatch, seed);
    auto loss = F::cross_entropy(net(batch.images[0]).first, largest_object_labels(batch));
    opt.zero_grad();
    loss.backward();
    opt.step();
    last_loss = loss.item<double>();
  }
  log::info("shape classifier trained for ", steps, " steps, final loss ", last_loss);
  CheckpointWriter w("classifier");
  w.meta("dataset", key).meta("steps", steps).module("classifier", *net);
  w.save(cache);
  return std::make_shared<ModuleClassifier>(net);
}

std::shared_ptr<Classifier> load_scripted_classifier(const std::string& path) {
  return std::make_shared<ScriptedClassifier>(path);
}

nlohmann::json evaluate(const Config& cfg, const fs::path& dataset_dir, const fs::path& run_dir,
                        const EvaluationRequest& request) {
  if (request.metric != "is" && request.metric != "fid" && request.metric != "both") {
    throw ConfigError("metric must be is, fid or both");
  }
  if (request.n_images < 2) throw ConfigError("evaluation needs at least two images");
  ScenePipeline pipeline(cfg, dataset_dir, run_dir, request.checkpoint);
  RunManifest manifest("evaluate", cfg);
  const auto& index = split_by_name(pipeline.data().splits, request.split);
  if (index.records.empty()) throw DataError("split '" + request.split + "' has no records");
  const int final_res = stage_resolutions(cfg.model).back();
  auto loader = pipeline.data().loader(index, {final_res}, cfg);
  auto classifier = cfg.eval.classifier_path.empty()
                        ? load_or_train_shape_classifier(cfg, dataset_dir, run_dir / "eval_classifier.pt")
                        : load_scripted_classifier(cfg.eval.classifier_path);
  const bool gt_boxes = cfg.model.box_source == "ground_truth";

  std::vector<torch::Tensor> probs, fake_features, real_features;
  std::int64_t produced = 0;
  std::size_t cursor = 0;
  std::size_t failures = 0;
  for (std::uint64_t chunk = 0; produced < request.n_images; ++chunk) {
    std::vector<TrainingExample> examples;
    const auto want = std::min<std::int64_t>(kClassifierBatch, request.n_images - produced);
    while (static_cast<std::int64_t>(examples.size()) < want) {
      auto ex = loader.load(cursor % loader.size(), static_cast<std::int64_t>(cursor / loader.size()));
      ++cursor;
      if (ex) {
        examples.push_back(std::move(*ex));
      } else if (++failures > loader.size()) {
        throw DataError("split '" + request.split + "' has no readable images");
      }
    }
    Batch batch = collate(examples);
    auto noise = torch::randn({batch.size(), cfg.model.noise_dim}, make_generator(mix_seed(request.seed, chunk)));
    auto out = pipeline.run(batch.caption_ids, batch.caption_lengths, batch.labels, noise,
                            gt_boxes ? std::optional(batch.boxes) : std::nullopt);
    auto [fake_logits, fake_feat] = classifier->score(out.images.back());
    probs.push_back(torch::softmax(fake_logits.to(torch::kDouble), 1));
    fake_features.push_back(fake_feat);
    if (request.metric != "is") real_features.push_back(classifier->score(batch.images[0]).second);
    produced += batch.size();
  }

  nlohmann::json report{{"split", request.split},
                        {"n_images", produced},
                        {"metric", request.metric},
                        {"classifier", classifier->description()},
                        {"checkpoint", request.checkpoint.string()},
                        {"box_source", cfg.model.box_source},
                        {"seed", request.seed}};
  if (request.metric != "fid") {
    auto is = inception_score(torch::cat(probs), cfg.eval.is_splits);
    report["inception_score"] = {{"mean", is.mean}, {"std", is.std}, {"splits", cfg.eval.is_splits}};
  }
  if (request.metric != "is") {
    report["fid"] = fid(ActivationStats::from_features(torch::cat(real_features)),
                        ActivationStats::from_features(torch::cat(fake_features)));
  }
  const auto path = run_dir / ("eval_" + request.split + ".json");
  std::ofstream(path) << report.dump(2) << '\n';
  manifest.artifact("report", path);
  manifest.set("report", report);
  manifest.write(RunPaths{run_dir}.manifest("evaluate"));
  return report;
}

}  // namespace phrasegen
