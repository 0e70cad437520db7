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


#include "phrasegen/pipeline.hpp"

#include <opencv2/imgcodecs.hpp>

#include "phrasegen/checkpoint.hpp"
#include "phrasegen/common.hpp"
#include "phrasegen/image_io.hpp"

namespace fs = std::filesystem;

namespace phrasegen {

ScenePipeline::ScenePipeline(Config cfg, const fs::path& dataset_dir, const fs::path& run_dir,
                             const fs::path& checkpoint)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  data_ = DataContext::load(dataset_dir);
  encoder_ = std::make_unique<ExampleLoader>(data_.loader(data_.splits.train, {}, cfg_));
  if (!fs::exists(checkpoint)) {
    throw PrerequisiteError("train", "generator checkpoint '" + checkpoint.string() +
                                         "' not found; run `phrasegen train` first");
  }
  frozen_ = load_conditioning(cfg_, data_, RunPaths{run_dir});
  generator_ = Generator(cfg_.model);
  CheckpointReader r(checkpoint, "train");
  r.require("model", model_fingerprint(cfg_.model), "model configuration");
  r.require("vocab_hash", data_.vocab.hash(), "vocabulary");
  r.module("generator", *generator_);
  freeze(*generator_);
}

torch::Tensor ScenePipeline::labels_of(const std::vector<std::string>& names) const {
  const auto& cats = data_.splits.train.categories;
  std::vector<std::int64_t> labels;
  for (const auto& name : names) {
    auto it = std::find_if(cats.begin(), cats.end(), [&](const Category& c) { return c.name == name; });
    if (it == cats.end()) {
      std::string known;
      for (const auto& c : cats) known += (known.empty() ? "" : ", ") + c.name;
      throw DataError("unknown object category '" + name + "' (known: " + known + ")");
    }
    labels.push_back(static_cast<std::int64_t>(it - cats.begin()));
  }
  return torch::tensor(labels, torch::kInt64);
}

GeneratorOutput ScenePipeline::run(const torch::Tensor& caption_ids, const torch::Tensor& lengths,
                                   const std::vector<torch::Tensor>& labels, const torch::Tensor& noise,
                                   const std::optional<std::vector<torch::Tensor>>& boxes) {
  torch::NoGradGuard no_grad;
  auto conds = frozen_.scene(caption_ids, lengths, labels, noise);
  return generator_(conds, boxes);
}

GenerationResult ScenePipeline::generate(const GenerationRequest& request) {
  if (request.objects.size() < 2) throw DataError("at least two objects are needed");
  const int n_stages = request.stages <= 0 ? cfg_.model.n_stages : request.stages;
  if (n_stages > cfg_.model.n_stages) {
    throw ConfigError("requested " + std::to_string(n_stages) + " stages but the model has " +
                      std::to_string(cfg_.model.n_stages));
  }
  auto labels = labels_of(request.objects);
  auto [ids, len] = encoder_->encode_caption(request.caption);
  if (len == 0) throw DataError("caption has no tokens");
  auto gen = make_generator(request.seed);
  auto noise = torch::randn({1, cfg_.model.noise_dim}, gen);

  std::optional<std::vector<torch::Tensor>> boxes;
  if (request.box_source == "ground_truth") {
    if (request.boxes.size() != request.objects.size()) {
      throw ConfigError("ground-truth box source needs one box per object");
    }
    auto t = torch::empty({static_cast<std::int64_t>(request.boxes.size()), 4});
    for (std::size_t i = 0; i < request.boxes.size(); ++i) {
      const auto& b = request.boxes[i];
      if (!b.has_positive_extent() || b.x0 < 0 || b.y0 < 0 || b.x1 > 1 || b.y1 > 1) {
        throw ConfigError("boxes must be normalized (x0,y0,x1,y1) with positive extent");
      }
      t[i] = torch::tensor({b.x0, b.y0, b.x1, b.y1}, torch::kFloat);
    }
    boxes = std::vector<torch::Tensor>{t};
  } else if (request.box_source != "predicted") {
    throw ConfigError("box source must be 'predicted' or 'ground_truth', got '" + request.box_source + "'");
  }

  auto out = run(ids.unsqueeze(0), torch::tensor({static_cast<std::int64_t>(len)}, torch::kInt64), {labels}, noise,
                 boxes);
  GenerationResult result;
  for (int s = 0; s < n_stages; ++s) result.images.push_back(out.images[s][0]);
  result.boxes = out.layout_boxes[0];
  return result;
}

namespace {

std::vector<cv::Mat> row_of(const GenerationRequest& request, const GenerationResult& result, int cell) {
  std::string objects;
  for (const auto& o : request.objects) objects += (objects.empty() ? "" : ", ") + o;
  std::vector<cv::Mat> row{text_tile({request.caption, "[" + objects + "]"}, cell)};
  for (const auto& img : result.images) row.push_back(to_mat(img));
  return row;
}

void write_mat(const fs::path& path, const cv::Mat& mat) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw DataError("cannot write image '" + path.string() + "'");
}

}  // namespace

std::vector<fs::path> write_generation(const fs::path& out_dir, const GenerationRequest& request,
                                       const GenerationResult& result) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& img : result.images) {
    char name[32];
    std::snprintf(name, sizeof(name), "stage_%03d.png", static_cast<int>(img.size(-1)));
    const auto path = out_dir / name;
    write_image(path.string(), img);
    written.push_back(path);
  }
  const int cell = static_cast<int>(result.images.back().size(-1));
  const auto grid = out_dir / "grid.png";
  write_mat(grid, tile_rows({row_of(request, result, cell)}, cell));
  written.push_back(grid);
  return written;
}

void emit_sample_grid(ScenePipeline& pipeline, const std::vector<GenerationRequest>& examples,
                      const fs::path& out_path) {
  if (examples.empty()) throw DataError("sample grid needs at least one example");
  std::vector<std::vector<cv::Mat>> rows;
  int cell = 0;
  for (const auto& ex : examples) {
    auto result = pipeline.generate(ex);
    cell = std::max(cell, static_cast<int>(result.images.back().size(-1)));
    rows.push_back(row_of(ex, result, cell));
  }
  write_mat(out_path, tile_rows(rows, cell));
}

}  // namespace phrasegen
