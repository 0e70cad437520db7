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
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "phrasegen/config.hpp"

namespace phrasegen {

/// Axis-aligned box as (x0, y0, x1, y1). Pixel or normalized coordinates
/// depending on context.
struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool has_positive_extent() const { return x1 > x0 && y1 > y0; }
  bool operator==(const Box&) const = default;
};

/// Smallest box enclosing both inputs.
Box union_box(const Box& a, const Box& b);

struct ObjectAnnotation {
  int category_id = 0;
  Box box;  // pixels
  bool operator==(const ObjectAnnotation&) const = default;
};

struct ImageRecord {
  std::int64_t image_id = 0;
  std::string image_path;
  int width = 0;
  int height = 0;
  std::vector<ObjectAnnotation> objects;
  std::vector<std::string> captions;
  bool operator==(const ImageRecord&) const = default;
};

void to_json(nlohmann::json& j, const ImageRecord& r);
void from_json(const nlohmann::json& j, ImageRecord& r);

struct Category {
  int id = 0;
  std::string name;
};

/// Drops objects below `min_area_frac` of the image area and rejects the
/// record when the survivor count falls outside [min_objects, max_objects].
/// Boxes are clipped to the image first; a box without positive extent
/// rejects the whole record.
std::optional<ImageRecord> filter_instances(const ImageRecord& record, double min_area_frac,
                                            int min_objects, int max_objects);

/// Lowercase, punctuation stripped, whitespace split.
std::vector<std::string> tokenize(const std::string& caption);

class Vocabulary {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kUnk = 1;

  Vocabulary() = default;

  /// Builds the token table from the given tokens (sorted, deduplicated) and
  /// fills the embedding table from a GloVe-format text file when
  /// `embeddings_path` is non-empty, otherwise from seeded Gaussian vectors.
  /// Tokens missing from the file get zero rows, as do pad and unk.
  static Vocabulary build(std::vector<std::string> tokens, const std::string& embeddings_path,
                          int dim, std::uint64_t seed);

  std::int64_t size() const { return static_cast<std::int64_t>(tokens_.size()); }
  int dim() const { return static_cast<int>(embeddings_.size(1)); }
  std::int64_t id(const std::string& token) const;
  const std::string& token(std::int64_t id) const;

  std::vector<std::int64_t> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<std::int64_t>& ids) const;

  /// |V| x dim, float.
  const torch::Tensor& embeddings() const { return embeddings_; }
  /// Mean word vector of a (possibly multi-word) phrase.
  torch::Tensor phrase_embedding(const std::string& phrase) const;

  /// Fingerprint of the token list; checkpoints refuse mismatches.
  std::string hash() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int64_t> index_;
  torch::Tensor embeddings_;
};

/// One split file: categories plus records.
struct DatasetIndex {
  std::vector<Category> categories;
  std::vector<ImageRecord> records;

  int num_categories() const { return static_cast<int>(categories.size()); }
  /// Contiguous label (0..C-1) of a dataset category id.
  int label_of(int category_id) const;
  const std::string& category_name(int label) const { return categories.at(label).name; }

  void save(const std::filesystem::path& path) const;
  static DatasetIndex load(const std::filesystem::path& path);
};

struct Splits {
  DatasetIndex train, val, test;
};

/// Reads the annotation files under `dataset_dir/annotations`, filters the
/// records, partitions them and writes `splits/{train,val,test}.json` plus
/// `splits/vocab.json`. Val/test come from the validation annotations only;
/// validation records not drawn into val/test join train. Deterministic in
/// `data.seed`.
Splits build_splits(const std::filesystem::path& dataset_dir, const DataConfig& data,
                    int word_dim = 50);

/// Loads previously written split files.
Splits load_splits(const std::filesystem::path& dataset_dir);
Vocabulary load_vocabulary(const std::filesystem::path& dataset_dir);

struct TrainingExample {
  std::int64_t image_id = 0;
  std::vector<torch::Tensor> images;  // per resolution, 3xRxR in [-1, 1]
  std::vector<int> resolutions;
  torch::Tensor object_label_ids;  // int64 [n]
  torch::Tensor boxes;             // float [n, 4], normalized
  torch::Tensor caption_ids;       // int64 [max_len], padded
  int caption_length = 0;
  int caption_index = 0;
  std::string caption;

  int num_objects() const { return static_cast<int>(object_label_ids.size(0)); }
};

/// Serves examples from one split. Read-only after construction.
class ExampleLoader {
 public:
  ExampleLoader(DatasetIndex index, Vocabulary vocab, std::vector<int> resolutions,
                int max_caption_len, std::uint64_t seed);

  std::size_t size() const { return index_.records.size(); }
  const DatasetIndex& index() const { return index_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const std::vector<int>& resolutions() const { return resolutions_; }

  /// One caption per record per epoch, chosen uniformly by a hash of
  /// (seed, epoch, image id). Returns nullopt (and logs) when the image
  /// cannot be decoded.
  std::optional<TrainingExample> load(std::size_t i, std::int64_t epoch) const;

  /// Encodes a caption string: tokenized, truncated to the maximum length,
  /// padded. Returns (ids, valid length).
  std::pair<torch::Tensor, int> encode_caption(const std::string& caption) const;

  /// Object-label GloVe table, C x dim (category names embedded as the mean
  /// of their words).
  torch::Tensor category_embeddings() const;

 private:
  DatasetIndex index_;
  Vocabulary vocab_;
  std::vector<int> resolutions_;
  int max_caption_len_;
  std::uint64_t seed_;
};

/// A collated batch. Per-example graph inputs stay ragged.
struct Batch {
  std::vector<torch::Tensor> images;  // per resolution, B x 3 x R x R
  std::vector<torch::Tensor> labels;  // per example, int64 [n]
  std::vector<torch::Tensor> boxes;   // per example, [n, 4]
  torch::Tensor caption_ids;          // B x T
  torch::Tensor caption_lengths;      // int64 [B]
  std::vector<std::int64_t> image_ids;
  std::vector<std::string> captions;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
};

Batch collate(const std::vector<TrainingExample>& examples);

/// Deterministic record order for an epoch: a keyed sort, independent of
/// the standard library's shuffle implementation.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::int64_t epoch);

/// Loads batch number `step` (0-based) of a deterministic epoch stream,
/// skipping unreadable records.
Batch load_batch(const ExampleLoader& loader, std::int64_t step, int batch_size, std::uint64_t seed);

struct SyntheticOptions {
  int n_images = 32;
  int n_categories = 5;
  int vocab_size = 24;
  std::uint64_t seed = 7;
  int image_size = 128;
  int min_objects = 3;
  int max_objects = 5;
  double val_fraction = 0.2;
};

/// Writes a COCO-style dataset of procedurally drawn shapes under `dir`:
/// images/{train,val}/*.png, annotations/{instances,captions}_{train,val}.json
/// and embeddings/words50.txt. Every object fills its box (patterned) and
/// boxes never touch, so each record passes the default filter.
void make_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& opts);

/// Category names used by the synthetic generator, in label order.
std::vector<std::string> synthetic_category_names(int n_categories);

}  // namespace phrasegen
