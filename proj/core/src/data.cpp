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

#include "phrasegen/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "phrasegen/common.hpp"
#include "phrasegen/image_io.hpp"

namespace fs = std::filesystem;

namespace phrasegen {

Box union_box(const Box& a, const Box& b) {
  return Box{std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
             std::max(a.y1, b.y1)};
}

void to_json(nlohmann::json& j, const ImageRecord& r) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : r.objects) {
    objects.push_back({{"category_id", o.category_id},
                       {"box", {o.box.x0, o.box.y0, o.box.x1, o.box.y1}}});
  }
  j = nlohmann::json{{"image_id", r.image_id}, {"image_path", r.image_path},
                     {"width", r.width},       {"height", r.height},
                     {"objects", objects},     {"captions", r.captions}};
}

void from_json(const nlohmann::json& j, ImageRecord& r) {
  j.at("image_id").get_to(r.image_id);
  j.at("image_path").get_to(r.image_path);
  j.at("width").get_to(r.width);
  j.at("height").get_to(r.height);
  j.at("captions").get_to(r.captions);
  r.objects.clear();
  for (const auto& o : j.at("objects")) {
    const auto& b = o.at("box");
    r.objects.push_back({o.at("category_id").get<int>(),
                         Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                             b[3].get<double>()}});
  }
}

std::optional<ImageRecord> filter_instances(const ImageRecord& record, double min_area_frac,
                                            int min_objects, int max_objects) {
  const double image_area = static_cast<double>(record.width) * record.height;
  if (image_area <= 0.0) {
    log::warn("record ", record.image_id, ": non-positive image size, rejected");
    return std::nullopt;
  }
  ImageRecord out = record;
  out.objects.clear();
  for (const auto& o : record.objects) {
    Box b{std::clamp(o.box.x0, 0.0, double(record.width)),
          std::clamp(o.box.y0, 0.0, double(record.height)),
          std::clamp(o.box.x1, 0.0, double(record.width)),
          std::clamp(o.box.y1, 0.0, double(record.height))};
    if (!b.has_positive_extent()) {
      log::warn("record ", record.image_id, ": malformed box (", o.box.x0, ",", o.box.y0, ",",
                o.box.x1, ",", o.box.y1, "), rejected");
      return std::nullopt;
    }
    if (b.area() >= min_area_frac * image_area) out.objects.push_back({o.category_id, b});
  }
  const int n = static_cast<int>(out.objects.size());
  if (n < min_objects || n > max_objects) return std::nullopt;
  return out;
}

std::vector<std::string> tokenize(const std::string& caption) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : caption) {
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (!std::ispunct(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

namespace {

std::unordered_map<std::string, std::vector<float>> read_word_vectors(
    const std::string& path, int dim, const std::set<std::string>& wanted) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open word embedding file '" + path + "'");
  std::unordered_map<std::string, std::vector<float>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word) || !wanted.count(word)) continue;
    std::vector<float> v(dim);
    for (int i = 0; i < dim; ++i) {
      if (!(ls >> v[i])) throw DataError("embedding row for '" + word + "' has fewer than " +
                                         std::to_string(dim) + " values");
    }
    out.emplace(word, std::move(v));
  }
  return out;
}

}  // namespace

Vocabulary Vocabulary::build(std::vector<std::string> tokens, const std::string& embeddings_path,
                             int dim, std::uint64_t seed) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  tokens.erase(std::remove_if(tokens.begin(), tokens.end(),
                              [](const std::string& t) { return t == "<pad>" || t == "<unk>"; }),
               tokens.end());
  Vocabulary v;
  v.tokens_ = {"<pad>", "<unk>"};
  v.tokens_.insert(v.tokens_.end(), tokens.begin(), tokens.end());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = std::int64_t(i);

  v.embeddings_ = torch::zeros({v.size(), dim});
  auto acc = v.embeddings_.accessor<float, 2>();
  if (!embeddings_path.empty()) {
    std::set<std::string> wanted(tokens.begin(), tokens.end());
    auto vectors = read_word_vectors(embeddings_path, dim, wanted);
    std::size_t missing = 0;
    for (std::size_t i = 2; i < v.tokens_.size(); ++i) {
      auto it = vectors.find(v.tokens_[i]);
      if (it == vectors.end()) {
        ++missing;
        continue;
      }
      for (int d = 0; d < dim; ++d) acc[i][d] = it->second[d];
    }
    if (missing > 0) log::warn(missing, " vocabulary tokens have no embedding row (zero vectors)");
  } else {
    // Per-token seeding keeps a word's vector independent of the rest of
    // the vocabulary.
    for (std::size_t i = 2; i < v.tokens_.size(); ++i) {
      auto gen = make_generator(mix_seed(seed, fnv1a(v.tokens_[i])));
      auto row = torch::randn({dim}, gen) / std::sqrt(static_cast<double>(dim));
      v.embeddings_[static_cast<std::int64_t>(i)].copy_(row);
    }
  }
  return v;
}

std::int64_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int64_t id) const { return tokens_.at(id); }

std::vector<std::int64_t> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::int64_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<std::int64_t>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(token(i));
  return out;
}

torch::Tensor Vocabulary::phrase_embedding(const std::string& phrase) const {
  auto words = tokenize(phrase);
  if (words.empty()) return torch::zeros({dim()});
  auto sum = torch::zeros({dim()});
  for (const auto& w : words) sum += embeddings_[id(w)];
  return sum / static_cast<double>(words.size());
}

std::string Vocabulary::hash() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined.push_back('\n');
  }
  return hex64(fnv1a(joined));
}

void Vocabulary::save(const fs::path& path) const {
  nlohmann::json j;
  j["tokens"] = tokens_;
  j["dim"] = dim();
  auto c = embeddings_.contiguous();
  std::vector<float> flat(c.data_ptr<float>(), c.data_ptr<float>() + c.numel());
  j["vectors"] = flat;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary '" + path.string() + "'");
  out << j.dump() << '\n';
}

Vocabulary Vocabulary::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary '" + path.string() + "'");
  nlohmann::json j;
  in >> j;
  Vocabulary v;
  j.at("tokens").get_to(v.tokens_);
  const int dim = j.at("dim").get<int>();
  auto flat = j.at("vectors").get<std::vector<float>>();
  if (flat.size() != v.tokens_.size() * static_cast<std::size_t>(dim)) {
    throw DataError("vocabulary '" + path.string() + "' has inconsistent vector table");
  }
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = std::int64_t(i);
  v.embeddings_ = torch::from_blob(flat.data(), {v.size(), dim}, torch::kFloat).clone();
  return v;
}

// ---------------------------------------------------------------------------
// Dataset index and splits
// ---------------------------------------------------------------------------

int DatasetIndex::label_of(int category_id) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i].id == category_id) return static_cast<int>(i);
  }
  throw DataError("unknown category id " + std::to_string(category_id));
}

void DatasetIndex::save(const fs::path& path) const {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : categories) cats.push_back({{"id", c.id}, {"name", c.name}});
  nlohmann::json j{{"categories", cats}, {"records", records}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split file '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

DatasetIndex DatasetIndex::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read split file '" + path.string() + "'");
  nlohmann::json j;
  in >> j;
  DatasetIndex idx;
  for (const auto& c : j.at("categories")) {
    idx.categories.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
  }
  j.at("records").get_to(idx.records);
  return idx;
}

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing annotation file '" + path.string() + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse annotation file '" + path.string() + "': " + e.what());
  }
}

fs::path first_existing(const std::vector<fs::path>& candidates) {
  for (const auto& c : candidates) {
    if (fs::exists(c)) return c;
  }
  return {};
}

struct Pool {
  std::map<int, std::string> categories;
  std::vector<ImageRecord> records;
};

// Reads one partition ("train" or "val") of a COCO-style dataset.
Pool read_partition(const fs::path& root, const std::string& part) {
  const fs::path ann = root / "annotations";
  fs::path inst = first_existing({ann / ("instances_" + part + ".json"),
                                  ann / ("instances_" + part + "2017.json")});
  fs::path caps = first_existing({ann / ("captions_" + part + ".json"),
                                  ann / ("captions_" + part + "2017.json")});
  if (inst.empty()) throw ConfigError("missing annotation file " + (ann / ("instances_" + part + ".json")).string());
  if (caps.empty()) throw ConfigError("missing annotation file " + (ann / ("captions_" + part + ".json")).string());
  std::vector<nlohmann::json> instance_docs{read_json(inst)};
  fs::path stuff = first_existing({ann / ("stuff_" + part + ".json"),
                                   ann / ("stuff_" + part + "2017.json")});
  if (!stuff.empty()) instance_docs.push_back(read_json(stuff));
  const nlohmann::json captions = read_json(caps);

  Pool pool;
  std::map<std::int64_t, ImageRecord> by_id;
  const fs::path image_dir = first_existing({root / "images" / part, root / (part + "2017")});
  for (const auto& doc : instance_docs) {
    for (const auto& c : doc.at("categories")) {
      pool.categories[c.at("id").get<int>()] = c.at("name").get<std::string>();
    }
    for (const auto& im : doc.at("images")) {
      const auto id = im.at("id").get<std::int64_t>();
      if (by_id.count(id)) continue;
      ImageRecord r;
      r.image_id = id;
      r.image_path = (image_dir / im.at("file_name").get<std::string>()).string();
      r.width = im.at("width").get<int>();
      r.height = im.at("height").get<int>();
      by_id.emplace(id, std::move(r));
    }
    for (const auto& a : doc.at("annotations")) {
      if (a.value("iscrowd", 0) != 0) continue;
      auto it = by_id.find(a.at("image_id").get<std::int64_t>());
      if (it == by_id.end()) continue;
      const auto& b = a.at("bbox");
      const double x = b[0].get<double>(), y = b[1].get<double>();
      it->second.objects.push_back(
          {a.at("category_id").get<int>(), Box{x, y, x + b[2].get<double>(), y + b[3].get<double>()}});
    }
  }
  for (const auto& a : captions.at("annotations")) {
    auto it = by_id.find(a.at("image_id").get<std::int64_t>());
    if (it != by_id.end()) it->second.captions.push_back(a.at("caption").get<std::string>());
  }
  for (auto& [id, r] : by_id) {
    if (!r.captions.empty()) pool.records.push_back(std::move(r));
  }
  return pool;
}

std::vector<ImageRecord> filter_all(const std::vector<ImageRecord>& in, const DataConfig& data) {
  std::vector<ImageRecord> out;
  for (const auto& r : in) {
    if (auto f = filter_instances(r, data.min_area_frac, data.min_objects, data.max_objects)) {
      out.push_back(std::move(*f));
    }
  }
  return out;
}

void keyed_shuffle(std::vector<ImageRecord>& records, std::uint64_t seed) {
  std::stable_sort(records.begin(), records.end(), [seed](const ImageRecord& a, const ImageRecord& b) {
    const auto ka = mix_seed(seed, static_cast<std::uint64_t>(a.image_id));
    const auto kb = mix_seed(seed, static_cast<std::uint64_t>(b.image_id));
    return ka != kb ? ka < kb : a.image_id < b.image_id;
  });
}

}  // namespace

Splits build_splits(const fs::path& dataset_dir, const DataConfig& data, int word_dim) {
  Pool train_pool = read_partition(fs::absolute(dataset_dir), "train");
  Pool val_pool = read_partition(fs::absolute(dataset_dir), "val");

  std::map<int, std::string> categories = train_pool.categories;
  categories.insert(val_pool.categories.begin(), val_pool.categories.end());

  auto train = filter_all(train_pool.records, data);
  auto val = filter_all(val_pool.records, data);
  keyed_shuffle(val, data.seed);

  std::size_t n_val = 0, n_test = 0;
  if (!data.split_ratios.empty()) {
    const double total = static_cast<double>(train.size() + val.size());
    n_val = static_cast<std::size_t>(std::llround(data.split_ratios[1] * total));
    n_test = static_cast<std::size_t>(std::llround(data.split_ratios[2] * total));
  } else {
    n_val = static_cast<std::size_t>(data.val_count);
    n_test = static_cast<std::size_t>(data.test_count);
  }
  if (n_val + n_test > val.size()) {
    throw DataError("validation pool has " + std::to_string(val.size()) +
                    " records after filtering; " + std::to_string(n_val + n_test) + " requested");
  }
  Splits s;
  for (const auto& [id, name] : categories) {
    s.train.categories.push_back({id, name});
  }
  s.val.categories = s.test.categories = s.train.categories;
  s.val.records.assign(val.begin(), val.begin() + n_val);
  s.test.records.assign(val.begin() + n_val, val.begin() + n_val + n_test);
  s.train.records = std::move(train);
  s.train.records.insert(s.train.records.end(), val.begin() + n_val + n_test, val.end());
  std::sort(s.train.records.begin(), s.train.records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  log::info("splits: ", s.train.records.size(), " train, ", s.val.records.size(), " val, ",
            s.test.records.size(), " test");

  const fs::path out = dataset_dir / "splits";
  fs::create_directories(out);
  s.train.save(out / "train.json");
  s.val.save(out / "val.json");
  s.test.save(out / "test.json");

  std::vector<std::string> tokens;
  for (const auto& r : s.train.records) {
    for (const auto& c : r.captions) {
      auto t = tokenize(c);
      tokens.insert(tokens.end(), t.begin(), t.end());
    }
  }
  for (const auto& c : s.train.categories) {
    auto t = tokenize(c.name);
    tokens.insert(tokens.end(), t.begin(), t.end());
  }
  std::string embeddings = data.embeddings_path;
  if (embeddings.empty() && fs::exists(dataset_dir / "embeddings" / "words50.txt")) {
    embeddings = (dataset_dir / "embeddings" / "words50.txt").string();
  }
  Vocabulary::build(std::move(tokens), embeddings, word_dim, data.seed).save(out / "vocab.json");
  return s;
}

Splits load_splits(const fs::path& dataset_dir) {
  const fs::path dir = dataset_dir / "splits";
  if (!fs::exists(dir / "train.json")) {
    throw PrerequisiteError("prepare-data", "no split files under '" + dir.string() +
                                                "'; run prepare-data first");
  }
  return Splits{DatasetIndex::load(dir / "train.json"), DatasetIndex::load(dir / "val.json"),
                DatasetIndex::load(dir / "test.json")};
}

Vocabulary load_vocabulary(const fs::path& dataset_dir) {
  const fs::path p = dataset_dir / "splits" / "vocab.json";
  if (!fs::exists(p)) {
    throw PrerequisiteError("prepare-data", "no vocabulary at '" + p.string() + "'; run prepare-data first");
  }
  return Vocabulary::load(p);
}

// ---------------------------------------------------------------------------
// Example loading
// ---------------------------------------------------------------------------

ExampleLoader::ExampleLoader(DatasetIndex index, Vocabulary vocab, std::vector<int> resolutions,
                             int max_caption_len, std::uint64_t seed)
    : index_(std::move(index)),
      vocab_(std::move(vocab)),
      resolutions_(std::move(resolutions)),
      max_caption_len_(max_caption_len),
      seed_(seed) {}

std::pair<torch::Tensor, int> ExampleLoader::encode_caption(const std::string& caption) const {
  auto ids = vocab_.encode(tokenize(caption));
  const int length = std::min<int>(static_cast<int>(ids.size()), max_caption_len_);
  auto out = torch::full({max_caption_len_}, Vocabulary::kPad, torch::kInt64);
  for (int i = 0; i < length; ++i) out[i] = ids[i];
  return {out, length};
}

torch::Tensor ExampleLoader::category_embeddings() const {
  std::vector<torch::Tensor> rows;
  for (const auto& c : index_.categories) rows.push_back(vocab_.phrase_embedding(c.name));
  return torch::stack(rows);
}

std::optional<TrainingExample> ExampleLoader::load(std::size_t i, std::int64_t epoch) const {
  const ImageRecord& r = index_.records.at(i);
  TrainingExample ex;
  ex.image_id = r.image_id;
  ex.resolutions = resolutions_;
  auto decoded = read_image_rgb(r.image_path);
  if (!decoded) {
    log::warn("skipping record ", r.image_id, ": cannot decode '", r.image_path, "'");
    return std::nullopt;
  }
  for (int res : resolutions_) ex.images.push_back(resize_image(*decoded, res, res));

  const int n = static_cast<int>(r.objects.size());
  ex.object_label_ids = torch::empty({n}, torch::kInt64);
  ex.boxes = torch::empty({n, 4});
  for (int k = 0; k < n; ++k) {
    const auto& o = r.objects[k];
    ex.object_label_ids[k] = index_.label_of(o.category_id);
    ex.boxes[k][0] = o.box.x0 / r.width;
    ex.boxes[k][1] = o.box.y0 / r.height;
    ex.boxes[k][2] = o.box.x1 / r.width;
    ex.boxes[k][3] = o.box.y1 / r.height;
  }
  if (r.captions.empty()) throw DataError("record " + std::to_string(r.image_id) + " has no caption");
  const auto key = mix_seed(mix_seed(seed_, static_cast<std::uint64_t>(epoch)),
                            static_cast<std::uint64_t>(r.image_id));
  ex.caption_index = static_cast<int>(key % r.captions.size());
  ex.caption = r.captions[ex.caption_index];
  std::tie(ex.caption_ids, ex.caption_length) = encode_caption(ex.caption);
  if (ex.caption_length == 0) {
    log::warn("record ", r.image_id, ": caption '", ex.caption, "' has no tokens; using <unk>");
    ex.caption_ids[0] = Vocabulary::kUnk;
    ex.caption_length = 1;
  }
  return ex;
}

Batch collate(const std::vector<TrainingExample>& examples) {
  if (examples.empty()) throw DataError("cannot collate an empty batch");
  Batch b;
  const std::size_t n_res = examples.front().images.size();
  for (std::size_t k = 0; k < n_res; ++k) {
    std::vector<torch::Tensor> imgs;
    for (const auto& e : examples) imgs.push_back(e.images.at(k));
    b.images.push_back(torch::stack(imgs));
  }
  std::vector<torch::Tensor> caps;
  std::vector<std::int64_t> lengths;
  for (const auto& e : examples) {
    b.labels.push_back(e.object_label_ids);
    b.boxes.push_back(e.boxes);
    caps.push_back(e.caption_ids);
    lengths.push_back(e.caption_length);
    b.image_ids.push_back(e.image_id);
    b.captions.push_back(e.caption);
  }
  b.caption_ids = torch::stack(caps);
  b.caption_lengths = torch::tensor(lengths, torch::kInt64);
  return b;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const auto s = mix_seed(seed, static_cast<std::uint64_t>(epoch));
  std::stable_sort(order.begin(), order.end(), [s](std::size_t a, std::size_t b) {
    return mix_seed(s, a) < mix_seed(s, b);
  });
  return order;
}

Batch load_batch(const ExampleLoader& loader, std::int64_t step, int batch_size, std::uint64_t seed) {
  const auto n = static_cast<std::int64_t>(loader.size());
  if (n == 0) throw DataError("cannot draw batches from an empty split");
  std::vector<TrainingExample> examples;
  std::int64_t cursor = step * batch_size;
  std::int64_t attempts = 0;
  std::int64_t cached_epoch = -1;
  std::vector<std::size_t> order;
  while (static_cast<int>(examples.size()) < batch_size) {
    if (++attempts > 4 * n + batch_size) throw DataError("too many unreadable records in split");
    const std::int64_t epoch = cursor / n;
    if (epoch != cached_epoch) {
      order = epoch_permutation(static_cast<std::size_t>(n), seed, epoch);
      cached_epoch = epoch;
    }
    if (auto ex = loader.load(order[static_cast<std::size_t>(cursor % n)], epoch)) {
      examples.push_back(std::move(*ex));
    }
    ++cursor;
  }
  return collate(examples);
}

}  // namespace phrasegen
