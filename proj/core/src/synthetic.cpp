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

// Procedural stand-in for COCO: patterned shapes on flat backgrounds with
// template captions describing one spatial relation each.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "phrasegen/common.hpp"
#include "phrasegen/data.hpp"

namespace fs = std::filesystem;

namespace phrasegen {
namespace {

constexpr std::array<const char*, 8> kShapes{"block",   "stripe", "checker", "octagon",
                                             "rounded", "bar",    "frame",   "diamond"};

struct NamedColor {
  const char* name;
  cv::Scalar bgr;
};
const std::array<NamedColor, 8> kColors{{{"red", {40, 40, 230}},
                                         {"green", {60, 200, 60}},
                                         {"blue", {230, 90, 30}},
                                         {"yellow", {40, 220, 240}},
                                         {"purple", {200, 60, 160}},
                                         {"orange", {20, 140, 250}},
                                         {"cyan", {230, 220, 40}},
                                         {"white", {245, 245, 245}}}};

// splitmix64 stream; integer arithmetic only so output is platform independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ = mix_seed(state_, 0x5851f42d4c957f2dULL);
    return state_;
  }
  int uniform(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t state_;
};

struct PixelBox {
  int x0, y0, x1, y1;  // half-open
  bool overlaps(const PixelBox& o, int gap) const {
    return !(x1 + gap <= o.x0 || o.x1 + gap <= x0 || y1 + gap <= o.y0 || o.y1 + gap <= y0);
  }
};

cv::Scalar shade(const cv::Scalar& c, double f) { return cv::Scalar(c[0] * f, c[1] * f, c[2] * f); }

void draw_object(cv::Mat& img, int shape, const cv::Scalar& color, const PixelBox& b) {
  const cv::Scalar dark = shade(color, 0.55);
  const cv::Rect rect(b.x0, b.y0, b.x1 - b.x0, b.y1 - b.y0);
  const int side = std::min(rect.width, rect.height);
  cv::Mat roi = img(rect);
  switch (shape) {
    case 0:  // block
      roi.setTo(color);
      break;
    case 1:  // horizontal stripes
      for (int y = 0; y < rect.height; ++y) roi.row(y).setTo((y / 3) % 2 ? dark : color);
      break;
    case 2:  // checker
      for (int y = 0; y < rect.height; ++y) {
        for (int x = 0; x < rect.width; ++x) {
          const cv::Scalar& c = ((x / 4) + (y / 4)) % 2 ? dark : color;
          roi.at<cv::Vec3b>(y, x) = cv::Vec3b(cv::saturate_cast<uchar>(c[0]),
                                              cv::saturate_cast<uchar>(c[1]),
                                              cv::saturate_cast<uchar>(c[2]));
        }
      }
      break;
    case 3: {  // octagon
      const int cut = std::max(1, static_cast<int>(0.15 * side));
      const int w = rect.width - 1, h = rect.height - 1;
      std::vector<cv::Point> pts{{cut, 0}, {w - cut, 0}, {w, cut},     {w, h - cut},
                                 {w - cut, h}, {cut, h}, {0, h - cut}, {0, cut}};
      cv::fillConvexPoly(roi, pts, color, cv::LINE_8);
      break;
    }
    case 4: {  // rounded rectangle
      const int r = std::max(1, static_cast<int>(0.2 * side));
      const int w = rect.width, h = rect.height;
      cv::rectangle(roi, cv::Rect(r, 0, w - 2 * r, h), color, cv::FILLED);
      cv::rectangle(roi, cv::Rect(0, r, w, h - 2 * r), color, cv::FILLED);
      for (auto c : {cv::Point(r, r), cv::Point(w - 1 - r, r), cv::Point(r, h - 1 - r),
                     cv::Point(w - 1 - r, h - 1 - r)}) {
        cv::circle(roi, c, r, color, cv::FILLED, cv::LINE_8);
      }
      break;
    }
    case 5:  // vertical bars
      for (int x = 0; x < rect.width; ++x) roi.col(x).setTo((x / 3) % 2 ? dark : color);
      break;
    case 6: {  // frame
      roi.setTo(color);
      const int inset = std::max(1, side / 4);
      cv::rectangle(roi, cv::Rect(inset, inset, rect.width - 2 * inset, rect.height - 2 * inset),
                    dark, cv::FILLED);
      break;
    }
    default: {  // diamond on a dark field
      roi.setTo(dark);
      const int w = rect.width - 1, h = rect.height - 1;
      std::vector<cv::Point> pts{{w / 2, 0}, {w, h / 2}, {w / 2, h}, {0, h / 2}};
      cv::fillConvexPoly(roi, pts, color, cv::LINE_8);
      break;
    }
  }
}

std::string relation(const PixelBox& a, const PixelBox& b) {
  const double dx = (b.x0 + b.x1) / 2.0 - (a.x0 + a.x1) / 2.0;
  const double dy = (b.y0 + b.y1) / 2.0 - (a.y0 + a.y1) / 2.0;
  if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? "left of" : "right of";
  return dy > 0 ? "above" : "below";
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

}  // namespace

std::vector<std::string> synthetic_category_names(int n_categories) {
  if (n_categories < 3 || n_categories > static_cast<int>(kShapes.size())) {
    throw ConfigError("synthetic datasets support 3 to 8 categories");
  }
  return {kShapes.begin(), kShapes.begin() + n_categories};
}

void make_synthetic_dataset(const fs::path& dir, const SyntheticOptions& opts) {
  const auto names = synthetic_category_names(opts.n_categories);
  if (opts.n_images < 4) throw ConfigError("synthetic datasets need at least 4 images");
  if (opts.min_objects < 2 || opts.max_objects < opts.min_objects || opts.max_objects > 8) {
    throw ConfigError("synthetic object counts must satisfy 2 <= min <= max <= 8");
  }
  constexpr int kFixedWords = 6;  // a, left, right, of, above, below
  const int n_colors = std::clamp(opts.vocab_size - kFixedWords - opts.n_categories, 2,
                                  static_cast<int>(kColors.size()));
  const int S = opts.image_size;
  const int n_val = std::max(2, static_cast<int>(std::lround(opts.val_fraction * opts.n_images)));

  fs::create_directories(dir / "images" / "train");
  fs::create_directories(dir / "images" / "val");
  fs::create_directories(dir / "annotations");
  fs::create_directories(dir / "embeddings");

  nlohmann::json categories = nlohmann::json::array();
  for (int c = 0; c < opts.n_categories; ++c) categories.push_back({{"id", c + 1}, {"name", names[c]}});

  struct Part {
    nlohmann::json images = nlohmann::json::array();
    nlohmann::json objects = nlohmann::json::array();
    nlohmann::json captions = nlohmann::json::array();
  } parts[2];

  Rng rng(mix_seed(opts.seed, 0x73796e74));
  std::int64_t ann_id = 1;
  for (int i = 0; i < opts.n_images; ++i) {
    const int part = i < opts.n_images - n_val ? 0 : 1;
    const std::int64_t image_id = i + 1;
    char file_name[32];
    std::snprintf(file_name, sizeof(file_name), "%06lld.png", static_cast<long long>(image_id));

    std::vector<PixelBox> boxes;
    const int n = rng.uniform(opts.min_objects, opts.max_objects);
    for (int attempt = 0; static_cast<int>(boxes.size()) < n; ++attempt) {
      if (attempt > 2000) {  // crowded draw; restart the layout
        boxes.clear();
        attempt = 0;
      }
      const int w = rng.uniform(S * 18 / 100, S * 34 / 100);
      const int h = rng.uniform(S * 18 / 100, S * 34 / 100);
      const int x0 = rng.uniform(1, S - w - 1);
      const int y0 = rng.uniform(1, S - h - 1);
      PixelBox b{x0, y0, x0 + w, y0 + h};
      bool ok = true;
      for (const auto& o : boxes) ok = ok && !b.overlaps(o, 2);
      if (ok) boxes.push_back(b);
    }

    const int bg = rng.uniform(20, 60);
    cv::Mat img(S, S, CV_8UC3, cv::Scalar(bg, bg, bg));
    std::vector<int> shape(n), color(n);
    for (int k = 0; k < n; ++k) {
      shape[k] = rng.uniform(0, opts.n_categories - 1);
      color[k] = rng.uniform(0, n_colors - 1);
      draw_object(img, shape[k], kColors[color[k]].bgr, boxes[k]);
      const auto& b = boxes[k];
      parts[part].objects.push_back({{"id", ann_id++},
                                     {"image_id", image_id},
                                     {"category_id", shape[k] + 1},
                                     {"bbox", {b.x0, b.y0, b.x1 - b.x0, b.y1 - b.y0}},
                                     {"area", (b.x1 - b.x0) * (b.y1 - b.y0)},
                                     {"iscrowd", 0}});
    }
    const char* sub = part == 0 ? "train" : "val";
    if (!cv::imwrite((dir / "images" / sub / file_name).string(), img)) {
      throw DataError("cannot write synthetic image " + std::string(file_name));
    }
    parts[part].images.push_back(
        {{"id", image_id}, {"file_name", file_name}, {"width", S}, {"height", S}});
    for (int c = 0; c < 5; ++c) {
      const int a = rng.uniform(0, n - 1);
      int b = rng.uniform(0, n - 2);
      if (b >= a) ++b;
      const std::string caption = std::string("a ") + kColors[color[a]].name + " " +
                                  names[shape[a]] + " " + relation(boxes[a], boxes[b]) + " a " +
                                  kColors[color[b]].name + " " + names[shape[b]];
      parts[part].captions.push_back({{"id", ann_id++}, {"image_id", image_id}, {"caption", caption}});
    }
  }

  for (int p = 0; p < 2; ++p) {
    const std::string sub = p == 0 ? "train" : "val";
    write_json(dir / "annotations" / ("instances_" + sub + ".json"),
               {{"images", parts[p].images}, {"annotations", parts[p].objects}, {"categories", categories}});
    write_json(dir / "annotations" / ("captions_" + sub + ".json"),
               {{"images", parts[p].images}, {"annotations", parts[p].captions}});
  }

  // GloVe-format vectors for every word the generator can emit.
  std::set<std::string> words{"a", "left", "right", "of", "above", "below"};
  for (const auto& s : names) words.insert(s);
  for (int c = 0; c < n_colors; ++c) words.insert(kColors[c].name);
  std::ofstream emb(dir / "embeddings" / "words50.txt");
  if (!emb) throw DataError("cannot write synthetic embeddings");
  for (const auto& w : words) {
    Rng wr(mix_seed(opts.seed, fnv1a(w)));
    emb << w;
    for (int d = 0; d < 50; ++d) {
      // Irwin-Hall approximation of a standard normal, scaled to unit norm on average.
      double s = 0.0;
      for (int k = 0; k < 12; ++k) s += static_cast<double>(wr.next() >> 11) * 0x1.0p-53;
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %.6f", (s - 6.0) / std::sqrt(50.0));
      emb << buf;
    }
    emb << '\n';
  }
  log::info("synthetic dataset: ", opts.n_images - n_val, " train + ", n_val, " val images under ",
            dir.string());
}

}  // namespace phrasegen
