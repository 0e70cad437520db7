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

#include "phrasegen/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "phrasegen/common.hpp"

namespace F = torch::nn::functional;

namespace phrasegen {

cv::Mat to_mat(const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) throw ShapeError("to_mat expects a 3xHxW tensor");
  auto u8 = ((image.detach().to(torch::kFloat).clamp(-1, 1) + 1.0) * 127.5)
                .round()
                .to(torch::kUInt8)
                .flip({0})  // RGB -> BGR
                .permute({1, 2, 0})
                .contiguous();
  cv::Mat m(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC3);
  std::memcpy(m.data, u8.data_ptr<std::uint8_t>(), u8.numel());
  return m;
}

torch::Tensor from_mat(const cv::Mat& bgr) {
  if (bgr.type() != CV_8UC3) throw ShapeError("from_mat expects an 8-bit 3-channel image");
  cv::Mat cont = bgr.isContinuous() ? bgr : bgr.clone();
  auto t = torch::from_blob(cont.data, {cont.rows, cont.cols, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).flip({0}).to(torch::kFloat).div(127.5).sub(1.0).contiguous();
}

std::optional<torch::Tensor> read_image_rgb(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) return std::nullopt;
  return from_mat(m);
}

void write_image(const std::string& path, const torch::Tensor& image) {
  if (!cv::imwrite(path, to_mat(image))) throw Error("io", "cannot write image '" + path + "'");
}

torch::Tensor resize_image(const torch::Tensor& image, int height, int width) {
  const bool batched = image.dim() == 4;
  auto x = batched ? image : image.unsqueeze(0);
  if (x.size(2) == height && x.size(3) == width) return image;
  const bool shrink = x.size(2) > height || x.size(3) > width;
  auto y = F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{height, width})
                                 .mode(torch::kBilinear)
                                 .align_corners(false)
                                 .antialias(shrink));
  return batched ? y : y.squeeze(0);
}

cv::Mat tile_rows(const std::vector<std::vector<cv::Mat>>& rows, int cell_size) {
  constexpr int kGutter = 4;
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const int w = static_cast<int>(cols) * (cell_size + kGutter) + kGutter;
  const int h = static_cast<int>(rows.size()) * (cell_size + kGutter) + kGutter;
  cv::Mat grid(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      cv::Mat tile;
      cv::resize(rows[r][c], tile, cv::Size(cell_size, cell_size), 0, 0, cv::INTER_NEAREST);
      const int x = kGutter + static_cast<int>(c) * (cell_size + kGutter);
      const int y = kGutter + static_cast<int>(r) * (cell_size + kGutter);
      tile.copyTo(grid(cv::Rect(x, y, cell_size, cell_size)));
    }
  }
  return grid;
}

cv::Mat text_tile(const std::vector<std::string>& lines, int size) {
  cv::Mat tile(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
  const double scale = std::max(0.25, size / 512.0);
  const int max_chars = std::max(8, static_cast<int>(size / (18.0 * scale)));
  int y = static_cast<int>(14 * scale * 2);
  for (const auto& line : lines) {
    for (std::size_t pos = 0; pos < line.size(); pos += max_chars) {
      cv::putText(tile, line.substr(pos, max_chars), cv::Point(4, y), cv::FONT_HERSHEY_SIMPLEX,
                  scale, cv::Scalar(0, 0, 0), 1, cv::LINE_8);
      y += static_cast<int>(28 * scale) + 2;
      if (y > size) return tile;
    }
  }
  return tile;
}

}  // namespace phrasegen
