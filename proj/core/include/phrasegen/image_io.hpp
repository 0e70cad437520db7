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

#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace phrasegen {

// Image tensors are float 3xHxW (or Nx3xHxW) RGB in [-1, 1].

std::optional<torch::Tensor> read_image_rgb(const std::string& path);
void write_image(const std::string& path, const torch::Tensor& image);

/// Bilinear (antialiased when shrinking) resize of a 3xHxW or Nx3xHxW tensor.
torch::Tensor resize_image(const torch::Tensor& image, int height, int width);

cv::Mat to_mat(const torch::Tensor& image);       // 8-bit BGR
torch::Tensor from_mat(const cv::Mat& bgr);        // 8-bit BGR -> [-1, 1] RGB

/// Pastes tiles (8-bit BGR) into rows of a grid. Tiles in a row are
/// vertically centered; a 4 pixel gutter separates cells.
cv::Mat tile_rows(const std::vector<std::vector<cv::Mat>>& rows, int cell_size);

/// A cell holding wrapped text lines.
cv::Mat text_tile(const std::vector<std::string>& lines, int size);

}  // namespace phrasegen
