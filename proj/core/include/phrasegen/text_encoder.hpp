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

#include <torch/torch.h>

#include "phrasegen/config.hpp"

namespace phrasegen {

/// Output of the caption encoder for a batch.
struct WordFeatures {
  torch::Tensor words;     // B x D_w x T; padded columns are exactly zero
  torch::Tensor sentence;  // B x D_w, concatenated final hidden states
  torch::Tensor mask;      // B x T bool, true on valid words
};

/// Bi-directional LSTM over learned token embeddings. Per-word features are
/// the concatenated forward/backward hidden states.
struct TextEncoderImpl : torch::nn::Module {
  TextEncoderImpl(std::int64_t vocab_size, const ModelConfig& cfg);

  /// token_ids: B x T int64 (padded with Vocabulary::kPad), lengths: B.
  WordFeatures forward(const torch::Tensor& token_ids, const torch::Tensor& lengths);

  torch::nn::Embedding embedding{nullptr};
  torch::nn::Dropout dropout{nullptr};
  torch::nn::LSTM lstm{nullptr};
  std::int64_t feature_dim;
};
TORCH_MODULE(TextEncoder);

/// Validity mask from lengths: B x T bool.
torch::Tensor length_mask(const torch::Tensor& lengths, std::int64_t max_len);

}  // namespace phrasegen
