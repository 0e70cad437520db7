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

#include "phrasegen/text_encoder.hpp"

#include "phrasegen/common.hpp"

namespace nn = torch::nn;
namespace rnn = torch::nn::utils::rnn;

namespace phrasegen {

torch::Tensor length_mask(const torch::Tensor& lengths, std::int64_t max_len) {
  auto pos = torch::arange(max_len, torch::kInt64).unsqueeze(0);
  return pos < lengths.to(torch::kInt64).unsqueeze(1);
}

TextEncoderImpl::TextEncoderImpl(std::int64_t vocab_size, const ModelConfig& cfg)
    : feature_dim(cfg.word_feature_dim()) {
  embedding = register_module(
      "embedding", nn::Embedding(nn::EmbeddingOptions(vocab_size, cfg.text_embed_dim).padding_idx(0)));
  dropout = register_module("dropout", nn::Dropout(cfg.text_dropout));
  lstm = register_module(
      "lstm", nn::LSTM(nn::LSTMOptions(cfg.text_embed_dim, cfg.text_hidden)
                           .num_layers(1)
                           .batch_first(true)
                           .bidirectional(true)));
}

WordFeatures TextEncoderImpl::forward(const torch::Tensor& token_ids, const torch::Tensor& lengths) {
  if (token_ids.dim() != 2) throw ShapeError("token ids must be B x T");
  const auto T = token_ids.size(1);
  auto lens = lengths.to(torch::kInt64).cpu();
  if (lens.numel() != token_ids.size(0)) throw ShapeError("one length per caption required");
  if ((lens < 1).any().item<bool>()) throw DataError("empty caption: generation needs at least one word");
  if ((lens > T).any().item<bool>()) throw ShapeError("caption length exceeds padded width");

  auto x = dropout(embedding(token_ids));
  auto packed = rnn::pack_padded_sequence(x, lens, /*batch_first=*/true, /*enforce_sorted=*/false);
  auto [out_packed, state] = lstm->forward_with_packed_input(packed);
  auto [out, out_lens] = rnn::pad_packed_sequence(out_packed, /*batch_first=*/true,
                                                  /*padding_value=*/0.0, /*total_length=*/T);
  auto h_n = std::get<0>(state);  // (2, B, H): forward then backward
  WordFeatures wf;
  wf.words = out.transpose(1, 2).contiguous();  // B x D x T
  wf.sentence = torch::cat({h_n[0], h_n[1]}, 1);
  wf.mask = length_mask(lens, T);
  return wf;
}

}  // namespace phrasegen
