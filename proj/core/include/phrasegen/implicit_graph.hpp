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

#include <vector>

#include <torch/torch.h>

#include "phrasegen/config.hpp"
#include "phrasegen/text_encoder.hpp"

namespace phrasegen {

/// All ordered pairs (i, k) with i != k, subject-major: (0,1), (0,2), ...,
/// (1,0), (1,2), ... Returns int64 [n(n-1), 2]. Throws for n < 2.
torch::Tensor enumerate_pairs(std::int64_t n);

struct PhraseQuery {
  torch::Tensor q;      // T_p x word_dim
  torch::Tensor z;      // noise_dim, shared by every phrase of the image
  torch::Tensor pairs;  // T_p x 2
};

/// Masked softmax of phrase-word scores s = q e_g^T over the word axis.
/// Padded words get weight exactly zero. q: T_p x d, word_glove: T_w x d,
/// mask: T_w bool. Returns T_p x T_w.
torch::Tensor phrase_word_attention(const torch::Tensor& q, const torch::Tensor& word_glove,
                                    const torch::Tensor& mask);

struct RelationAttention {
  torch::Tensor relations;  // T_p x phrase_dim (v^ir)
  torch::Tensor weights;    // T_p x T_w
};

/// Infers one relation vector per ordered object pair by letting a
/// noise-conditioned pair query attend over the caption words.
struct ImplicitRelationEstimatorImpl : torch::nn::Module {
  explicit ImplicitRelationEstimatorImpl(const ModelConfig& cfg);

  /// object_glove: n x word_dim, z: noise_dim.
  PhraseQuery queries(const torch::Tensor& object_glove, const torch::Tensor& z);

  /// words: D_w x T_w encoder features; word_glove: T_w x word_dim.
  RelationAttention attend(const torch::Tensor& q, const torch::Tensor& word_glove,
                           const torch::Tensor& words, const torch::Tensor& mask);

  torch::nn::Linear query_fc1{nullptr}, query_fc2{nullptr};
  torch::nn::Linear word_proj{nullptr};
};
TORCH_MODULE(ImplicitRelationEstimator);

struct ImplicitGraph {
  torch::Tensor labels;     // n, int64
  torch::Tensor objects;    // n x D_p (learned label embeddings)
  torch::Tensor relations;  // T_p x D_p (v^ir)
  torch::Tensor pairs;      // T_p x 2 (subject, object)

  std::int64_t num_objects() const { return labels.size(0); }
  std::int64_t num_phrases() const { return pairs.size(0); }
};

struct GraphFeatures {
  torch::Tensor objects;    // v^o: n x D_p
  torch::Tensor relations;  // v^r: T_p x D_p
  torch::Tensor phrases;    // u:   T_p x D_p
  torch::Tensor global;     // u-bar: D_p
};

/// One message-passing step over (subject, predicate, object) triples. An
/// MLP maps each concatenated triple to candidate vectors; nodes average
/// their candidates over every incident edge, edges take theirs directly.
struct GraphConvLayerImpl : torch::nn::Module {
  GraphConvLayerImpl(std::int64_t dim, std::int64_t hidden);

  /// nodes: n x D, edges: T_p x D. Returns (new nodes, new edges).
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& nodes,
                                                  const torch::Tensor& edges,
                                                  const torch::Tensor& pairs);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
  std::int64_t dim;
};
TORCH_MODULE(GraphConvLayer);

/// Mean of per-edge candidates onto nodes. Throws if a node has no edge.
torch::Tensor average_into_nodes(const torch::Tensor& subject_candidates,
                                 const torch::Tensor& object_candidates,
                                 const torch::Tensor& pairs, std::int64_t n);

struct ImplicitGraphEncoderImpl : torch::nn::Module {
  ImplicitGraphEncoderImpl(std::int64_t num_categories, const ModelConfig& cfg);

  ImplicitGraph build(const torch::Tensor& labels, const torch::Tensor& relations,
                      const torch::Tensor& pairs);
  GraphFeatures forward(const ImplicitGraph& graph);

  torch::nn::Embedding object_embedding{nullptr};
  torch::nn::ModuleList layers{nullptr};
  torch::nn::Sequential phrase_head{nullptr};
  torch::nn::Sequential global_head{nullptr};
  torch::nn::Linear phrase_proj{nullptr}, global_proj{nullptr};
};
TORCH_MODULE(ImplicitGraphEncoder);

/// Everything the generator consumes about one example.
struct SceneCondition {
  torch::Tensor labels;      // n
  torch::Tensor pairs;       // T_p x 2
  torch::Tensor z;           // noise_dim
  torch::Tensor words;       // D_w x T_w (valid columns only)
  torch::Tensor sentence;    // D_w
  RelationAttention relation;
  GraphFeatures graph;
};

/// Text encoder + relation estimator + graph encoder, with the GloVe tables
/// for words and object labels held as buffers.
struct SceneEncoderImpl : torch::nn::Module {
  SceneEncoderImpl(torch::Tensor word_glove, torch::Tensor category_glove, const ModelConfig& cfg);

  /// caption_ids: B x T, lengths: B, labels: per-example n, noise: B x noise_dim.
  std::vector<SceneCondition> forward(const torch::Tensor& caption_ids, const torch::Tensor& lengths,
                                      const std::vector<torch::Tensor>& labels,
                                      const torch::Tensor& noise);

  TextEncoder text{nullptr};
  ImplicitRelationEstimator ire{nullptr};
  ImplicitGraphEncoder ige{nullptr};
  torch::Tensor word_glove;      // |V| x word_dim
  torch::Tensor category_glove;  // C x word_dim
};
TORCH_MODULE(SceneEncoder);

}  // namespace phrasegen
