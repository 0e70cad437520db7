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

#include "phrasegen/implicit_graph.hpp"

#include "phrasegen/common.hpp"

namespace nn = torch::nn;
using torch::indexing::Slice;

namespace phrasegen {

torch::Tensor enumerate_pairs(std::int64_t n) {
  if (n < 2) throw ShapeError("at least two objects are needed to form a phrase");
  auto pairs = torch::empty({n * (n - 1), 2}, torch::kInt64);
  auto a = pairs.accessor<std::int64_t, 2>();
  std::int64_t j = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < n; ++k) {
      if (k == i) continue;
      a[j][0] = i;
      a[j][1] = k;
      ++j;
    }
  }
  return pairs;
}

torch::Tensor phrase_word_attention(const torch::Tensor& q, const torch::Tensor& word_glove,
                                    const torch::Tensor& mask) {
  if (q.size(1) != word_glove.size(1)) throw ShapeError("query and word vectors differ in width");
  if (mask.size(0) != word_glove.size(0)) throw ShapeError("mask length differs from word count");
  if (!mask.any().item<bool>()) throw DataError("caption has no valid word to attend to");
  auto scores = q.matmul(word_glove.t());
  scores = scores.masked_fill(mask.logical_not().unsqueeze(0),
                              -std::numeric_limits<double>::infinity());
  return torch::softmax(scores, /*dim=*/1);
}

ImplicitRelationEstimatorImpl::ImplicitRelationEstimatorImpl(const ModelConfig& cfg) {
  query_fc1 = register_module("query_fc1",
                              nn::Linear(2 * cfg.word_dim + cfg.noise_dim, cfg.ire_hidden));
  query_fc2 = register_module("query_fc2", nn::Linear(cfg.ire_hidden, cfg.word_dim));
  word_proj = register_module("word_proj", nn::Linear(cfg.word_feature_dim(), cfg.phrase_dim));
}

PhraseQuery ImplicitRelationEstimatorImpl::queries(const torch::Tensor& object_glove,
                                                   const torch::Tensor& z) {
  const auto n = object_glove.size(0);
  PhraseQuery pq;
  pq.pairs = enumerate_pairs(n);
  pq.z = z;
  auto subj = object_glove.index_select(0, pq.pairs.select(1, 0));
  auto obj = object_glove.index_select(0, pq.pairs.select(1, 1));
  auto noise = z.unsqueeze(0).expand({pq.pairs.size(0), z.size(0)});
  pq.q = query_fc2(torch::relu(query_fc1(torch::cat({subj, noise, obj}, 1))));
  return pq;
}

RelationAttention ImplicitRelationEstimatorImpl::attend(const torch::Tensor& q,
                                                        const torch::Tensor& word_glove,
                                                        const torch::Tensor& words,
                                                        const torch::Tensor& mask) {
  RelationAttention out;
  out.weights = phrase_word_attention(q, word_glove, mask);
  out.relations = out.weights.matmul(word_proj(words.t()));
  return out;
}

GraphConvLayerImpl::GraphConvLayerImpl(std::int64_t dim_, std::int64_t hidden) : dim(dim_) {
  fc1 = register_module("fc1", nn::Linear(3 * dim, hidden));
  fc2 = register_module("fc2", nn::Linear(hidden, 3 * dim));
}

torch::Tensor average_into_nodes(const torch::Tensor& subject_candidates,
                                 const torch::Tensor& object_candidates,
                                 const torch::Tensor& pairs, std::int64_t n) {
  const auto D = subject_candidates.size(1);
  auto s_idx = pairs.select(1, 0);
  auto o_idx = pairs.select(1, 1);
  auto sums = torch::zeros({n, D}, subject_candidates.options())
                  .index_add(0, s_idx, subject_candidates)
                  .index_add(0, o_idx, object_candidates);
  auto counts = torch::zeros({n}, subject_candidates.options())
                    .index_add(0, s_idx, torch::ones({pairs.size(0)}, subject_candidates.options()))
                    .index_add(0, o_idx, torch::ones({pairs.size(0)}, subject_candidates.options()));
  if ((counts == 0).any().item<bool>()) throw ShapeError("graph has an isolated node");
  return sums / counts.unsqueeze(1);
}

std::pair<torch::Tensor, torch::Tensor> GraphConvLayerImpl::forward(const torch::Tensor& nodes,
                                                                    const torch::Tensor& edges,
                                                                    const torch::Tensor& pairs) {
  auto triples = torch::cat({nodes.index_select(0, pairs.select(1, 0)), edges,
                             nodes.index_select(0, pairs.select(1, 1))},
                            1);
  auto h = torch::relu(fc2(torch::relu(fc1(triples))));
  auto parts = h.split(dim, 1);
  auto new_nodes = average_into_nodes(parts[0], parts[2], pairs, nodes.size(0));
  return {new_nodes, parts[1]};
}

ImplicitGraphEncoderImpl::ImplicitGraphEncoderImpl(std::int64_t num_categories,
                                                   const ModelConfig& cfg) {
  object_embedding = register_module("object_embedding", nn::Embedding(num_categories, cfg.phrase_dim));
  layers = register_module("layers", nn::ModuleList());
  for (int i = 0; i < cfg.gconv_layers; ++i) layers->push_back(GraphConvLayer(cfg.phrase_dim, cfg.gconv_hidden));
  phrase_head = register_module(
      "phrase_head", nn::Sequential(nn::Linear(cfg.head_width, cfg.head_hidden), nn::ReLU(),
                                    nn::Linear(cfg.head_hidden, cfg.head_width)));
  global_head = register_module(
      "global_head", nn::Sequential(nn::Linear(cfg.head_width, cfg.head_hidden), nn::ReLU(),
                                    nn::Linear(cfg.head_hidden, cfg.head_width)));
  phrase_proj = register_module("phrase_proj", nn::Linear(cfg.head_width, cfg.phrase_dim));
  global_proj = register_module("global_proj", nn::Linear(cfg.head_width, cfg.phrase_dim));
}

ImplicitGraph ImplicitGraphEncoderImpl::build(const torch::Tensor& labels,
                                              const torch::Tensor& relations,
                                              const torch::Tensor& pairs) {
  if (relations.size(0) != pairs.size(0)) throw ShapeError("one relation per phrase required");
  return ImplicitGraph{labels, object_embedding(labels), relations, pairs};
}

GraphFeatures ImplicitGraphEncoderImpl::forward(const ImplicitGraph& graph) {
  auto nodes = graph.objects;
  auto edges = graph.relations;
  for (const auto& layer : *layers) {
    std::tie(nodes, edges) = layer->as<GraphConvLayer>()->forward(nodes, edges, graph.pairs);
  }
  auto triples = torch::cat({nodes.index_select(0, graph.pairs.select(1, 0)), edges,
                             nodes.index_select(0, graph.pairs.select(1, 1))},
                            1);
  GraphFeatures f;
  f.objects = nodes;
  f.relations = edges;
  f.phrases = phrase_proj(phrase_head->forward(triples));
  f.global = global_proj(global_head->forward(triples).mean(0));
  return f;
}

SceneEncoderImpl::SceneEncoderImpl(torch::Tensor word_glove_, torch::Tensor category_glove_,
                                   const ModelConfig& cfg) {
  text = register_module("text", TextEncoder(word_glove_.size(0), cfg));
  ire = register_module("ire", ImplicitRelationEstimator(cfg));
  ige = register_module("ige", ImplicitGraphEncoder(category_glove_.size(0), cfg));
  word_glove = register_buffer("word_glove", word_glove_);
  category_glove = register_buffer("category_glove", category_glove_);
}

std::vector<SceneCondition> SceneEncoderImpl::forward(const torch::Tensor& caption_ids,
                                                      const torch::Tensor& lengths,
                                                      const std::vector<torch::Tensor>& labels,
                                                      const torch::Tensor& noise) {
  const auto B = caption_ids.size(0);
  if (static_cast<std::int64_t>(labels.size()) != B || noise.size(0) != B) {
    throw ShapeError("scene encoder needs one label set and one noise vector per caption");
  }
  auto wf = text(caption_ids, lengths);
  std::vector<SceneCondition> out;
  out.reserve(B);
  for (std::int64_t b = 0; b < B; ++b) {
    SceneCondition c;
    c.labels = labels[b];
    c.z = noise[b];
    auto og = category_glove.index_select(0, labels[b]);
    auto pq = ire->queries(og, noise[b]);
    c.pairs = pq.pairs;
    auto eg = word_glove.index_select(0, caption_ids[b]);
    c.relation = ire->attend(pq.q, eg, wf.words[b], wf.mask[b]);
    const auto len = lengths[b].item<std::int64_t>();
    c.words = wf.words[b].index({Slice(), Slice(0, len)});
    c.sentence = wf.sentence[b];
    c.graph = ige(ige->build(labels[b], c.relation.relations, c.pairs));
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace phrasegen
