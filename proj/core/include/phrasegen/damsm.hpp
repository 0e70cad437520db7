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

namespace phrasegen {

/// Region-context vectors: one attention-weighted mix of region features per
/// query. u: T x D, regions: D x R (or M x D x R, giving M x T x D).
/// Similarities are first normalized over queries, then sharpened by
/// gamma1 and normalized over regions.
torch::Tensor region_context(const torch::Tensor& u, const torch::Tensor& regions, double gamma1);

/// Row-wise cosine similarity along the last axis. Zero-norm rows score 0.
torch::Tensor cosine_rows(const torch::Tensor& a, const torch::Tensor& b);

/// Soft maximum of the per-query relevances: (1/gamma2) log sum exp.
torch::Tensor aggregate_relevance(const torch::Tensor& relevance, double gamma2);

/// R(X, Y) for one query set against one image. Scalar.
torch::Tensor matching_score(const torch::Tensor& u, const torch::Tensor& regions, const GammaConfig& gamma);

/// Positional image-text pairs. Item i's queries match item i's regions.
struct MatchingBatch {
  std::vector<torch::Tensor> queries;  // M items of T_i x D
  torch::Tensor regions;               // M x D x R
  torch::Tensor global_queries;        // M x D
  torch::Tensor global_keys;           // M x D

  std::int64_t size() const { return static_cast<std::int64_t>(queries.size()); }
};

/// S[i][j] = R(image i, query set j). M x M.
torch::Tensor local_score_matrix(const MatchingBatch& batch, const GammaConfig& gamma);
/// G[i][j] = cos(global key i, global query j). M x M.
torch::Tensor global_score_matrix(const MatchingBatch& batch);

struct DamsmTerms {
  torch::Tensor local_text_given_image;   // -sum_i log P(Y_i | X_i)
  torch::Tensor local_image_given_text;   // -sum_i log P(X_i | Y_i)
  torch::Tensor global_text_given_image;
  torch::Tensor global_image_given_text;

  torch::Tensor total() const {
    return local_text_given_image + local_image_given_text + global_text_given_image + global_image_given_text;
  }
};

/// Negative log posteriors of the matching pairs, summed over the batch.
/// Throws NumericError on a non-finite term.
DamsmTerms damsm_terms(const MatchingBatch& batch, const GammaConfig& gamma);
torch::Tensor damsm_loss(const MatchingBatch& batch, const GammaConfig& gamma);

/// Cross-entropy of the diagonal of a score matrix in both directions.
std::pair<torch::Tensor, torch::Tensor> matched_pair_nll(const torch::Tensor& scores, double gamma3);

}  // namespace phrasegen
