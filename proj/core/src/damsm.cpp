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


#include "phrasegen/damsm.hpp"

#include "phrasegen/common.hpp"

namespace phrasegen {

namespace {

void check_finite(const torch::Tensor& t, const char* what, const MatchingBatch& batch) {
  if (!torch::isfinite(t).all().item<bool>()) {
    std::ostringstream os;
    os << "non-finite " << what << " in matching loss (batch of " << batch.size() << ", query sizes";
    for (const auto& q : batch.queries) os << ' ' << q.size(0);
    os << ", region norm " << batch.regions.norm().item<double>() << ")";
    throw NumericError(os.str());
  }
}

}  // namespace

torch::Tensor region_context(const torch::Tensor& u, const torch::Tensor& regions, double gamma1) {
  if (u.numel() == 0 || regions.numel() == 0) throw ShapeError("region context needs non-empty inputs");
  const bool batched = regions.dim() == 3;
  const auto& f = batched ? regions : regions.unsqueeze(0);
  if (u.size(1) != f.size(1)) throw ShapeError("query and region widths differ");
  auto s = torch::matmul(u, f);                   // M x T x R
  auto s_bar = torch::softmax(s, /*dim=*/1);      // over queries, per region
  auto alpha = torch::softmax(gamma1 * s_bar, 2);  // over regions, per query
  auto c = torch::matmul(alpha, f.transpose(1, 2));  // M x T x D
  return batched ? c : c.squeeze(0);
}

torch::Tensor cosine_rows(const torch::Tensor& a, const torch::Tensor& b) {
  auto dot = (a * b).sum(-1);
  auto norms = a.norm(2, -1) * b.norm(2, -1);
  if ((norms == 0).any().item<bool>()) log::debug("cosine similarity with a zero-norm vector scored as 0");
  return dot / norms.clamp_min(1e-12);
}

torch::Tensor aggregate_relevance(const torch::Tensor& relevance, double gamma2) {
  return torch::logsumexp(gamma2 * relevance, -1) / gamma2;
}

torch::Tensor matching_score(const torch::Tensor& u, const torch::Tensor& regions, const GammaConfig& gamma) {
  if (u.size(0) < 1) throw ShapeError("matching score needs at least one query");
  auto c = region_context(u, regions, gamma.gamma1);
  return aggregate_relevance(cosine_rows(c, u), gamma.gamma2);
}

torch::Tensor local_score_matrix(const MatchingBatch& batch, const GammaConfig& gamma) {
  const auto M = batch.size();
  if (batch.regions.size(0) != M) throw ShapeError("one region set per query set required");
  std::vector<torch::Tensor> columns;
  columns.reserve(M);
  for (std::int64_t j = 0; j < M; ++j) {
    const auto& u = batch.queries[j];
    auto c = region_context(u, batch.regions, gamma.gamma1);  // M x T x D
    columns.push_back(aggregate_relevance(cosine_rows(c, u.unsqueeze(0)), gamma.gamma2));
  }
  return torch::stack(columns, 1);
}

torch::Tensor global_score_matrix(const MatchingBatch& batch) {
  auto k = batch.global_keys.unsqueeze(1);     // M x 1 x D
  auto q = batch.global_queries.unsqueeze(0);  // 1 x M x D
  return cosine_rows(k, q);
}

std::pair<torch::Tensor, torch::Tensor> matched_pair_nll(const torch::Tensor& scores, double gamma3) {
  auto logits = gamma3 * scores;
  auto text_given_image = -torch::log_softmax(logits, 1).diagonal().sum();
  auto image_given_text = -torch::log_softmax(logits, 0).diagonal().sum();
  return {text_given_image, image_given_text};
}

DamsmTerms damsm_terms(const MatchingBatch& batch, const GammaConfig& gamma) {
  if (batch.size() < 1) throw ShapeError("matching loss needs at least one pair");
  auto local = local_score_matrix(batch, gamma);
  check_finite(local, "local scores", batch);
  auto global = global_score_matrix(batch);
  check_finite(global, "global scores", batch);
  DamsmTerms t;
  std::tie(t.local_text_given_image, t.local_image_given_text) = matched_pair_nll(local, gamma.gamma3);
  std::tie(t.global_text_given_image, t.global_image_given_text) = matched_pair_nll(global, gamma.gamma3);
  check_finite(t.total(), "loss", batch);
  return t;
}

torch::Tensor damsm_loss(const MatchingBatch& batch, const GammaConfig& gamma) {
  return damsm_terms(batch, gamma).total();
}

}  // namespace phrasegen
