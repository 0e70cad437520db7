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


// Reference implementations used as test oracles. Plain loops over
// std::vector<double>; no tensor ops, so they share no code path with the
// library under test.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <torch/torch.h>

namespace phrasegen::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

inline Mat to_mat(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU, torch::kDouble).contiguous();
  const auto rows = c.size(0);
  const auto cols = c.dim() > 1 ? c.size(1) : 1;
  Mat m(rows, Vec(cols));
  const double* p = c.data_ptr<double>();
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) m[i][j] = p[i * cols + j];
  return m;
}

inline Vec to_vec(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU, torch::kDouble).contiguous().view({-1});
  return Vec(c.data_ptr<double>(), c.data_ptr<double>() + c.numel());
}

inline Mat transpose(const Mat& a) {
  Mat t(a[0].size(), Vec(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Softmax over the entries with mask true; masked entries get exactly 0.
inline Vec softmax(const Vec& x, const std::vector<bool>& mask = {}) {
  Vec out(x.size(), 0.0);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask.empty() || mask[i]) m = std::max(m, x[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    out[i] = std::exp(x[i] - m);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

inline double log_sum_exp(const Vec& x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

inline double cosine(const Vec& a, const Vec& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

// Region context: u is T x D, f is D x R. Normalize s = u^T f over queries
// per region, sharpen by gamma1, normalize over regions per query, mix the
// region columns.
inline Mat region_context(const Mat& u, const Mat& f, double gamma1) {
  const std::size_t T = u.size(), D = f.size(), R = f[0].size();
  Mat s(T, Vec(R));
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < R; ++j) {
      double v = 0.0;
      for (std::size_t d = 0; d < D; ++d) v += u[i][d] * f[d][j];
      s[i][j] = v;
    }
  for (std::size_t j = 0; j < R; ++j) {
    Vec col(T);
    for (std::size_t i = 0; i < T; ++i) col[i] = s[i][j];
    col = softmax(col);
    for (std::size_t i = 0; i < T; ++i) s[i][j] = col[i];
  }
  Mat c(T, Vec(D, 0.0));
  for (std::size_t i = 0; i < T; ++i) {
    Vec row(R);
    for (std::size_t j = 0; j < R; ++j) row[j] = gamma1 * s[i][j];
    const Vec alpha = softmax(row);
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t j = 0; j < R; ++j) c[i][d] += alpha[j] * f[d][j];
  }
  return c;
}

inline double matching_score(const Mat& u, const Mat& f, double gamma1, double gamma2) {
  const Mat c = region_context(u, f, gamma1);
  Vec r(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) r[i] = gamma2 * cosine(c[i], u[i]);
  return log_sum_exp(r) / gamma2;
}

// -sum_i log softmax_j(gamma3 S[i][j])[i], row direction and column direction.
inline std::pair<double, double> matched_pair_nll(const Mat& s, double gamma3) {
  const std::size_t M = s.size();
  double rows = 0.0, cols = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    Vec r(M), c(M);
    for (std::size_t j = 0; j < M; ++j) {
      r[j] = gamma3 * s[i][j];
      c[j] = gamma3 * s[j][i];
    }
    rows += log_sum_exp(r) - r[i];
    cols += log_sum_exp(c) - c[i];
  }
  return {rows, cols};
}

// Full DAMSM loss. queries[i]: T_i x D, regions[i]: D x R, globals M x D.
inline double damsm_loss(const std::vector<Mat>& queries, const std::vector<Mat>& regions, const Mat& gq,
                         const Mat& gk, double g1, double g2, double g3) {
  const std::size_t M = queries.size();
  Mat local(M, Vec(M)), global(M, Vec(M));
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) {
      local[i][j] = matching_score(queries[j], regions[i], g1, g2);
      global[i][j] = cosine(gk[i], gq[j]);
    }
  auto [a, b] = matched_pair_nll(local, g3);
  auto [c, d] = matched_pair_nll(global, g3);
  return a + b + c + d;
}

// Pixel-center coverage of a normalized box on an n-cell axis.
inline bool covers(double lo, double hi, std::int64_t cell, std::int64_t n) {
  const double c = (static_cast<double>(cell) + 0.5) / static_cast<double>(n);
  return c >= lo && c < hi;
}

// Per-pixel phrase layout. objects n x D, relations P x D, boxes n x 4,
// pairs P x 2. Returns D x H x W flattened as [d][y][x].
inline std::vector<Mat> phrase_layout(const Mat& objects, const Mat& relations, const Mat& boxes,
                                      const std::vector<std::array<std::int64_t, 2>>& pairs, std::int64_t H,
                                      std::int64_t W, bool use_max) {
  const std::size_t D = objects[0].size();
  std::vector<Mat> out(D, Mat(H, Vec(W, 0.0)));
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      bool any = false;
      Vec acc(D, use_max ? -std::numeric_limits<double>::infinity() : 0.0);
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto& bi = boxes[pairs[p][0]];
        const auto& bk = boxes[pairs[p][1]];
        const bool in_i = covers(bi[0], bi[2], x, W) && covers(bi[1], bi[3], y, H);
        const bool in_k = covers(bk[0], bk[2], x, W) && covers(bk[1], bk[3], y, H);
        const bool in_u = covers(std::min(bi[0], bk[0]), std::max(bi[2], bk[2]), x, W) &&
                          covers(std::min(bi[1], bk[1]), std::max(bi[3], bk[3]), y, H);
        if (!in_u) continue;
        any = true;
        for (std::size_t d = 0; d < D; ++d) {
          double v;
          if (in_i && in_k) {
            v = std::max(objects[pairs[p][0]][d], objects[pairs[p][1]][d]);
          } else if (in_i) {
            v = objects[pairs[p][0]][d];
          } else if (in_k) {
            v = objects[pairs[p][1]][d];
          } else {
            v = relations[p][d];
          }
          acc[d] = use_max ? std::max(acc[d], v) : acc[d] + v;
        }
      }
      if (!any) continue;
      for (std::size_t d = 0; d < D; ++d) out[d][y][x] = acc[d];
    }
  return out;
}

// exp(mean_x KL(p(y|x) || p(y))) for one split.
inline double inception_score(const Mat& p) {
  const std::size_t N = p.size(), C = p[0].size();
  Vec marginal(C, 0.0);
  for (const auto& row : p)
    for (std::size_t c = 0; c < C; ++c) marginal[c] += row[c] / static_cast<double>(N);
  double kl = 0.0;
  for (const auto& row : p)
    for (std::size_t c = 0; c < C; ++c)
      if (row[c] > 0.0) kl += row[c] * (std::log(row[c]) - std::log(marginal[c]));
  return std::exp(kl / static_cast<double>(N));
}

}  // namespace phrasegen::oracle
