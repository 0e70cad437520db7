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

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <torch/torch.h>

namespace phrasegen::oracle {

inline Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kDouble).contiguous();
  Eigen::MatrixXd out(c.size(0), c.size(1));
  auto a = c.accessor<double, 2>();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = a[i][j];
  return out;
}

// Frechet distance with tr((S_a S_b)^(1/2)) taken from the eigenvalues of the
// non-symmetric product, which are real and non-negative for SPD inputs.
inline double frechet_distance(const torch::Tensor& mean_a, const torch::Tensor& cov_a,
                               const torch::Tensor& mean_b, const torch::Tensor& cov_b) {
  const Eigen::MatrixXd sa = to_eigen(cov_a), sb = to_eigen(cov_b);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(sa * sb);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
    tr_sqrt += std::sqrt(std::max(0.0, solver.eigenvalues()[i].real()));
  const double diff = (mean_a - mean_b).to(torch::kDouble).pow(2).sum().item<double>();
  return diff + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
}

}  // namespace phrasegen::oracle
