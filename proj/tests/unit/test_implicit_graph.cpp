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


#include "doctest_torch.hpp"

#include "oracles.hpp"
#include "phrasegen/common.hpp"
#include "phrasegen/config.hpp"
#include "phrasegen/implicit_graph.hpp"

using namespace phrasegen;
namespace ora = phrasegen::oracle;

namespace {

ModelConfig model() { return Config::full_scale().model; }

}  // namespace

TEST_SUITE("implicit_graph") {
  TEST_CASE("ordered pair enumeration") {
    CHECK(torch::equal(enumerate_pairs(2), torch::tensor({{0, 1}, {1, 0}}, torch::kInt64)));
    CHECK(enumerate_pairs(3).size(0) == 6);
    CHECK(enumerate_pairs(8).size(0) == 56);
    CHECK_THROWS_AS(enumerate_pairs(1), ShapeError);
  }

  TEST_CASE("phrase queries: shapes and pair symmetry") {
    torch::manual_seed(1);
    ImplicitRelationEstimator ire(model());
    auto glove = torch::randn({3, 50});
    glove[2] = glove[0];
    auto pq = ire->queries(glove, torch::randn({model().noise_dim}));
    CHECK(pq.q.sizes() == torch::IntArrayRef{6, 50});
    // pairs (0,2) and (2,0) are rows 1 and 4
    CHECK(pq.pairs[1][0].item<int>() == 0);
    CHECK(pq.pairs[1][1].item<int>() == 2);
    CHECK(pq.pairs[4][0].item<int>() == 2);
    CHECK(pq.pairs[4][1].item<int>() == 0);
    CHECK(torch::equal(pq.q[1], pq.q[4]));
    CHECK_THROWS_AS(ire->queries(torch::randn({1, 50}), torch::randn({model().noise_dim})), ShapeError);
  }

  TEST_CASE("word attention matches a brute-force softmax") {
    auto q = torch::tensor({{0.3, -1.2, 0.5}, {2.0, 0.1, -0.7}}, torch::kDouble);
    auto eg = torch::tensor({{1.0, 0.0, 0.5}, {-0.3, 0.8, 0.2}, {0.9, 0.9, -1.0}, {0.0, 0.0, 0.0}},
                            torch::kDouble);
    auto mask = torch::tensor({true, true, true, false});
    auto beta = phrase_word_attention(q, eg, mask);
    const auto qm = ora::to_mat(q), em = ora::to_mat(eg);
    for (int j = 0; j < 2; ++j) {
      ora::Vec s(4);
      for (int i = 0; i < 4; ++i) s[i] = ora::dot(qm[j], em[i]);
      const auto ref = ora::softmax(s, {true, true, true, false});
      for (int i = 0; i < 4; ++i) CHECK(beta[j][i].item<double>() == doctest::Approx(ref[i]).epsilon(1e-9));
      CHECK(beta[j][3].item<double>() == 0.0);
      CHECK(beta[j].sum().item<double>() == doctest::Approx(1.0).epsilon(1e-12));
    }
    // shift invariance: an extra all-ones word column turns the last query
    // entry into a constant added to every score of its row
    auto eg1 = torch::cat({eg, torch::ones({4, 1}, torch::kDouble)}, 1);
    auto b1 = phrase_word_attention(torch::cat({q, torch::zeros({2, 1}, torch::kDouble)}, 1), eg1, mask);
    auto b2 = phrase_word_attention(torch::cat({q, torch::full({2, 1}, 5.0, torch::kDouble)}, 1), eg1, mask);
    CHECK(torch::allclose(b1, b2, 1e-9, 1e-12));
  }

  TEST_CASE("attention edge cases") {
    auto q = torch::zeros({1, 4});
    auto eg = torch::randn({3, 4});
    auto uniform = phrase_word_attention(q, eg, torch::tensor({true, true, true}));
    CHECK(torch::allclose(uniform, torch::full({1, 3}, 1.0 / 3.0)));
    auto single = phrase_word_attention(torch::randn({2, 4}), eg, torch::tensor({true, false, false}));
    CHECK(torch::equal(single.select(1, 0), torch::ones({2})));
    CHECK_THROWS_AS(phrase_word_attention(q, eg, torch::tensor({false, false, false})), DataError);
  }

  TEST_CASE("one valid word gives its projected feature") {
    torch::manual_seed(2);
    ImplicitRelationEstimator ire(model());
    auto words = torch::randn({256, 3});
    auto out = ire->attend(torch::randn({2, 50}), torch::randn({3, 50}), words, torch::tensor({true, false, false}));
    auto expected = ire->word_proj(words.select(1, 0).unsqueeze(0)).squeeze(0);
    CHECK(torch::allclose(out.relations[0], expected, 1e-5, 1e-6));
    CHECK(torch::allclose(out.relations[1], expected, 1e-5, 1e-6));
  }

  TEST_CASE("relation gradient matches central differences") {
    torch::manual_seed(4);
    ImplicitRelationEstimator ire(model());
    ire->to(torch::kDouble);
    auto eg = torch::randn({3, 50}, torch::kDouble);
    auto words = torch::randn({256, 3}, torch::kDouble);
    auto mask = torch::tensor({true, true, true});
    auto weights = torch::randn({2, 128}, torch::kDouble);
    auto f = [&](const torch::Tensor& q) { return (ire->attend(q, eg, words, mask).relations * weights).sum(); };
    auto q = (0.3 * torch::randn({2, 50}, torch::kDouble)).requires_grad_(true);
    f(q).backward();
    auto grad = q.grad().clone();
    const double h = 1e-6;
    double worst = 0.0;
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 50; ++k) {
        auto qp = q.detach().clone();
        auto qm = q.detach().clone();
        qp[j][k] += h;
        qm[j][k] -= h;
        const double fd = (f(qp).item<double>() - f(qm).item<double>()) / (2 * h);
        const double g = grad[j][k].item<double>();
        worst = std::max(worst, std::abs(fd - g) / std::max(1e-8, std::max(std::abs(fd), std::abs(g))));
      }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("graph conv on a hand-set two-node graph") {
    GraphConvLayer layer(2, 2);
    torch::NoGradGuard ng;
    layer->fc1->weight.copy_(torch::tensor({{1.0, 0.0, 0.5, 0.0, -1.0, 0.0}, {0.0, 1.0, 0.0, 0.5, 0.0, 1.0}}));
    layer->fc1->bias.copy_(torch::tensor({0.1, -0.2}));
    layer->fc2->weight.copy_(
        torch::tensor({{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {0.5, -0.5}, {-1.0, 2.0}, {2.0, 0.0}}));
    layer->fc2->bias.copy_(torch::tensor({0.0, 0.1, 0.0, 0.2, 0.0, -0.3}));
    auto nodes = torch::tensor({{1.0, 2.0}, {-1.0, 0.5}});
    auto edges = torch::tensor({{0.5, 0.5}, {2.0, -1.0}});
    auto pairs = enumerate_pairs(2);
    auto [new_nodes, new_edges] = layer(nodes, edges, pairs);

    const ora::Mat W1 = ora::to_mat(layer->fc1->weight), W2 = ora::to_mat(layer->fc2->weight);
    const ora::Vec b1 = ora::to_vec(layer->fc1->bias), b2 = ora::to_vec(layer->fc2->bias);
    const auto N = ora::to_mat(nodes), E = ora::to_mat(edges);
    auto mlp = [&](const ora::Vec& x) {
      ora::Vec h(2), o(6);
      for (int r = 0; r < 2; ++r) h[r] = std::max(0.0, ora::dot(W1[r], x) + b1[r]);
      for (int r = 0; r < 6; ++r) o[r] = std::max(0.0, ora::dot(W2[r], h) + b2[r]);
      return o;
    };
    // edge 0: (0 -> 1), edge 1: (1 -> 0)
    const auto c0 = mlp({N[0][0], N[0][1], E[0][0], E[0][1], N[1][0], N[1][1]});
    const auto c1 = mlp({N[1][0], N[1][1], E[1][0], E[1][1], N[0][0], N[0][1]});
    for (int d = 0; d < 2; ++d) {
      CHECK(new_nodes[0][d].item<double>() == doctest::Approx((c0[d] + c1[4 + d]) / 2).epsilon(1e-5));
      CHECK(new_nodes[1][d].item<double>() == doctest::Approx((c1[d] + c0[4 + d]) / 2).epsilon(1e-5));
      CHECK(new_edges[0][d].item<double>() == doctest::Approx(c0[2 + d]).epsilon(1e-5));
      CHECK(new_edges[1][d].item<double>() == doctest::Approx(c1[2 + d]).epsilon(1e-5));
    }
  }

  TEST_CASE("node update is the mean of its incident candidates") {
    // n = 3: node 0 appears in 4 edges (2 as subject, 2 as object)
    auto pairs = enumerate_pairs(3);
    auto subj = torch::randn({6, 5});
    auto obj = torch::randn({6, 5});
    auto nodes = average_into_nodes(subj, obj, pairs, 3);
    auto expected = (subj[0] + subj[1] + obj[2] + obj[4]) / 4;
    CHECK(torch::allclose(nodes[0], expected, 1e-6, 1e-6));
    CHECK_THROWS_AS(average_into_nodes(subj.narrow(0, 0, 1), obj.narrow(0, 0, 1), pairs.narrow(0, 0, 1), 3),
                    ShapeError);
  }

  TEST_CASE("graph encoder shapes and permutation invariance") {
    torch::manual_seed(5);
    ImplicitGraphEncoder ige(6, model());
    ige->eval();
    auto labels = torch::tensor({0, 4, 2}, torch::kInt64);
    auto pairs = enumerate_pairs(3);
    auto rel = torch::randn({6, 128});
    auto f = ige(ige->build(labels, rel, pairs));
    CHECK(f.objects.sizes() == torch::IntArrayRef{3, 128});
    CHECK(f.relations.sizes() == torch::IntArrayRef{6, 128});
    CHECK(f.phrases.sizes() == torch::IntArrayRef{6, 128});
    CHECK(f.global.sizes() == torch::IntArrayRef{128});

    auto perm = torch::tensor({3, 0, 5, 1, 4, 2}, torch::kInt64);
    auto g = ige(ige->build(labels, rel.index_select(0, perm), pairs.index_select(0, perm)));
    CHECK(torch::allclose(g.global, f.global, 1e-6, 1e-6));
    CHECK(torch::allclose(g.objects, f.objects, 1e-6, 1e-6));
    CHECK(torch::allclose(g.phrases, f.phrases.index_select(0, perm), 1e-6, 1e-6));

    auto dup = ige(ige->build(labels, torch::cat({rel, rel}), torch::cat({pairs, pairs})));
    CHECK(torch::allclose(dup.global, f.global, 1e-6, 1e-6));
  }

  TEST_CASE("scene encoder produces one condition per caption") {
    torch::manual_seed(6);
    auto cfg = model();
    SceneEncoder scene(torch::randn({30, 50}), torch::randn({5, 50}), cfg);
    scene->eval();
    auto ids = torch::randint(2, 30, {2, 20}, torch::kInt64);
    auto lens = torch::tensor({9, 20}, torch::kInt64);
    auto conds = scene(ids, lens, std::vector<torch::Tensor>{torch::tensor({0, 1, 2}), torch::tensor({3, 4})},
                       torch::randn({2, cfg.noise_dim}));
    REQUIRE(conds.size() == 2);
    CHECK(conds[0].relation.relations.sizes() == torch::IntArrayRef{6, 128});
    CHECK(conds[0].relation.weights.sizes() == torch::IntArrayRef{6, 20});
    CHECK(conds[0].relation.weights.narrow(1, 9, 11).abs().max().item<float>() == 0.0f);
    CHECK(conds[0].words.sizes() == torch::IntArrayRef{256, 9});
    CHECK(conds[1].graph.phrases.sizes() == torch::IntArrayRef{2, 128});
  }
}
