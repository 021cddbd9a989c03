/*
 * Copyright 2026 The shapstab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "shapstab/error.hpp"
#include "shapstab/gbdt.hpp"
#include "synthetic.hpp"

namespace shapstab {
namespace {

DesignMatrix synthetic_matrix(std::size_t n, std::uint64_t seed = 9) {
  std::istringstream in(testing::synthetic_credit_csv(n, seed));
  return one_hot_encode(clean_education(parse_dataset(in)));
}

TrainConfig small_config() {
  TrainConfig c;
  c.n_rounds = 12;
  c.max_depth = 4;
  return c;
}

// Per-row gradient and hessian at the start of round t.
void round_stats(const TreeEnsemble& model, const DesignMatrix& data, std::size_t t,
                 std::vector<double>& g, std::vector<double>& h) {
  const auto prefix = truncate(model, t);
  g.resize(data.n_rows());
  h.resize(data.n_rows());
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    const double p = sigmoid(predict_margin(prefix, data.row(r)));
    g[r] = p - data.labels()[r];
    h[r] = p * (1 - p);
  }
}

// Rows of `data` routed through node `target` of `tree`.
std::vector<std::size_t> rows_at(const Tree& tree, const DesignMatrix& data, int target) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    int node = 0;
    while (true) {
      if (node == target) {
        out.push_back(r);
        break;
      }
      const auto& n = tree.nodes[static_cast<std::size_t>(node)];
      if (n.is_leaf()) break;
      node = data.at(r, static_cast<std::size_t>(n.feature)) < n.threshold ? n.left : n.right;
    }
  }
  return out;
}

TEST(Formulas, LeafWeightExample) {
  // Four rows labelled 1 at p = 0.5: G = -2, H = 1.
  EXPECT_DOUBLE_EQ(optimal_leaf_weight(-2.0, 1.0, 1.0), 1.0);

  const DesignMatrix m({"x"}, {0, 0, 0, 0, 1}, {1, 1, 1, 1, 0});
  TrainConfig c;
  c.n_rounds = 1;
  c.max_depth = 0;
  const auto model = train(m.select_rows(std::vector<std::size_t>{0, 1, 2, 3, 4}), c, 0);
  ASSERT_EQ(model.trees.size(), 1u);
  ASSERT_EQ(model.trees[0].nodes.size(), 1u);
  // G = 4 * -0.5 + 0.5 = -1.5, H = 1.25.
  EXPECT_DOUBLE_EQ(model.trees[0].nodes[0].weight, 1.5 / 2.25);
}

TEST(Formulas, GainExample) {
  EXPECT_NEAR(split_gain(-1, 0.5, 1, 0.5, 1, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(split_gain(-1, 0.5, 1, 0.5, 1, 0.1), 2.0 / 3.0 - 0.1, 1e-15);
}

TEST(Predict, Examples) {
  TreeEnsemble empty;
  empty.column_names = {"a", "b"};
  EXPECT_EQ(predict_margin(empty, std::vector<double>{1, 2}), 0.0);
  EXPECT_THROW(predict_margin(empty, std::vector<double>{1}), DimensionError);

  TreeEnsemble one;
  one.column_names = {"a"};
  one.learning_rate = 0.3;
  Tree t;
  t.nodes.resize(3);
  t.nodes[0].feature = 0;
  t.nodes[0].threshold = 0.5;
  t.nodes[0].left = 1;
  t.nodes[0].right = 2;
  t.nodes[0].cover = 2;
  t.nodes[1].cover = 1;
  t.nodes[1].weight = 1.0;
  t.nodes[2].cover = 1;
  t.nodes[2].weight = -1.0;
  one.trees.push_back(t);
  EXPECT_DOUBLE_EQ(predict_margin(one, std::vector<double>{0.0}), 0.3);
  EXPECT_DOUBLE_EQ(predict_margin(one, std::vector<double>{0.5}), -0.3);  // x == thr goes right
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_GT(sigmoid(30.0), sigmoid(29.0));
  const double p = sigmoid(-800.0);
  EXPECT_GE(p, 0.0);
  EXPECT_LT(p, 1.0);
}

TEST(Train, ErrorsOnBadInput) {
  EXPECT_THROW(train(DesignMatrix({"x"}, {1}, {1}), TrainConfig{}, 0), TrainingError);
  EXPECT_THROW(train(DesignMatrix({"x"}, {1, 2, 3}, {1, 1, 1}), TrainConfig{}, 0), TrainingError);
  EXPECT_THROW(train(DesignMatrix({"x"}, {1, std::nan(""), 3}, {1, 0, 1}), TrainConfig{}, 0),
               DataError);
  TrainConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(train(DesignMatrix({"x"}, {1, 2}, {1, 0}), bad, 0), ConfigError);
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  const auto round = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(round.to_json(), c.to_json());
  EXPECT_EQ(c.n_rounds, 100);
  EXPECT_EQ(c.learning_rate, 0.3);
  EXPECT_EQ(c.max_depth, 6);

  EXPECT_THROW(TrainConfig::from_json({{"n_round", 3}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json({{"subsample", 0.0}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json({{"base_score", 1.0}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json({{"lambda", -1.0}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json({{"max_depth", "six"}}), ConfigError);
}

TEST(Train, BitIdenticalRetrainAndSeedInvariance) {
  const auto m = synthetic_matrix(400);
  const auto a = train(m, small_config(), 5);
  const auto b = train(m, small_config(), 5);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  const auto c = train(m, small_config(), 12345);
  EXPECT_EQ(a.to_json().dump(), c.to_json().dump());

  auto sub = small_config();
  sub.subsample = 0.7;
  sub.colsample = 0.5;
  const auto s1 = train(m, sub, 1);
  const auto s1b = train(m, sub, 1);
  const auto s2 = train(m, sub, 2);
  EXPECT_EQ(s1.to_json().dump(), s1b.to_json().dump());
  EXPECT_NE(s1.to_json().dump(), s2.to_json().dump());
}

TEST(Train, LogLossNonIncreasing) {
  const auto m = synthetic_matrix(500);
  auto cfg = small_config();
  cfg.n_rounds = 30;
  const auto model = train(m, cfg, 0);
  ASSERT_EQ(model.trees.size(), 30u);
  double prev = log_loss(truncate(model, 0), m);
  for (std::size_t t = 1; t <= model.trees.size(); ++t) {
    const double cur = log_loss(truncate(model, t), m);
    EXPECT_LE(cur, prev + 1e-12) << "round " << t;
    prev = cur;
  }
}

TEST(Train, CoverGainAndLeafOptimality) {
  const auto m = synthetic_matrix(300);
  auto cfg = small_config();
  cfg.lambda = 1.5;
  cfg.gamma = 0.05;
  const auto model = train(m, cfg, 0);
  std::vector<double> g;
  std::vector<double> h;
  std::size_t checked_splits = 0;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    round_stats(model, m, t, g, h);
    const Tree& tree = model.trees[t];
    double total_h = 0;
    for (double v : h) total_h += v;
    EXPECT_NEAR(tree.nodes[0].cover, total_h, 1e-9);
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      const auto& node = tree.nodes[id];
      const auto rows = rows_at(tree, m, static_cast<int>(id));
      long double G = 0;
      long double H = 0;
      for (auto r : rows) {
        G += g[r];
        H += h[r];
      }
      EXPECT_NEAR(node.cover, static_cast<double>(H), 1e-9);
      if (node.is_leaf()) {
        // Second-order objective of this leaf is minimised at its weight.
        auto obj = [&](double w) {
          return static_cast<double>(G) * w + 0.5 * (static_cast<double>(H) + cfg.lambda) * w * w;
        };
        const double eps = 1e-4;
        EXPECT_GT(obj(node.weight + eps), obj(node.weight));
        EXPECT_GT(obj(node.weight - eps), obj(node.weight));
        EXPECT_NEAR(node.weight, optimal_leaf_weight(static_cast<double>(G), static_cast<double>(H), cfg.lambda), 1e-12);
        continue;
      }
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      EXPECT_NEAR(node.cover, l.cover + r.cover, 1e-9);
      long double GL = 0;
      long double HL = 0;
      for (auto row : rows) {
        if (m.at(row, static_cast<std::size_t>(node.feature)) < node.threshold) {
          GL += g[row];
          HL += h[row];
        }
      }
      // Objective reduction from scratch: parent leaf objective minus children.
      auto leaf_obj = [&](long double gs, long double hs) {
        return -0.5L * gs * gs / (hs + cfg.lambda);
      };
      const long double reduction =
          leaf_obj(G, H) - leaf_obj(GL, HL) - leaf_obj(G - GL, H - HL) - cfg.gamma;
      EXPECT_NEAR(node.gain, static_cast<double>(reduction), 1e-9);
      EXPECT_GT(node.gain, 0.0);
      EXPECT_GE(HL, cfg.min_child_hessian);
      EXPECT_GE(H - HL, cfg.min_child_hessian);
      ++checked_splits;
    }
  }
  EXPECT_GT(checked_splits, 20u);
}

TEST(Train, SplitsAtMidpointsAndPreorder) {
  const auto m = synthetic_matrix(300);
  const auto model = train(m, small_config(), 0);
  for (const auto& tree : model.trees) {
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      const auto& n = tree.nodes[id];
      if (n.is_leaf()) continue;
      EXPECT_EQ(n.left, static_cast<int>(id) + 1);
      EXPECT_GT(n.right, n.left);
      // Threshold sits strictly between two observed values.
      double below = -std::numeric_limits<double>::infinity();
      double above = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m.n_rows(); ++r) {
        const double v = m.at(r, static_cast<std::size_t>(n.feature));
        if (v < n.threshold) below = std::max(below, v); else above = std::min(above, v);
      }
      EXPECT_TRUE(std::isfinite(below));
      EXPECT_TRUE(std::isfinite(above));
    }
  }
  EXPECT_NO_THROW(model.validate());
}

TEST(Model, JsonRoundTripIsExact) {
  const auto m = synthetic_matrix(300);
  const auto model = train(m, small_config(), 0);
  const auto text = model.to_json().dump();
  const auto back = TreeEnsemble::from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back.to_json().dump(), text);
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    ASSERT_EQ(predict_margin(back, m.row(r)), predict_margin(model, m.row(r)));
  }
  EXPECT_EQ(back.column_names, m.column_names());
}

TEST(Model, ValidateRejectsBrokenTrees) {
  TreeEnsemble e;
  e.column_names = {"a"};
  Tree t;
  t.nodes.resize(1);
  t.nodes[0].cover = 0.0;
  e.trees.push_back(t);
  EXPECT_THROW(e.validate(), ModelIntegrityError);
  e.trees[0].nodes[0].cover = 1.0;
  EXPECT_NO_THROW(e.validate());
  e.trees[0].nodes.resize(3);
  e.trees[0].nodes[0].feature = 3;
  e.trees[0].nodes[0].left = 1;
  e.trees[0].nodes[0].right = 2;
  e.trees[0].nodes[1].cover = 0.5;
  e.trees[0].nodes[2].cover = 0.5;
  EXPECT_THROW(e.validate(), ModelIntegrityError);
  EXPECT_THROW(TreeEnsemble::from_json(nlohmann::json{{"trees", 3}}), ModelIntegrityError);
}

// Max rows classified correctly by any tree of depth <= d over binary features.
std::size_t best_tree_accuracy(const DesignMatrix& m, const std::vector<std::size_t>& rows, int d) {
  std::size_t pos = 0;
  for (auto r : rows) pos += static_cast<std::size_t>(m.labels()[r]);
  std::size_t best = std::max(pos, rows.size() - pos);
  if (d == 0 || best == rows.size()) return best;
  for (std::size_t f = 0; f < m.n_cols(); ++f) {
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto r : rows) (m.at(r, f) < 0.5 ? left : right).push_back(r);
    if (left.empty() || right.empty()) continue;
    best = std::max(best, best_tree_accuracy(m, left, d - 1) + best_tree_accuracy(m, right, d - 1));
  }
  return best;
}

TEST(Train, XorToyIsLearned) {
  Rng rng(2024);
  std::vector<double> values;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    const int a = static_cast<int>(uniform_below(rng, 2));
    const int b = static_cast<int>(uniform_below(rng, 2));
    const int noise = static_cast<int>(uniform_below(rng, 2));
    values.insert(values.end(), {double(a == 0), double(a == 1), double(b == 0), double(b == 1),
                                 double(noise)});
    labels.push_back(a ^ b);
  }
  const DesignMatrix m({"a_0", "a_1", "b_0", "b_1", "noise"}, values, labels);
  std::vector<std::size_t> all(200);
  for (std::size_t i = 0; i < 200; ++i) all[i] = i;
  ASSERT_EQ(best_tree_accuracy(m, all, 3), 200u);  // separable at depth 3

  TrainConfig cfg;
  cfg.n_rounds = 50;
  cfg.max_depth = 3;
  const auto model = train(m, cfg, 0);
  const auto probs = predict_proba(model, m);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 200; ++i) correct += (probs[i] >= 0.5) == (labels[i] == 1);
  EXPECT_GE(static_cast<double>(correct) / 200.0, 0.95);
}

}  // namespace
}  // namespace shapstab
