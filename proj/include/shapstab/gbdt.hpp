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

// Second-order gradient boosting of regression trees for the binary
// logistic objective, with exact greedy split search.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapstab/dataset.hpp"

namespace shapstab {

struct TrainConfig {
  int n_rounds = 100;
  double learning_rate = 0.3;
  int max_depth = 6;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_hessian = 1.0;
  double subsample = 1.0;
  double colsample = 1.0;
  double base_score = 0.5;

  // Throws ConfigError naming the first violated bound.
  void validate() const;

  nlohmann::json to_json() const;
  // Unknown keys are rejected; missing keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double cover = 0.0;   // sum of training hessians routed here
  double weight = 0.0;  // leaf value before learning-rate scaling
  double gain = 0.0;    // split gain, internal nodes only

  bool is_leaf() const { return left < 0; }
};

// Nodes are stored flat with the root at index 0. Rows with
// value < threshold go left.
struct Tree {
  std::vector<TreeNode> nodes;

  int leaf_index(std::span<const double> row) const;
  double leaf_weight(std::span<const double> row) const {
    return nodes[static_cast<std::size_t>(leaf_index(row))].weight;
  }
  int depth() const;
};

struct TreeEnsemble {
  std::vector<Tree> trees;
  double base_score = 0.5;
  double learning_rate = 0.3;
  std::vector<std::string> column_names;

  std::size_t n_cols() const { return column_names.size(); }
  double base_margin() const;

  // Checks child links, feature indices, finiteness and cover > 0.
  void validate() const;

  nlohmann::json to_json() const;
  static TreeEnsemble from_json(const nlohmann::json& j);
};

// Regularized gain of splitting a node into (left, right) sums:
// 0.5 * [GL^2/(HL+lambda) + GR^2/(HR+lambda) - (GL+GR)^2/(HL+HR+lambda)] - gamma.
double split_gain(double grad_left, double hess_left, double grad_right, double hess_right,
                  double lambda, double gamma);
// Optimal leaf value -G / (H + lambda).
double optimal_leaf_weight(double grad_sum, double hess_sum, double lambda);

double logit(double p);
double sigmoid(double margin);

TreeEnsemble train(const DesignMatrix& train_set, const TrainConfig& config, std::uint64_t seed);

double predict_margin(const TreeEnsemble& model, std::span<const double> row);
std::vector<double> predict_margins(const TreeEnsemble& model, const DesignMatrix& rows);
std::vector<double> predict_proba(const TreeEnsemble& model, const DesignMatrix& rows);

// Mean binary cross-entropy of the labels under the model.
double log_loss(const TreeEnsemble& model, const DesignMatrix& rows);

// Keeps the first n_trees trees; used to inspect training state per round.
TreeEnsemble truncate(const TreeEnsemble& model, std::size_t n_trees);

}  // namespace shapstab
