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

// Path-dependent tree Shapley values in margin (log-odds) space. Node covers
// recorded at training time act as the background distribution.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "shapstab/dataset.hpp"
#include "shapstab/gbdt.hpp"

namespace shapstab {

struct ShapRow {
  std::vector<double> phi;
  double base_value = 0.0;

  double total() const;  // base_value + sum(phi)
};

class ShapMatrix {
 public:
  ShapMatrix() = default;
  ShapMatrix(std::size_t n_rows, std::size_t n_cols, double base_value,
             std::vector<std::string> feature_names);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  double base_value() const { return base_value_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  std::span<const double> row(std::size_t i) const { return {phi_.data() + i * n_cols_, n_cols_}; }
  std::span<double> mutable_row(std::size_t i) { return {phi_.data() + i * n_cols_, n_cols_}; }

  std::string model_id;
  std::string evaluation_set;

  // One line per row: feature columns then base_value.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  double base_value_ = 0.0;
  std::vector<std::string> feature_names_;
  std::vector<double> phi_;
};

struct GlobalImportance {
  std::vector<double> scores;
  std::vector<std::string> feature_names;

  // (feature, score) sorted by descending score, index order on ties.
  void write_csv(std::ostream& out) const;
};

// Precomputes per-tree expectations so many rows can be explained against
// one model. Immutable after construction; safe to share between threads.
class TreeShapExplainer {
 public:
  // Throws ModelIntegrityError when any node has non-positive cover.
  explicit TreeShapExplainer(const TreeEnsemble& model);

  double base_value() const { return base_value_; }
  ShapRow explain(std::span<const double> row) const;
  // Adds learning-rate-scaled contributions for `row` into `phi`.
  void accumulate(std::span<const double> row, std::span<double> phi) const;

 private:
  const TreeEnsemble& model_;
  double base_value_ = 0.0;
  std::size_t path_capacity_ = 0;
};

ShapRow shap_values(const TreeEnsemble& model, std::span<const double> row);

ShapMatrix shap_matrix(const TreeEnsemble& model, const DesignMatrix& rows,
                       std::string model_id = {}, std::string evaluation_set = {});

inline constexpr std::size_t kBruteForceFeatureCap = 15;

// Exhaustive Shapley sum over subsets of the features the model uses.
// Throws OracleLimitError beyond `max_features` distinct features.
ShapRow brute_force_shap(const TreeEnsemble& model, std::span<const double> row,
                         std::size_t max_features = kBruteForceFeatureCap);

// Cover-weighted expectation of the ensemble margin when only `known`
// features take their values from `row`.
double conditional_expectation(const TreeEnsemble& model, std::span<const double> row,
                               const std::vector<bool>& known);

GlobalImportance global_importance(const ShapMatrix& shap);

}  // namespace shapstab
