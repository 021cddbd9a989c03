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

#include "shapstab/treeshap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <set>

#include "shapstab/error.hpp"
#include "shapstab/io_util.hpp"

namespace shapstab {

double ShapRow::total() const {
  return base_value + std::accumulate(phi.begin(), phi.end(), 0.0);
}

ShapMatrix::ShapMatrix(std::size_t n_rows, std::size_t n_cols, double base_value,
                       std::vector<std::string> feature_names)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      base_value_(base_value),
      feature_names_(std::move(feature_names)),
      phi_(n_rows * n_cols, 0.0) {
  if (feature_names_.size() != n_cols_) {
    throw DimensionError("ShapMatrix: feature name count does not match column count");
  }
}

void ShapMatrix::write_csv(std::ostream& out) const {
  for (const auto& name : feature_names_) out << name << ',';
  out << "base_value\n";
  const std::string base = format_double(base_value_);
  for (std::size_t i = 0; i < n_rows_; ++i) {
    for (double v : row(i)) out << format_double(v) << ',';
    out << base << '\n';
  }
}

void GlobalImportance::write_csv(std::ostream& out) const {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  out << "feature,score\n";
  for (std::size_t i : order) out << feature_names[i] << ',' << format_double(scores[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Polynomial-time recursion over root-to-leaf paths. Each path element holds
// the fraction of background mass (zero_fraction) and of the explained row
// (one_fraction) flowing through the splits on its feature, plus the
// permutation weight of the subsets of the path that element is part of.

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction,
                 int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / static_cast<double>(depth + 1);
    path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void unwind_path(PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * (depth + 1) / ((i + 1) * one_fraction);
      next_one_portion = tmp - path[i].pweight * zero_fraction * (depth - i) / static_cast<double>(depth + 1);
    } else {
      path[i].pweight = path[i].pweight * (depth + 1) / (zero_fraction * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total permutation weight of the path with element `index` removed,
// computed without modifying the path.
double unwound_path_sum(const PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * (depth + 1) / ((i + 1) * one_fraction);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero_fraction * (depth - i) / static_cast<double>(depth + 1);
    } else if (zero_fraction != 0.0) {
      total += path[i].pweight * (depth + 1) / (zero_fraction * (depth - i));
    }
  }
  return total;
}

struct TreeShapRecursion {
  const Tree& tree;
  std::span<const double> row;
  double* phi;
  double scale;

  void recurse(int node_index, PathElement* parent_path, int unique_depth, double zero_fraction,
               double one_fraction, int feature) const {
    PathElement* path = parent_path + unique_depth + 1;
    std::copy(parent_path, parent_path + unique_depth + 1, path);
    extend_path(path, unique_depth, zero_fraction, one_fraction, feature);

    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
    if (node.is_leaf()) {
      for (int i = 1; i <= unique_depth; ++i) {
        const double w = unwound_path_sum(path, unique_depth, i);
        const PathElement& el = path[i];
        phi[el.feature] += w * (el.one_fraction - el.zero_fraction) * node.weight * scale;
      }
      return;
    }

    const bool go_left = row[static_cast<std::size_t>(node.feature)] < node.threshold;
    const int hot = go_left ? node.left : node.right;
    const int cold = go_left ? node.right : node.left;
    const double cover = node.cover;
    const double hot_zero_fraction = tree.nodes[static_cast<std::size_t>(hot)].cover / cover;
    const double cold_zero_fraction = tree.nodes[static_cast<std::size_t>(cold)].cover / cover;
    double incoming_zero_fraction = 1.0;
    double incoming_one_fraction = 1.0;

    // A feature already on the path is folded into one element.
    int path_index = 0;
    for (; path_index <= unique_depth; ++path_index) {
      if (path[path_index].feature == node.feature) break;
    }
    if (path_index != unique_depth + 1) {
      incoming_zero_fraction = path[path_index].zero_fraction;
      incoming_one_fraction = path[path_index].one_fraction;
      unwind_path(path, unique_depth, path_index);
      unique_depth -= 1;
    }

    recurse(hot, path, unique_depth + 1, hot_zero_fraction * incoming_zero_fraction,
            incoming_one_fraction, node.feature);
    recurse(cold, path, unique_depth + 1, cold_zero_fraction * incoming_zero_fraction, 0.0,
            node.feature);
  }
};

double mean_value(const Tree& tree, int node_index) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(node_index)];
  if (n.is_leaf()) return n.weight;
  const double cl = tree.nodes[static_cast<std::size_t>(n.left)].cover;
  const double cr = tree.nodes[static_cast<std::size_t>(n.right)].cover;
  return (cl * mean_value(tree, n.left) + cr * mean_value(tree, n.right)) / n.cover;
}

void check_row(const TreeEnsemble& model, std::span<const double> row) {
  if (row.size() != model.n_cols()) {
    throw DimensionError("shap: row has " + std::to_string(row.size()) +
                         " values, model expects " + std::to_string(model.n_cols()));
  }
}

}  // namespace

TreeShapExplainer::TreeShapExplainer(const TreeEnsemble& model) : model_(model) {
  model.validate();
  double expected = 0.0;
  int max_depth = 0;
  for (const auto& t : model.trees) {
    expected += mean_value(t, 0);
    max_depth = std::max(max_depth, t.depth());
  }
  base_value_ = model.base_margin() + model.learning_rate * expected;
  const auto d = static_cast<std::size_t>(max_depth);
  path_capacity_ = (d + 2) * (d + 3) / 2;
}

void TreeShapExplainer::accumulate(std::span<const double> row, std::span<double> phi) const {
  check_row(model_, row);
  if (phi.size() != model_.n_cols()) throw DimensionError("shap: output size mismatch");
  std::vector<PathElement> buffer(path_capacity_);
  for (const auto& tree : model_.trees) {
    if (tree.nodes[0].is_leaf()) continue;
    TreeShapRecursion rec{tree, row, phi.data(), model_.learning_rate};
    rec.recurse(0, buffer.data(), 0, 1.0, 1.0, -1);
  }
}

ShapRow TreeShapExplainer::explain(std::span<const double> row) const {
  ShapRow out;
  out.phi.assign(model_.n_cols(), 0.0);
  out.base_value = base_value_;
  accumulate(row, out.phi);
  return out;
}

ShapRow shap_values(const TreeEnsemble& model, std::span<const double> row) {
  check_row(model, row);
  return TreeShapExplainer(model).explain(row);
}

ShapMatrix shap_matrix(const TreeEnsemble& model, const DesignMatrix& rows, std::string model_id,
                       std::string evaluation_set) {
  if (rows.n_cols() != model.n_cols()) {
    throw DimensionError("shap_matrix: matrix has " + std::to_string(rows.n_cols()) +
                         " columns, model expects " + std::to_string(model.n_cols()));
  }
  TreeShapExplainer explainer(model);
  ShapMatrix out(rows.n_rows(), rows.n_cols(), explainer.base_value(), model.column_names);
  out.model_id = std::move(model_id);
  out.evaluation_set = std::move(evaluation_set);
  for (std::size_t i = 0; i < rows.n_rows(); ++i) explainer.accumulate(rows.row(i), out.mutable_row(i));
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

namespace {

double tree_conditional(const Tree& tree, int node_index, std::span<const double> row,
                        const std::vector<bool>& known) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(node_index)];
  if (n.is_leaf()) return n.weight;
  if (known[static_cast<std::size_t>(n.feature)]) {
    return tree_conditional(tree, row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right,
                            row, known);
  }
  const double cl = tree.nodes[static_cast<std::size_t>(n.left)].cover;
  const double cr = tree.nodes[static_cast<std::size_t>(n.right)].cover;
  return (cl * tree_conditional(tree, n.left, row, known) +
          cr * tree_conditional(tree, n.right, row, known)) /
         n.cover;
}

}  // namespace

double conditional_expectation(const TreeEnsemble& model, std::span<const double> row,
                               const std::vector<bool>& known) {
  check_row(model, row);
  double sum = 0.0;
  for (const auto& t : model.trees) sum += tree_conditional(t, 0, row, known);
  return model.base_margin() + model.learning_rate * sum;
}

ShapRow brute_force_shap(const TreeEnsemble& model, std::span<const double> row,
                         std::size_t max_features) {
  check_row(model, row);
  model.validate();
  std::set<int> used_set;
  for (const auto& t : model.trees) {
    for (const auto& n : t.nodes) {
      if (!n.is_leaf()) used_set.insert(n.feature);
    }
  }
  const std::vector<int> used(used_set.begin(), used_set.end());
  const std::size_t k = used.size();
  if (k > max_features) {
    throw OracleLimitError("brute_force_shap: model uses " + std::to_string(k) +
                           " distinct features, cap is " + std::to_string(max_features));
  }

  // v(S) for every subset of the used features, indexed by bitmask.
  const std::size_t n_subsets = std::size_t{1} << k;
  std::vector<double> value(n_subsets);
  std::vector<bool> known(model.n_cols(), false);
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    for (std::size_t b = 0; b < k; ++b) known[static_cast<std::size_t>(used[b])] = (mask >> b) & 1U;
    value[mask] = conditional_expectation(model, row, known);
  }

  // |S|! (k - |S| - 1)! / k!
  std::vector<double> factorial(k + 1, 1.0);
  for (std::size_t i = 1; i <= k; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> weight(k == 0 ? 0 : k);
  for (std::size_t s = 0; s + 1 <= k; ++s) weight[s] = factorial[s] * factorial[k - s - 1] / factorial[k];

  ShapRow out;
  out.phi.assign(model.n_cols(), 0.0);
  out.base_value = value[0];
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t bit = std::size_t{1} << b;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      if (mask & bit) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcountll(mask));
      phi += weight[size] * (value[mask | bit] - value[mask]);
    }
    out.phi[static_cast<std::size_t>(used[b])] = phi;
  }
  return out;
}

GlobalImportance global_importance(const ShapMatrix& shap) {
  if (shap.n_rows() == 0) throw DimensionError("global_importance: no evaluation rows");
  GlobalImportance out;
  out.feature_names = shap.feature_names();
  out.scores.assign(shap.n_cols(), 0.0);
  // Summing sorted magnitudes makes the score independent of row order.
  std::vector<double> column(shap.n_rows());
  for (std::size_t j = 0; j < shap.n_cols(); ++j) {
    for (std::size_t i = 0; i < shap.n_rows(); ++i) column[i] = std::abs(shap.row(i)[j]);
    std::sort(column.begin(), column.end());
    long double total = 0;
    for (double v : column) total += v;
    out.scores[j] = static_cast<double>(total);
  }
  return out;
}

}  // namespace shapstab
