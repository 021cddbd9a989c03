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

#include "shapstab/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shapstab/error.hpp"
#include "shapstab/random.hpp"

namespace shapstab {

using Accum = long double;

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("TrainConfig: " + what); };
  if (n_rounds < 0) fail("n_rounds must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (max_depth < 0) fail("max_depth must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be >= 0");
  if (!(min_child_hessian >= 0.0) || !std::isfinite(min_child_hessian)) {
    fail("min_child_hessian must be >= 0");
  }
  if (!(subsample > 0.0 && subsample <= 1.0)) fail("subsample must lie in (0, 1]");
  if (!(colsample > 0.0 && colsample <= 1.0)) fail("colsample must lie in (0, 1]");
  if (!(base_score > 0.0 && base_score < 1.0)) fail("base_score must lie in (0, 1)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"n_rounds", n_rounds},
          {"learning_rate", learning_rate},
          {"max_depth", max_depth},
          {"lambda", lambda},
          {"gamma", gamma},
          {"min_child_hessian", min_child_hessian},
          {"subsample", subsample},
          {"colsample", colsample},
          {"base_score", base_score}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("TrainConfig: expected a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n_rounds") c.n_rounds = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "max_depth") c.max_depth = value.get<int>();
      else if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "min_child_hessian") c.min_child_hessian = value.get<double>();
      else if (key == "subsample") c.subsample = value.get<double>();
      else if (key == "colsample") c.colsample = value.get<double>();
      else if (key == "base_score") c.base_score = value.get<double>();
      else throw ConfigError("TrainConfig: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("TrainConfig: bad value for '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Tree and ensemble

int Tree::leaf_index(std::span<const double> row) const {
  int idx = 0;
  while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
    idx = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return idx;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double split_gain(double grad_left, double hess_left, double grad_right, double hess_right,
                  double lambda, double gamma) {
  const Accum gl = grad_left;
  const Accum hl = hess_left;
  const Accum gr = grad_right;
  const Accum hr = hess_right;
  const Accum score = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                      (gl + gr) * (gl + gr) / (hl + hr + lambda);
  return static_cast<double>(Accum(0.5) * score - gamma);
}

double optimal_leaf_weight(double grad_sum, double hess_sum, double lambda) {
  return -grad_sum / (hess_sum + lambda);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double sigmoid(double margin) {
  if (margin >= 0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

double TreeEnsemble::base_margin() const { return logit(base_score); }

void TreeEnsemble::validate() const {
  if (!(base_score > 0.0 && base_score < 1.0)) {
    throw ModelIntegrityError("base_score must lie in (0, 1)");
  }
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& nodes = trees[t].nodes;
    const std::string where = "tree " + std::to_string(t);
    if (nodes.empty()) throw ModelIntegrityError(where + " has no nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const TreeNode& n = nodes[i];
      const std::string at = where + " node " + std::to_string(i);
      if (!(n.cover > 0.0) || !std::isfinite(n.cover)) {
        throw ModelIntegrityError(at + " has non-positive cover");
      }
      if (!std::isfinite(n.weight)) throw ModelIntegrityError(at + " has non-finite weight");
      if (n.is_leaf()) {
        if (n.right >= 0) throw ModelIntegrityError(at + " has a single child");
        continue;
      }
      if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_cols()) {
        throw ModelIntegrityError(at + " splits on out-of-range feature " +
                                  std::to_string(n.feature));
      }
      if (!std::isfinite(n.threshold)) throw ModelIntegrityError(at + " has non-finite threshold");
      // Preorder layout: children always follow their parent.
      if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) ||
          static_cast<std::size_t>(n.left) >= nodes.size() ||
          static_cast<std::size_t>(n.right) >= nodes.size()) {
        throw ModelIntegrityError(at + " has invalid child links");
      }
    }
  }
}

namespace {

nlohmann::json node_to_json(const Tree& tree, int idx) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(idx)];
  nlohmann::json j = {{"cover", n.cover}, {"weight", n.weight}};
  if (!n.is_leaf()) {
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["gain"] = n.gain;
    j["left"] = node_to_json(tree, n.left);
    j["right"] = node_to_json(tree, n.right);
  }
  return j;
}

int node_from_json(const nlohmann::json& j, Tree& tree, int depth) {
  if (depth > 64) throw ModelIntegrityError("tree deeper than 64 levels");
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode n;
  n.cover = j.at("cover").get<double>();
  n.weight = j.at("weight").get<double>();
  if (j.contains("left") || j.contains("right")) {
    n.feature = j.at("feature").get<int>();
    n.threshold = j.at("threshold").get<double>();
    n.gain = j.value("gain", 0.0);
    n.left = node_from_json(j.at("left"), tree, depth + 1);
    n.right = node_from_json(j.at("right"), tree, depth + 1);
  }
  tree.nodes[static_cast<std::size_t>(idx)] = n;
  return idx;
}

// Renumbers nodes into preorder so the flat layout is canonical.
Tree to_preorder(const std::vector<TreeNode>& nodes) {
  Tree out;
  out.nodes.reserve(nodes.size());
  auto visit = [&](auto&& self, int src) -> int {
    const int dst = static_cast<int>(out.nodes.size());
    out.nodes.push_back(nodes[static_cast<std::size_t>(src)]);
    if (!nodes[static_cast<std::size_t>(src)].is_leaf()) {
      const int l = self(self, nodes[static_cast<std::size_t>(src)].left);
      const int r = self(self, nodes[static_cast<std::size_t>(src)].right);
      out.nodes[static_cast<std::size_t>(dst)].left = l;
      out.nodes[static_cast<std::size_t>(dst)].right = r;
    }
    return dst;
  };
  visit(visit, 0);
  return out;
}

}  // namespace

nlohmann::json TreeEnsemble::to_json() const {
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& t : trees) jt.push_back(node_to_json(t, 0));
  return {{"base_score", base_score},
          {"learning_rate", learning_rate},
          {"column_names", column_names},
          {"trees", jt}};
}

TreeEnsemble TreeEnsemble::from_json(const nlohmann::json& j) {
  TreeEnsemble m;
  try {
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.column_names = j.at("column_names").get<std::vector<std::string>>();
    for (const auto& jt : j.at("trees")) {
      Tree t;
      node_from_json(jt, t, 0);
      m.trees.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ModelIntegrityError(std::string("malformed model JSON: ") + e.what());
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Prediction

double predict_margin(const TreeEnsemble& model, std::span<const double> row) {
  if (row.size() != model.n_cols()) {
    throw DimensionError("predict_margin: row has " + std::to_string(row.size()) +
                         " values, model expects " + std::to_string(model.n_cols()));
  }
  double sum = 0.0;
  for (const auto& t : model.trees) sum += t.leaf_weight(row);
  return model.base_margin() + model.learning_rate * sum;
}

std::vector<double> predict_margins(const TreeEnsemble& model, const DesignMatrix& rows) {
  std::vector<double> out(rows.n_rows());
  for (std::size_t i = 0; i < rows.n_rows(); ++i) out[i] = predict_margin(model, rows.row(i));
  return out;
}

std::vector<double> predict_proba(const TreeEnsemble& model, const DesignMatrix& rows) {
  auto out = predict_margins(model, rows);
  for (double& m : out) m = sigmoid(m);
  return out;
}

double log_loss(const TreeEnsemble& model, const DesignMatrix& rows) {
  const auto margins = predict_margins(model, rows);
  Accum total = 0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    // log(1 + e^m) - y m, written to avoid overflow.
    const double m = margins[i];
    const double softplus = m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    total += softplus - (rows.labels()[i] ? m : 0.0);
  }
  return margins.empty() ? 0.0 : static_cast<double>(total / static_cast<Accum>(margins.size()));
}

TreeEnsemble truncate(const TreeEnsemble& model, std::size_t n_trees) {
  TreeEnsemble out = model;
  out.trees.resize(std::min(n_trees, model.trees.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct SortedColumn {
  std::vector<double> values;
  std::vector<std::uint32_t> rows;
  // Two-valued columns are scanned through their minority rows only.
  bool binary = false;
  double low = 0.0;
  double high = 0.0;
  bool minority_is_low = false;
  std::vector<std::uint32_t> minority_rows;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  Accum grad_left = 0;
  Accum hess_left = 0;
  std::size_t count_left = 0;
};

struct ActiveNode {
  int node = -1;
  Accum grad = 0;
  Accum hess = 0;
  std::size_t count = 0;
  SplitCandidate best;
  // scan state, reset per feature
  Accum scan_grad = 0;
  Accum scan_hess = 0;
  std::size_t scan_count = 0;
  double last_value = 0.0;
  bool has_last = false;
};

Accum leaf_score(Accum g, Accum h, double lambda) { return g * g / (h + lambda); }

class TreeGrower {
 public:
  TreeGrower(const DesignMatrix& data, const std::vector<SortedColumn>& columns,
             const TrainConfig& config)
      : data_(data), columns_(columns), config_(config), position_(data.n_rows(), -1) {}

  // Grows one tree on rows flagged in `in_sample`, writes leaf ids for those
  // rows into `leaf_of`.
  std::vector<TreeNode> grow(const std::vector<double>& grad, const std::vector<double>& hess,
                             const std::vector<char>& in_sample,
                             const std::vector<int>& features, std::vector<int>& leaf_of) {
    std::vector<TreeNode> nodes(1);
    Accum g = 0;
    Accum h = 0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < data_.n_rows(); ++r) {
      if (in_sample[r]) {
        position_[r] = 0;
        ++count;
        g += grad[r];
        h += hess[r];
      } else {
        position_[r] = -1;
      }
    }
    std::vector<ActiveNode> active(1);
    active[0].node = 0;
    active[0].grad = g;
    active[0].hess = h;
    active[0].count = count;
    set_node_stats(nodes[0], g, h);

    std::vector<int> slot_of_node;
    for (int depth = 0; !active.empty(); ++depth) {
      if (depth < config_.max_depth) {
        slot_of_node.assign(nodes.size(), -1);
        for (std::size_t s = 0; s < active.size(); ++s) slot_of_node[static_cast<std::size_t>(active[s].node)] = static_cast<int>(s);
        for (int f : features) scan_feature(f, grad, hess, active, slot_of_node);
      }

      std::vector<ActiveNode> next;
      // node id -> (left id, right id) for this level's splits
      std::vector<int> split_slot(nodes.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) {
        ActiveNode& a = active[s];
        if (depth < config_.max_depth && a.best.feature >= 0 && a.best.gain > 0.0) {
          TreeNode& parent = nodes[static_cast<std::size_t>(a.node)];
          parent.feature = a.best.feature;
          parent.threshold = a.best.threshold;
          parent.gain = a.best.gain;
          const int left = static_cast<int>(nodes.size());
          const int right = left + 1;
          parent.left = left;
          parent.right = right;
          nodes.emplace_back();
          nodes.emplace_back();
          const Accum gl = a.best.grad_left;
          const Accum hl = a.best.hess_left;
          set_node_stats(nodes[static_cast<std::size_t>(left)], gl, hl);
          set_node_stats(nodes[static_cast<std::size_t>(right)], a.grad - gl, a.hess - hl);
          ActiveNode ln;
          ln.node = left;
          ln.grad = gl;
          ln.hess = hl;
          ln.count = a.best.count_left;
          ActiveNode rn;
          rn.node = right;
          rn.grad = a.grad - gl;
          rn.hess = a.hess - hl;
          rn.count = a.count - a.best.count_left;
          next.push_back(ln);
          next.push_back(rn);
          split_slot[static_cast<std::size_t>(a.node)] = 1;
        }
      }
      for (std::size_t r = 0; r < data_.n_rows(); ++r) {
        const int p = position_[r];
        if (p < 0) continue;
        if (split_slot[static_cast<std::size_t>(p)] < 0) {
          leaf_of[r] = p;
          position_[r] = -1;
          continue;
        }
        const TreeNode& n = nodes[static_cast<std::size_t>(p)];
        position_[r] = data_.at(r, static_cast<std::size_t>(n.feature)) < n.threshold ? n.left : n.right;
      }
      active = std::move(next);
    }
    return nodes;
  }

 private:
  void set_node_stats(TreeNode& n, Accum g, Accum h) const {
    n.cover = static_cast<double>(h);
    n.weight = static_cast<double>(-g / (h + config_.lambda));
  }

  double midpoint(double lo, double hi) const {
    const double thr = 0.5 * (lo + hi);
    return thr > lo ? thr : hi;
  }

  void consider(ActiveNode& a, int f, double thr, Accum gl, Accum hl, std::size_t nl) const {
    const Accum gr = a.grad - gl;
    const Accum hr = a.hess - hl;
    const double min_child = config_.min_child_hessian;
    if (!(hl > 0 && hr > 0 && hl >= min_child && hr >= min_child)) return;
    const double lambda = config_.lambda;
    const Accum gain = Accum(0.5) * (leaf_score(gl, hl, lambda) + leaf_score(gr, hr, lambda) -
                                     leaf_score(a.grad, a.hess, lambda)) -
                       config_.gamma;
    if (static_cast<double>(gain) > a.best.gain) {
      a.best = SplitCandidate{static_cast<double>(gain), f, thr, gl, hl, nl};
    }
  }

  void scan_feature(int f, const std::vector<double>& grad, const std::vector<double>& hess,
                    std::vector<ActiveNode>& active, const std::vector<int>& slot_of_node) const {
    for (auto& a : active) {
      a.scan_grad = 0;
      a.scan_hess = 0;
      a.scan_count = 0;
      a.has_last = false;
    }
    const SortedColumn& col = columns_[static_cast<std::size_t>(f)];
    if (col.binary) {
      for (const std::uint32_t r : col.minority_rows) {
        const int p = position_[r];
        if (p < 0) continue;
        const int s = slot_of_node[static_cast<std::size_t>(p)];
        if (s < 0) continue;
        ActiveNode& a = active[static_cast<std::size_t>(s)];
        a.scan_grad += grad[r];
        a.scan_hess += hess[r];
        ++a.scan_count;
      }
      const double thr = midpoint(col.low, col.high);
      for (auto& a : active) {
        if (a.scan_count == 0 || a.scan_count == a.count) continue;
        if (col.minority_is_low) {
          consider(a, f, thr, a.scan_grad, a.scan_hess, a.scan_count);
        } else {
          consider(a, f, thr, a.grad - a.scan_grad, a.hess - a.scan_hess, a.count - a.scan_count);
        }
      }
      return;
    }
    for (std::size_t k = 0; k < col.rows.size(); ++k) {
      const std::uint32_t r = col.rows[k];
      const int p = position_[r];
      if (p < 0) continue;
      const int s = slot_of_node[static_cast<std::size_t>(p)];
      if (s < 0) continue;
      ActiveNode& a = active[static_cast<std::size_t>(s)];
      const double v = col.values[k];
      if (a.has_last && v != a.last_value) {
        consider(a, f, midpoint(a.last_value, v), a.scan_grad, a.scan_hess, a.scan_count);
      }
      a.scan_grad += grad[r];
      a.scan_hess += hess[r];
      ++a.scan_count;
      a.last_value = v;
      a.has_last = true;
    }
  }

  const DesignMatrix& data_;
  const std::vector<SortedColumn>& columns_;
  const TrainConfig& config_;
  std::vector<int> position_;
};

void mark_binary(SortedColumn& col) {
  const auto& v = col.values;
  if (v.empty() || v.front() == v.back()) return;
  const auto split = std::upper_bound(v.begin(), v.end(), v.front());
  if (*split != v.back()) return;
  col.binary = true;
  col.low = v.front();
  col.high = v.back();
  const auto n_low = static_cast<std::size_t>(split - v.begin());
  col.minority_is_low = 2 * n_low <= v.size();
  if (col.minority_is_low) {
    col.minority_rows.assign(col.rows.begin(), col.rows.begin() + static_cast<std::ptrdiff_t>(n_low));
  } else {
    col.minority_rows.assign(col.rows.begin() + static_cast<std::ptrdiff_t>(n_low), col.rows.end());
  }
  // Ascending row order keeps accumulation order independent of sorting.
  std::sort(col.minority_rows.begin(), col.minority_rows.end());
}

}  // namespace

TreeEnsemble train(const DesignMatrix& train_set, const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = train_set.n_rows();
  const std::size_t d = train_set.n_cols();
  if (n < 2) throw TrainingError("train: need at least 2 rows");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw TrainingError("train: too many rows");
  std::size_t positives = 0;
  for (int y : train_set.labels()) positives += y ? 1 : 0;
  if (positives == 0 || positives == n) throw TrainingError("train: labels contain a single class");
  for (std::size_t i = 0; i < train_set.values().size(); ++i) {
    if (!std::isfinite(train_set.values()[i])) {
      throw DataError("train: non-finite value at row " + std::to_string(i / d) + ", column '" +
                      train_set.column_names()[i % d] + "'");
    }
  }

  std::vector<SortedColumn> columns(d);
  {
    std::vector<std::uint32_t> order(n);
    for (std::size_t f = 0; f < d; ++f) {
      std::iota(order.begin(), order.end(), 0u);
      std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return train_set.at(a, f) < train_set.at(b, f);
      });
      columns[f].rows = order;
      columns[f].values.resize(n);
      for (std::size_t k = 0; k < n; ++k) columns[f].values[k] = train_set.at(order[k], f);
      mark_binary(columns[f]);
    }
  }

  TreeEnsemble model;
  model.base_score = config.base_score;
  model.learning_rate = config.learning_rate;
  model.column_names = train_set.column_names();

  Rng rng(seed);
  std::vector<double> margin(n, model.base_margin());
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<char> in_sample(n, 1);
  std::vector<int> leaf_of(n, -1);
  std::vector<int> all_features(d);
  std::iota(all_features.begin(), all_features.end(), 0);
  std::vector<int> features = all_features;
  const auto& labels = train_set.labels();
  TreeGrower grower(train_set, columns, config);

  for (int round = 0; round < config.n_rounds; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      const double p = sigmoid(margin[r]);
      grad[r] = p - labels[r];
      hess[r] = p * (1.0 - p);
    }
    if (config.subsample < 1.0) {
      bool any = false;
      for (std::size_t r = 0; r < n; ++r) {
        in_sample[r] = uniform_unit(rng) < config.subsample ? 1 : 0;
        any = any || in_sample[r];
      }
      if (!any) std::fill(in_sample.begin(), in_sample.end(), 1);
    }
    if (config.colsample < 1.0) {
      const auto k = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(config.colsample * static_cast<double>(d))));
      std::vector<int> perm = all_features;
      shuffle(std::span<int>(perm), rng);
      features.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(features.begin(), features.end());
    }

    std::fill(leaf_of.begin(), leaf_of.end(), -1);
    auto nodes = grower.grow(grad, hess, in_sample, features, leaf_of);
    if (!(nodes[0].cover > 0.0)) {
      throw TrainingError("train: round " + std::to_string(round) + " has zero total hessian");
    }

    Tree tree;
    tree.nodes = nodes;
    for (std::size_t r = 0; r < n; ++r) {
      const double w = leaf_of[r] >= 0 ? nodes[static_cast<std::size_t>(leaf_of[r])].weight
                                       : tree.leaf_weight(train_set.row(r));
      margin[r] += config.learning_rate * w;
    }
    model.trees.push_back(to_preorder(nodes));
  }
  return model;
}

}  // namespace shapstab
