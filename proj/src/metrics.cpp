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

#include "shapstab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "shapstab/error.hpp"
#include "shapstab/io_util.hpp"

namespace shapstab {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const int> labels,
                         const char* what) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  }
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++c.pos;
    } else if (labels[i] == 0) {
      ++c.neg;
    } else {
      throw ValidationError(std::string(what) + ": label at index " + std::to_string(i) +
                            " is not 0 or 1");
    }
    if (!std::isfinite(scores[i])) {
      throw DataError(std::string(what) + ": non-finite score at index " + std::to_string(i));
    }
  }
  return c;
}

void require_both_classes(const ClassCounts& c, const char* what) {
  if (c.pos == 0 || c.neg == 0) {
    throw UndefinedMetricError(std::string(what) + " is undefined when only one class is present");
  }
}

std::optional<double> ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

// Indices sorted by (score, index).
std::vector<std::size_t> ascending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

void DecileTable::write_csv(std::ostream& out) const {
  out << "bin,n,bads,goods,cum_bad_rate,cum_good_rate,ks_component\n";
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const auto& x = bins[b];
    out << b + 1 << ',' << x.n << ',' << x.bads << ',' << x.goods << ','
        << format_double(x.cum_bad_rate) << ',' << format_double(x.cum_good_rate) << ','
        << format_double(x.ks_component) << '\n';
  }
}

DecileTable decile_ks(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, "decile_ks");
  if (scores.size() < kDecileBins) throw UndefinedMetricError("decile_ks needs at least 10 rows");
  require_both_classes(counts, "decile_ks");

  const auto order = ascending_order(scores);
  const std::size_t n = scores.size();
  const std::size_t base = n / kDecileBins;
  const std::size_t extra = n % kDecileBins;

  DecileTable table;
  std::size_t cursor = 0;
  std::size_t cum_bads = 0;
  std::size_t cum_goods = 0;
  for (std::size_t b = 0; b < kDecileBins; ++b) {
    DecileBin& bin = table.bins[b];
    bin.n = base + (b < extra ? 1 : 0);
    for (std::size_t k = 0; k < bin.n; ++k, ++cursor) {
      if (labels[order[cursor]] == 1) ++bin.bads; else ++bin.goods;
    }
    cum_bads += bin.bads;
    cum_goods += bin.goods;
    bin.cum_bad_rate = static_cast<double>(cum_bads) / static_cast<double>(counts.pos);
    bin.cum_good_rate = static_cast<double>(cum_goods) / static_cast<double>(counts.neg);
    bin.ks_component = std::abs(bin.cum_bad_rate - bin.cum_good_rate);
    table.ks = std::max(table.ks, bin.ks_component);
  }
  return table;
}

double threshold_free_ks(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, "threshold_free_ks");
  require_both_classes(counts, "threshold_free_ks");
  const auto order = ascending_order(scores);
  std::size_t bads = 0;
  std::size_t goods = 0;
  double best = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 1) ++bads; else ++goods;
    const bool group_end = k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (!group_end) continue;
    const double tpr = static_cast<double>(bads) / static_cast<double>(counts.pos);
    const double fpr = static_cast<double>(goods) / static_cast<double>(counts.neg);
    best = std::max(best, std::abs(tpr - fpr));
  }
  return best;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& MetricSuite::names() {
  static const std::vector<std::string> kNames = {"accuracy", "sensitivity", "specificity",
                                                  "precision", "npv",        "f1",
                                                  "g_mean",   "mcc",         "auroc",
                                                  "ks"};
  return kNames;
}

std::optional<double> MetricSuite::get(const std::string& name) const {
  if (name == "accuracy") return accuracy;
  if (name == "sensitivity") return sensitivity;
  if (name == "specificity") return specificity;
  if (name == "precision") return precision;
  if (name == "npv") return npv;
  if (name == "f1") return f1;
  if (name == "g_mean") return g_mean;
  if (name == "mcc") return mcc;
  if (name == "auroc") return auroc;
  if (name == "ks") return ks;
  throw Error("unknown metric '" + name + "'");
}

nlohmann::json MetricSuite::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& name : names()) {
    const auto v = get(name);
    j[name] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  }
  return j;
}

std::pair<ConfusionCounts, MetricSuite> confusion_at_threshold(std::span<const double> scores,
                                                               std::span<const int> labels,
                                                               double threshold) {
  check_inputs(scores, labels, "confusion_at_threshold");
  ConfusionCounts c;
  c.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto tn = static_cast<double>(c.tn);
  const auto fn = static_cast<double>(c.fn);

  MetricSuite m;
  m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
  m.sensitivity = ratio(tp, tp + fn);
  m.specificity = ratio(tn, tn + fp);
  m.precision = ratio(tp, tp + fp);
  m.npv = ratio(tn, tn + fn);
  if (m.precision && m.sensitivity) {
    m.f1 = ratio(2.0 * *m.precision * *m.sensitivity, *m.precision + *m.sensitivity);
  }
  if (m.sensitivity && m.specificity) m.g_mean = std::sqrt(*m.sensitivity * *m.specificity);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den > 0.0) m.mcc = (tp * tn - fp * fn) / std::sqrt(den);
  return {c, m};
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, "auroc");
  require_both_classes(counts, "auroc");
  const auto order = ascending_order(scores);
  // Sum of 1-based mid-ranks of the positives, doubled to stay integral.
  long double twice_rank_sum = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
    const auto twice_mid = static_cast<long double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] == 1) twice_rank_sum += twice_mid;
    }
    start = end;
  }
  const auto pos = static_cast<long double>(counts.pos);
  const auto neg = static_cast<long double>(counts.neg);
  const long double twice_u = twice_rank_sum - pos * (pos + 1);
  return static_cast<double>(twice_u / (2 * pos * neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, "roc_curve");
  require_both_classes(counts, "roc_curve");
  auto order = ascending_order(scores);
  std::reverse(order.begin(), order.end());
  std::vector<RocPoint> points{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 1) ++tp; else ++fp;
    const bool group_end = k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (!group_end) continue;
    points.push_back({static_cast<double>(fp) / static_cast<double>(counts.neg),
                      static_cast<double>(tp) / static_cast<double>(counts.pos)});
  }
  return points;
}

std::vector<RocPoint> roc_on_grid(std::span<const double> scores, std::span<const int> labels,
                                  std::size_t n_points) {
  if (n_points < 2) throw ValidationError("roc_on_grid needs at least 2 points");
  const auto curve = roc_curve(scores, labels);
  std::vector<RocPoint> out;
  out.reserve(n_points);
  std::size_t seg = 0;
  for (std::size_t g = 0; g < n_points; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(n_points - 1);
    // Advance to the last vertex with fpr <= x; vertical runs resolve upward.
    while (seg + 1 < curve.size() && curve[seg + 1].fpr <= x) ++seg;
    double tpr = curve[seg].tpr;
    if (seg + 1 < curve.size() && curve[seg + 1].fpr > curve[seg].fpr) {
      const double t = (x - curve[seg].fpr) / (curve[seg + 1].fpr - curve[seg].fpr);
      tpr = curve[seg].tpr + t * (curve[seg + 1].tpr - curve[seg].tpr);
    }
    out.push_back({x, tpr});
  }
  return out;
}

MetricSuite evaluate(std::span<const double> scores, std::span<const int> labels,
                     double threshold, DecileTable* decile_out, ConfusionCounts* counts_out) {
  auto [counts, suite] = confusion_at_threshold(scores, labels, threshold);
  const auto table = decile_ks(scores, labels);
  suite.ks = table.ks;
  suite.auroc = auroc(scores, labels);
  if (decile_out) *decile_out = table;
  if (counts_out) *counts_out = counts;
  return suite;
}

}  // namespace shapstab
