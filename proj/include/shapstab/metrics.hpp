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

// Credit-risk performance measures. Scores are probabilities of default;
// label 1 is a bad (default) account.

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace shapstab {

inline constexpr std::size_t kDecileBins = 10;

struct DecileBin {
  std::size_t n = 0;
  std::size_t bads = 0;
  std::size_t goods = 0;
  double cum_bad_rate = 0.0;
  double cum_good_rate = 0.0;
  double ks_component = 0.0;
};

struct DecileTable {
  std::array<DecileBin, kDecileBins> bins{};
  double ks = 0.0;

  void write_csv(std::ostream& out) const;
};

// Rows sorted by ascending score (ties by index) and cut into ten volume
// bins; the first n % 10 bins take one extra row.
DecileTable decile_ks(std::span<const double> scores, std::span<const int> labels);

// max over all score cut points of |TPR - FPR|.
double threshold_free_ks(std::span<const double> scores, std::span<const int> labels);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double threshold = 0.5;

  std::size_t total() const { return tp + fp + tn + fn; }
};

// Undefined ratios (zero denominators) are empty optionals, never 0.
struct MetricSuite {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> npv;
  std::optional<double> f1;
  std::optional<double> g_mean;
  std::optional<double> mcc;
  std::optional<double> auroc;
  std::optional<double> ks;

  static const std::vector<std::string>& names();
  std::optional<double> get(const std::string& name) const;

  // Keyed by metric name; undefined values rendered as null.
  nlohmann::json to_json() const;
};

// score >= threshold predicts positive (bad).
std::pair<ConfusionCounts, MetricSuite> confusion_at_threshold(std::span<const double> scores,
                                                               std::span<const int> labels,
                                                               double threshold = 0.5);

// Mann-Whitney AUROC with half credit for ties, via mid-rank sums.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Exact ROC polyline, one vertex per distinct score (descending).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
// TPR interpolated on an even FPR grid of `n_points` points over [0, 1].
std::vector<RocPoint> roc_on_grid(std::span<const double> scores, std::span<const int> labels,
                                  std::size_t n_points = 101);

// Thresholded metrics, AUROC and decile KS together.
MetricSuite evaluate(std::span<const double> scores, std::span<const int> labels,
                     double threshold, DecileTable* decile_out = nullptr,
                     ConfusionCounts* counts_out = nullptr);

}  // namespace shapstab
