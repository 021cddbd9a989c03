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

// Cross-model agreement of feature-importance rankings.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapstab/treeshap.hpp"

namespace shapstab {

// m x n; ranks[k][j] is the rank of feature j in model k, 1 = most important.
struct RankMatrix {
  std::vector<std::vector<int>> ranks;
  std::vector<std::string> feature_names;
  std::vector<std::string> model_ids;

  std::size_t n_models() const { return ranks.size(); }
  std::size_t n_features() const { return feature_names.size(); }

  // Throws AlignmentError unless every row is a permutation of 1..n.
  void validate() const;

  // Header "model,<features...>", one row per model.
  void write_csv(std::ostream& out) const;
};

struct ChiSquareResult {
  double chi_square = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
};

struct ConcordanceReport {
  double w = 0.0;
  double s = 0.0;
  std::vector<long long> rank_sums;
  double mean_rank_sum = 0.0;
  std::size_t m = 0;
  std::size_t n = 0;
  ChiSquareResult chi;

  nlohmann::json to_json() const;
};

struct FeatureRankStats {
  std::map<int, int> histogram;  // rank -> model count
  std::size_t unique_ranks = 0;
  int min_rank = 0;
  int max_rank = 0;
  double mean_rank = 0.0;
};

struct RankFrequencyTable {
  std::vector<std::string> feature_names;
  std::vector<FeatureRankStats> features;
  // Feature indices: smallest mean rank first, largest mean rank first, and
  // most distinct ranks first.
  std::vector<std::size_t> top_by_mean_rank;
  std::vector<std::size_t> bottom_by_mean_rank;
  std::vector<std::size_t> top_by_unique_ranks;

  nlohmann::json to_json() const;
};

struct NamedSubset {
  std::string name;
  std::vector<std::size_t> features;
};

struct SubgroupConcordance {
  std::string name;
  std::vector<std::string> features;
  ConcordanceReport report;
};

// Descending score order per model; exact ties go to the lower index.
RankMatrix rank_features(const std::vector<GlobalImportance>& importances,
                         std::vector<std::string> model_ids = {});

// W = 12 S / (m^2 (n^3 - n)), with S the squared deviation of the per-feature
// rank sums around their mean. Fills chi via chi_square_test.
ConcordanceReport kendalls_w(const RankMatrix& ranks);

// chi^2 = m (n - 1) W on n - 1 degrees of freedom, upper-tail p-value.
ChiSquareResult chi_square_test(double w, std::size_t m, std::size_t n);

// Upper regularized incomplete gamma Q(a, x).
double chi_square_survival(double x, double df);

RankFrequencyTable rank_frequency(const RankMatrix& ranks, std::size_t k = 5);

// Re-ranks the subset's features 1..|subset| within each model, then applies
// kendalls_w.
std::vector<SubgroupConcordance> subgroup_concordance(const RankMatrix& ranks,
                                                      const std::vector<NamedSubset>& subsets);

}  // namespace shapstab
