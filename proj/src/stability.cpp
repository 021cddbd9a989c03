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

#include "shapstab/stability.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "shapstab/error.hpp"

namespace shapstab {

void RankMatrix::validate() const {
  const std::size_t n = n_features();
  if (model_ids.size() != ranks.size()) {
    throw AlignmentError("RankMatrix: model id count does not match row count");
  }
  std::vector<char> seen(n + 1);
  for (std::size_t k = 0; k < ranks.size(); ++k) {
    if (ranks[k].size() != n) {
      throw AlignmentError("RankMatrix: row " + std::to_string(k) + " has wrong length");
    }
    std::fill(seen.begin(), seen.end(), 0);
    for (int r : ranks[k]) {
      if (r < 1 || static_cast<std::size_t>(r) > n || seen[static_cast<std::size_t>(r)]) {
        throw AlignmentError("RankMatrix: row " + std::to_string(k) +
                             " is not a permutation of 1..n");
      }
      seen[static_cast<std::size_t>(r)] = 1;
    }
  }
}

void RankMatrix::write_csv(std::ostream& out) const {
  out << "model";
  for (const auto& f : feature_names) out << ',' << f;
  out << '\n';
  for (std::size_t k = 0; k < ranks.size(); ++k) {
    out << model_ids[k];
    for (int r : ranks[k]) out << ',' << r;
    out << '\n';
  }
}

RankMatrix rank_features(const std::vector<GlobalImportance>& importances,
                         std::vector<std::string> model_ids) {
  if (importances.size() < 2) throw AlignmentError("rank_features needs at least 2 models");
  const auto& names = importances.front().feature_names;
  if (model_ids.empty()) {
    for (std::size_t k = 0; k < importances.size(); ++k) model_ids.push_back(std::to_string(k));
  }
  if (model_ids.size() != importances.size()) {
    throw AlignmentError("rank_features: model id count does not match importance count");
  }
  RankMatrix out;
  out.feature_names = names;
  out.model_ids = std::move(model_ids);
  std::vector<std::size_t> order(names.size());
  for (std::size_t k = 0; k < importances.size(); ++k) {
    const auto& imp = importances[k];
    if (imp.feature_names != names || imp.scores.size() != names.size()) {
      throw AlignmentError("rank_features: model " + std::to_string(k) +
                           " has a different feature list");
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return imp.scores[a] > imp.scores[b]; });
    std::vector<int> row(names.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) row[order[pos]] = static_cast<int>(pos + 1);
    out.ranks.push_back(std::move(row));
  }
  return out;
}

double chi_square_survival(double x, double df) {
  if (!(df > 0.0)) throw UndefinedStatisticError("chi-square needs df > 0");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

ChiSquareResult chi_square_test(double w, std::size_t m, std::size_t n) {
  if (m < 2 || n < 2) throw UndefinedStatisticError("chi_square_test needs m >= 2 and n >= 2");
  if (!(w >= 0.0 && w <= 1.0)) throw UndefinedStatisticError("chi_square_test: W outside [0, 1]");
  ChiSquareResult r;
  r.df = n - 1;
  r.chi_square = static_cast<double>(m) * static_cast<double>(n - 1) * w;
  r.p_value = chi_square_survival(r.chi_square, static_cast<double>(r.df));
  return r;
}

ConcordanceReport kendalls_w(const RankMatrix& ranks) {
  ranks.validate();
  const std::size_t m = ranks.n_models();
  const std::size_t n = ranks.n_features();
  if (n < 2) throw UndefinedStatisticError("Kendall's W needs at least 2 ranked features");
  if (m < 1) throw UndefinedStatisticError("Kendall's W needs at least 1 ranking");

  ConcordanceReport rep;
  rep.m = m;
  rep.n = n;
  rep.rank_sums.assign(n, 0);
  for (const auto& row : ranks.ranks) {
    for (std::size_t j = 0; j < n; ++j) rep.rank_sums[j] += row[j];
  }
  // 4S = sum (2 R_i - m (n + 1))^2 is an exact integer.
  const auto mm = static_cast<long long>(m);
  const auto nn = static_cast<long long>(n);
  long long four_s = 0;
  for (long long r : rep.rank_sums) {
    const long long d = 2 * r - mm * (nn + 1);
    four_s += d * d;
  }
  rep.mean_rank_sum = static_cast<double>(mm * (nn + 1)) / 2.0;
  rep.s = static_cast<double>(four_s) / 4.0;
  const long double numerator = 3.0L * static_cast<long double>(four_s);
  const long double denominator =
      static_cast<long double>(mm * mm) * static_cast<long double>(nn * nn * nn - nn);
  rep.w = static_cast<double>(numerator / denominator);
  if (m >= 2) rep.chi = chi_square_test(rep.w, m, n);
  return rep;
}

nlohmann::json ConcordanceReport::to_json() const {
  return {{"W", w},
          {"S", s},
          {"m", m},
          {"n", n},
          {"rank_sums", rank_sums},
          {"mean_rank_sum", mean_rank_sum},
          {"chi_square", chi.chi_square},
          {"df", chi.df},
          {"p_value", chi.p_value}};
}

RankFrequencyTable rank_frequency(const RankMatrix& ranks, std::size_t k) {
  ranks.validate();
  const std::size_t m = ranks.n_models();
  const std::size_t n = ranks.n_features();
  RankFrequencyTable t;
  t.feature_names = ranks.feature_names;
  t.features.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto& f = t.features[j];
    long long sum = 0;
    for (const auto& row : ranks.ranks) {
      ++f.histogram[row[j]];
      sum += row[j];
    }
    f.unique_ranks = f.histogram.size();
    if (!f.histogram.empty()) {
      f.min_rank = f.histogram.begin()->first;
      f.max_rank = f.histogram.rbegin()->first;
    }
    f.mean_rank = m ? static_cast<double>(sum) / static_cast<double>(m) : 0.0;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t kk = std::min(k, n);

  auto by_mean = idx;
  std::stable_sort(by_mean.begin(), by_mean.end(), [&](std::size_t a, std::size_t b) {
    return t.features[a].mean_rank < t.features[b].mean_rank;
  });
  t.top_by_mean_rank.assign(by_mean.begin(), by_mean.begin() + static_cast<std::ptrdiff_t>(kk));
  t.bottom_by_mean_rank.assign(by_mean.rbegin(), by_mean.rbegin() + static_cast<std::ptrdiff_t>(kk));

  auto by_unique = idx;
  std::stable_sort(by_unique.begin(), by_unique.end(), [&](std::size_t a, std::size_t b) {
    return t.features[a].unique_ranks > t.features[b].unique_ranks;
  });
  t.top_by_unique_ranks.assign(by_unique.begin(), by_unique.begin() + static_cast<std::ptrdiff_t>(kk));
  return t;
}

nlohmann::json RankFrequencyTable::to_json() const {
  nlohmann::json features_json = nlohmann::json::array();
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& f = features[j];
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [rank, count] : f.histogram) hist[std::to_string(rank)] = count;
    features_json.push_back({{"feature", feature_names[j]},
                             {"histogram", hist},
                             {"unique_ranks", f.unique_ranks},
                             {"min_rank", f.min_rank},
                             {"max_rank", f.max_rank},
                             {"mean_rank", f.mean_rank}});
  }
  auto names_of = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::string> out;
    for (auto i : ids) out.push_back(feature_names[i]);
    return out;
  };
  return {{"features", features_json},
          {"top_by_mean_rank", names_of(top_by_mean_rank)},
          {"bottom_by_mean_rank", names_of(bottom_by_mean_rank)},
          {"top_by_unique_ranks", names_of(top_by_unique_ranks)}};
}

std::vector<SubgroupConcordance> subgroup_concordance(const RankMatrix& ranks,
                                                      const std::vector<NamedSubset>& subsets) {
  ranks.validate();
  std::vector<SubgroupConcordance> out;
  for (const auto& subset : subsets) {
    if (subset.features.size() < 2) {
      throw UndefinedStatisticError("subgroup '" + subset.name + "' has fewer than 2 features");
    }
    std::vector<std::size_t> sorted = subset.features;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw AlignmentError("subgroup '" + subset.name + "' lists a feature twice");
    }
    RankMatrix sub;
    sub.model_ids = ranks.model_ids;
    for (auto j : subset.features) {
      if (j >= ranks.n_features()) {
        throw AlignmentError("subgroup '" + subset.name + "' references feature out of range");
      }
      sub.feature_names.push_back(ranks.feature_names[j]);
    }
    std::vector<std::size_t> order(subset.features.size());
    for (const auto& row : ranks.ranks) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return row[subset.features[a]] < row[subset.features[b]];
      });
      std::vector<int> dense(order.size());
      for (std::size_t pos = 0; pos < order.size(); ++pos) dense[order[pos]] = static_cast<int>(pos + 1);
      sub.ranks.push_back(std::move(dense));
    }
    SubgroupConcordance sc;
    sc.name = subset.name;
    sc.features = sub.feature_names;
    sc.report = kendalls_w(sub);
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace shapstab
