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

#include "shapstab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "shapstab/error.hpp"
#include "shapstab/io_util.hpp"

namespace shapstab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string na_or(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

nlohmann::json null_or(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string seed_file(const std::string& dir, std::uint64_t seed, const char* ext) {
  return dir + "/seed_" + std::to_string(seed) + ext;
}

std::uint64_t get_unsigned(const nlohmann::json& v, const char* key) {
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
    throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double get_number(const nlohmann::json& v, const char* key) {
  if (!v.is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
  return v.get<double>();
}

bool get_bool(const nlohmann::json& v, const char* key) {
  if (!v.is_boolean()) throw ConfigError(std::string("config key '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const nlohmann::json& v, const char* key) {
  if (!v.is_string()) throw ConfigError(std::string("config key '") + key + "' must be a string");
  return v.get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

nlohmann::json canonical_config(const ExperimentConfig& c) {
  auto j = c.to_json();
  j.erase("output_dir");
  return j;
}

DesignMatrix shap_rows(const DesignMatrix& matrix, const SplitIndices& split, ShapSplit which) {
  switch (which) {
    case ShapSplit::kTest: return matrix.select_rows(split.test_rows);
    case ShapSplit::kTrain: return matrix.select_rows(split.train_rows);
    case ShapSplit::kAll: return matrix;
  }
  return matrix;
}

std::vector<NamedSubset> resolve_subgroups(const std::vector<SubgroupSpec>& specs,
                                           const std::vector<std::string>& columns) {
  std::vector<NamedSubset> out;
  for (const auto& spec : specs) {
    const std::regex re(spec.pattern, std::regex::ECMAScript);
    NamedSubset s;
    s.name = spec.name;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (std::regex_search(columns[j], re)) s.features.push_back(j);
    }
    if (s.features.size() < 2) {
      throw ConfigError("feature subgroup '" + spec.name + "' matches " +
                        std::to_string(s.features.size()) + " columns; at least 2 are needed");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::string to_string(ShapSplit split) {
  switch (split) {
    case ShapSplit::kTest: return "test";
    case ShapSplit::kTrain: return "train";
    case ShapSplit::kAll: return "all";
  }
  return "test";
}

ShapSplit parse_shap_split(const std::string& text) {
  if (text == "test") return ShapSplit::kTest;
  if (text == "train") return ShapSplit::kTrain;
  if (text == "all") return ShapSplit::kAll;
  throw ConfigError("shap_split must be test, train or all, got '" + text + "'");
}

std::vector<SubgroupSpec> default_subgroups() {
  return {{"pay_status", "^pay_[1-6]_"},
          {"bill_amt", "^bill_amt[1-6]$"},
          {"pay_amt", "^pay_amt[1-6]$"}};
}

void ExperimentConfig::validate(bool check_paths) const {
  if (n_models < 2) throw ConfigError("n_models must be at least 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  train.validate();
  if (data_path.empty()) throw ConfigError("data_path is required");
  if (check_paths && !std::filesystem::is_regular_file(data_path)) {
    throw ConfigError("data_path does not exist: " + data_path.string());
  }
  std::set<std::string> names;
  for (const auto& s : subgroups) {
    if (s.name.empty()) throw ConfigError("feature subgroup names must be non-empty");
    if (!names.insert(s.name).second) throw ConfigError("duplicate feature subgroup '" + s.name + "'");
    try {
      std::regex re(s.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError("feature subgroup '" + s.name + "' has an invalid pattern: " + e.what());
    }
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& s : subgroups) groups.push_back({{"name", s.name}, {"pattern", s.pattern}});
  return {{"data_path", data_path.generic_string()},
          {"n_models", n_models},
          {"seed_base", seed_base},
          {"train_fraction", train_fraction},
          {"train", train.to_json()},
          {"threshold", threshold},
          {"shap_split", to_string(shap_split)},
          {"output_dir", output_dir.generic_string()},
          {"feature_subgroups", groups},
          {"export_shap", export_shap},
          {"export_models", export_models}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "data_path") {
      c.data_path = resolve(get_string(v, "data_path"), base_dir);
    } else if (key == "n_models") {
      c.n_models = static_cast<std::size_t>(get_unsigned(v, "n_models"));
    } else if (key == "seed_base") {
      c.seed_base = get_unsigned(v, "seed_base");
    } else if (key == "train_fraction") {
      c.train_fraction = get_number(v, "train_fraction");
    } else if (key == "train") {
      c.train = TrainConfig::from_json(v);
    } else if (key == "threshold") {
      c.threshold = get_number(v, "threshold");
    } else if (key == "shap_split") {
      c.shap_split = parse_shap_split(get_string(v, "shap_split"));
    } else if (key == "output_dir") {
      c.output_dir = resolve(get_string(v, "output_dir"), base_dir);
    } else if (key == "feature_subgroups") {
      if (!v.is_array()) throw ConfigError("feature_subgroups must be an array");
      c.subgroups.clear();
      for (const auto& g : v) {
        if (!g.is_object()) throw ConfigError("each feature subgroup must be an object");
        SubgroupSpec s;
        bool has_name = false;
        bool has_pattern = false;
        for (const auto& [gk, gv] : g.items()) {
          if (gk == "name") {
            s.name = get_string(gv, "feature_subgroups.name");
            has_name = true;
          } else if (gk == "pattern") {
            s.pattern = get_string(gv, "feature_subgroups.pattern");
            has_pattern = true;
          } else {
            throw ConfigError("unknown feature subgroup key '" + gk + "'");
          }
        }
        if (!has_name || !has_pattern) {
          throw ConfigError("each feature subgroup needs a name and a pattern");
        }
        c.subgroups.push_back(std::move(s));
      }
    } else if (key == "export_shap") {
      c.export_shap = get_bool(v, "export_shap");
    } else if (key == "export_models") {
      c.export_models = get_bool(v, "export_models");
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.validate(false);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::string ExperimentConfig::digest() const { return sha256_hex(canonical_config(*this).dump()); }

// ---------------------------------------------------------------------------
// Runs

PreparedData prepare_data(const std::filesystem::path& csv_path) {
  PreparedData d;
  d.cleaned = clean_education(load_dataset(csv_path));
  d.matrix = one_hot_encode(d.cleaned, &d.encoder);
  d.schema = make_schema_report(d.cleaned, d.encoder);
  d.data_digest = sha256_file(csv_path);
  return d;
}

ModelRun run_model(const PreparedData& data, const ExperimentConfig& config, std::size_t k,
                   std::vector<std::string>* exported) {
  const auto start = Clock::now();
  ModelRun run;
  run.seed = config.seed_base + k;
  try {
    const auto split = stratified_split(data.matrix, run.seed, config.train_fraction);
    const auto train_set = data.matrix.select_rows(split.train_rows);
    const auto test_set = data.matrix.select_rows(split.test_rows);
    run.n_train = train_set.n_rows();
    run.n_test = test_set.n_rows();

    const auto model = train(train_set, config.train, run.seed);
    run.n_trees = model.trees.size();

    const auto probs = predict_proba(model, test_set);
    run.metrics = evaluate(probs, test_set.labels(), config.threshold, &run.deciles, &run.confusion);
    run.roc = roc_on_grid(probs, test_set.labels());

    const auto explain_set = shap_rows(data.matrix, split, config.shap_split);
    const auto shap =
        shap_matrix(model, explain_set, "seed_" + std::to_string(run.seed), to_string(config.shap_split));
    run.n_shap_rows = shap.n_rows();
    for (std::size_t i = 0; i < shap.n_rows(); ++i) {
      const auto phi = shap.row(i);
      long double total = shap.base_value();
      for (double p : phi) total += p;
      const double margin = predict_margin(model, explain_set.row(i));
      run.max_additivity_error =
          std::max(run.max_additivity_error, std::abs(static_cast<double>(total) - margin));
    }
    run.importance = global_importance(shap);
    std::ostringstream imp;
    run.importance.write_csv(imp);
    run.importance_digest = sha256_hex(imp.str());

    if (config.export_models) {
      const auto rel = seed_file("models", run.seed, ".json");
      write_file(config.output_dir / rel, model.to_json().dump(2) + "\n");
      if (exported) exported->push_back(rel);
    }
    if (config.export_shap) {
      const auto rel = seed_file("shap", run.seed, ".csv");
      std::ostringstream out;
      shap.write_csv(out);
      write_file(config.output_dir / rel, out.str());
      if (exported) exported->push_back(rel);
    }
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  run.seconds = seconds_since(start);
  return run;
}

// ---------------------------------------------------------------------------
// Aggregation

double percentile(std::span<const double> sorted_values, double p) {
  if (sorted_values.empty()) throw UndefinedStatisticError("percentile of an empty sample");
  const double pos = static_cast<double>(sorted_values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return sorted_values[lo];
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

double median(std::span<const double> sorted_values) {
  if (sorted_values.empty()) throw UndefinedStatisticError("median of an empty sample");
  const std::size_t n = sorted_values.size();
  if (n % 2 == 1) return sorted_values[n / 2];
  return (sorted_values[n / 2 - 1] + sorted_values[n / 2]) / 2.0;
}

nlohmann::json AggregateStat::to_json() const {
  return {{"metric", metric},
          {"median", null_or(median)},
          {"lower_2_5", null_or(lower)},
          {"upper_97_5", null_or(upper)},
          {"n_defined", n_defined},
          {"n_undefined", n_undefined}};
}

AggregateStat aggregate_values(const std::string& metric,
                               const std::vector<std::optional<double>>& values) {
  AggregateStat s;
  s.metric = metric;
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) defined.push_back(*v); else ++s.n_undefined;
  }
  s.n_defined = defined.size();
  if (defined.empty()) return s;
  std::sort(defined.begin(), defined.end());
  s.median = shapstab::median(defined);
  s.lower = percentile(defined, 0.025);
  s.upper = percentile(defined, 0.975);
  return s;
}

std::vector<AggregateStat> aggregate_metrics(const std::vector<MetricSuite>& per_model) {
  if (per_model.size() < 2) throw UndefinedStatisticError("aggregate_metrics needs at least 2 entries");
  std::vector<AggregateStat> out;
  for (const auto& name : MetricSuite::names()) {
    std::vector<std::optional<double>> values;
    values.reserve(per_model.size());
    for (const auto& m : per_model) values.push_back(m.get(name));
    out.push_back(aggregate_values(name, values));
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json RunSummary::to_json() const {
  nlohmann::json per_model = nlohmann::json::array();
  for (const auto& m : models) {
    per_model.push_back({{"seed", m.seed},
                         {"n_train", m.n_train},
                         {"n_test", m.n_test},
                         {"n_shap_rows", m.n_shap_rows},
                         {"n_trees", m.n_trees},
                         {"confusion",
                          {{"tp", m.confusion.tp},
                           {"fp", m.confusion.fp},
                           {"tn", m.confusion.tn},
                           {"fn", m.confusion.fn},
                           {"threshold", m.confusion.threshold}}},
                         {"ks", m.deciles.ks},
                         {"metrics", m.metrics.to_json()},
                         {"importance_digest", m.importance_digest},
                         {"max_additivity_error", m.max_additivity_error}});
  }
  nlohmann::json aggregate = nlohmann::json::array();
  for (const auto& a : aggregates) aggregate.push_back(a.to_json());
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : subgroups) {
    groups.push_back({{"name", g.name}, {"features", g.features}, {"concordance", g.report.to_json()}});
  }
  auto names_of = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::string> out;
    for (auto i : ids) out.push_back(rank_frequency.feature_names[i]);
    return out;
  };
  return {{"config", canonical_config(config)},
          {"config_digest", config_digest},
          {"data_digest", data_digest},
          {"n_models", models.size()},
          {"n_rows", schema.n_rows},
          {"n_features", schema.column_names.size()},
          {"aggregates", aggregate},
          {"concordance", concordance.to_json()},
          {"subgroups", groups},
          {"top_by_mean_rank", names_of(rank_frequency.top_by_mean_rank)},
          {"bottom_by_mean_rank", names_of(rank_frequency.bottom_by_mean_rank)},
          {"top_by_unique_ranks", names_of(rank_frequency.top_by_unique_ranks)},
          {"max_additivity_error", max_additivity_error},
          {"models", per_model}};
}

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto start = Clock::now();
  config.validate(true);

  RunSummary summary;
  summary.config = config;
  summary.config_digest = config.digest();

  const auto data = prepare_data(config.data_path);
  summary.data_digest = data.data_digest;
  summary.schema = data.schema;
  const auto subsets = resolve_subgroups(config.subgroups, data.matrix.column_names());
  summary.timings.prepare_seconds = seconds_since(start);

  const std::size_t n = config.n_models;
  std::vector<std::size_t> order = options.execution_order;
  if (order.empty()) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
  } else {
    auto check = order;
    std::sort(check.begin(), check.end());
    for (std::size_t k = 0; k < n; ++k) {
      if (check.size() != n || check[k] != k) {
        throw ConfigError("execution_order must be a permutation of 0..n_models-1");
      }
    }
  }

  const auto models_start = Clock::now();
  std::vector<ModelRun> runs(n);
  std::vector<std::vector<std::string>> exported(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t slot = next++; slot < n; slot = next++) {
      const std::size_t k = order[slot];
      runs[k] = run_model(data, config, k, &exported[k]);
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(options.workers, 1, n);
  summary.workers = n_workers;
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  summary.timings.models_seconds = seconds_since(models_start);

  std::string failures;
  std::size_t n_failed = 0;
  for (const auto& r : runs) {
    if (!r.error) continue;
    ++n_failed;
    failures += "\n  seed " + std::to_string(r.seed) + ": " + *r.error;
  }
  if (n_failed > 0) {
    throw RunFailure(std::to_string(n_failed) + " of " + std::to_string(n) +
                     " model runs failed:" + failures);
  }

  const auto stability_start = Clock::now();
  std::vector<GlobalImportance> importances;
  std::vector<std::string> ids;
  std::vector<MetricSuite> suites;
  for (const auto& r : runs) {
    importances.push_back(r.importance);
    ids.push_back(std::to_string(r.seed));
    suites.push_back(r.metrics);
    summary.max_additivity_error = std::max(summary.max_additivity_error, r.max_additivity_error);
  }
  for (auto& files : exported) {
    summary.extra_files.insert(summary.extra_files.end(), files.begin(), files.end());
  }
  summary.aggregates = aggregate_metrics(suites);
  summary.rank_matrix = rank_features(importances, ids);
  summary.concordance = kendalls_w(summary.rank_matrix);
  summary.rank_frequency = rank_frequency(summary.rank_matrix);
  summary.subgroups = subgroup_concordance(summary.rank_matrix, subsets);
  summary.models = std::move(runs);
  summary.timings.stability_seconds = seconds_since(stability_start);
  summary.timings.total_seconds = seconds_since(start);
  return summary;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::vector<std::size_t> features_by_mean_rank(const RankFrequencyTable& t) {
  std::vector<std::size_t> idx(t.features.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return t.features[a].mean_rank < t.features[b].mean_rank;
  });
  return idx;
}

std::string per_model_csv(const RunSummary& s) {
  std::ostringstream out;
  out << "seed,n_train,n_test,n_shap_rows,n_trees,threshold,tp,fp,tn,fn";
  for (const auto& name : MetricSuite::names()) out << ',' << name;
  out << ",max_additivity_error,importance_digest\n";
  for (const auto& m : s.models) {
    out << m.seed << ',' << m.n_train << ',' << m.n_test << ',' << m.n_shap_rows << ','
        << m.n_trees << ',' << format_double(m.confusion.threshold) << ',' << m.confusion.tp << ','
        << m.confusion.fp << ',' << m.confusion.tn << ',' << m.confusion.fn;
    for (const auto& name : MetricSuite::names()) out << ',' << na_or(m.metrics.get(name));
    out << ',' << format_double(m.max_additivity_error) << ',' << m.importance_digest << '\n';
  }
  return out.str();
}

std::string aggregate_csv(const RunSummary& s) {
  std::ostringstream out;
  out << "metric,median,lower_2_5,upper_97_5,n_defined,n_undefined\n";
  for (const auto& a : s.aggregates) {
    out << a.metric << ',' << na_or(a.median) << ',' << na_or(a.lower) << ',' << na_or(a.upper)
        << ',' << a.n_defined << ',' << a.n_undefined << '\n';
  }
  return out.str();
}

std::string importance_matrix_csv(const RunSummary& s) {
  std::ostringstream out;
  out << "model";
  for (const auto& f : s.rank_matrix.feature_names) out << ',' << f;
  out << '\n';
  for (const auto& m : s.models) {
    out << m.seed;
    for (double v : m.importance.scores) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::string concordance_json(const RunSummary& s) {
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < s.subgroups.size(); ++g) {
    const auto& sg = s.subgroups[g];
    groups.push_back({{"name", sg.name},
                      {"pattern", s.config.subgroups[g].pattern},
                      {"features", sg.features},
                      {"concordance", sg.report.to_json()}});
  }
  return nlohmann::json{{"config_digest", s.config_digest},
                        {"all_features", s.concordance.to_json()},
                        {"subgroups", groups}}
             .dump(2) +
         "\n";
}

// Fixed-width bins aligned to multiples of the width.
std::string ks_histogram_csv(const RunSummary& s, double width = 0.005) {
  std::map<long long, std::size_t> counts;
  for (const auto& m : s.models) {
    ++counts[static_cast<long long>(std::floor(m.deciles.ks / width))];
  }
  std::ostringstream out;
  out << "bin_lower,bin_upper,count\n";
  if (counts.empty()) return out.str();
  for (long long b = counts.begin()->first; b <= counts.rbegin()->first; ++b) {
    const auto it = counts.find(b);
    out << format_double(static_cast<double>(b) * width) << ','
        << format_double(static_cast<double>(b + 1) * width) << ','
        << (it == counts.end() ? 0 : it->second) << '\n';
  }
  return out.str();
}

std::string metric_distribution_csv(const RunSummary& s) {
  std::ostringstream out;
  out << "seed,metric,value\n";
  for (const auto& m : s.models) {
    for (const auto& name : MetricSuite::names()) {
      out << m.seed << ',' << name << ',' << na_or(m.metrics.get(name)) << '\n';
    }
  }
  return out.str();
}

std::string roc_csv(const RunSummary& s) {
  std::ostringstream out;
  out << "seed,fpr,tpr\n";
  for (const auto& m : s.models) {
    for (const auto& p : m.roc) {
      out << m.seed << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
    }
  }
  return out.str();
}

std::string heatmap_csv(const RunSummary& s) {
  const auto order = features_by_mean_rank(s.rank_frequency);
  std::ostringstream out;
  out << "model";
  for (auto j : order) out << ',' << s.rank_matrix.feature_names[j];
  out << '\n';
  for (std::size_t k = 0; k < s.rank_matrix.n_models(); ++k) {
    out << s.rank_matrix.model_ids[k];
    for (auto j : order) out << ',' << s.rank_matrix.ranks[k][j];
    out << '\n';
  }
  return out.str();
}

std::string unique_ranks_csv(const RunSummary& s) {
  const auto& t = s.rank_frequency;
  std::ostringstream out;
  out << "feature,mean_rank,unique_ranks,min_rank,max_rank,modal_rank,modal_count\n";
  for (auto j : features_by_mean_rank(t)) {
    const auto& f = t.features[j];
    int modal = 0;
    int modal_count = 0;
    for (const auto& [rank, count] : f.histogram) {
      if (count > modal_count) {
        modal = rank;
        modal_count = count;
      }
    }
    out << t.feature_names[j] << ',' << format_double(f.mean_rank) << ',' << f.unique_ranks << ','
        << f.min_rank << ',' << f.max_rank << ',' << modal << ',' << modal_count << '\n';
  }
  return out.str();
}

std::string timings_json(const RunSummary& s) {
  nlohmann::json per_model = nlohmann::json::array();
  for (const auto& m : s.models) per_model.push_back({{"seed", m.seed}, {"seconds", m.seconds}});
  return nlohmann::json{{"workers", s.workers},
                        {"prepare_seconds", s.timings.prepare_seconds},
                        {"models_seconds", s.timings.models_seconds},
                        {"stability_seconds", s.timings.stability_seconds},
                        {"total_seconds", s.timings.total_seconds},
                        {"models", per_model}}
             .dump(2) +
         "\n";
}

}  // namespace

nlohmann::json Manifest::to_json() const {
  nlohmann::json files_json = nlohmann::json::array();
  for (const auto& f : files) {
    files_json.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  }
  return {{"config_digest", config_digest}, {"files", files_json}};
}

std::vector<std::string> expected_report_files(const RunSummary& summary) {
  std::vector<std::string> files = {"summary.json",
                                    "config.json",
                                    "schema.json",
                                    "per_model_metrics.csv",
                                    "aggregate_metrics.csv",
                                    "global_importance.csv",
                                    "rank_matrix.csv",
                                    "rank_frequency.json",
                                    "concordance.json",
                                    "plot_ks_histogram.csv",
                                    "plot_metric_distributions.csv",
                                    "plot_roc_curves.csv",
                                    "plot_rank_heatmap.csv",
                                    "plot_unique_ranks.csv"};
  for (const auto& m : summary.models) {
    files.push_back(seed_file("deciles", m.seed, ".csv"));
    files.push_back(seed_file("importance", m.seed, ".csv"));
  }
  std::sort(files.begin(), files.end());
  return files;
}

Manifest emit_reports(const RunSummary& summary, const std::filesystem::path& dir) {
  Manifest manifest;
  manifest.config_digest = summary.config_digest;

  auto record = [&](const std::string& rel, const std::string& contents) {
    manifest.files.push_back({rel, sha256_hex(contents), contents.size()});
  };
  auto put = [&](const std::string& rel, const std::string& contents) {
    write_file(dir / rel, contents);
    record(rel, contents);
  };
  auto tagged_json = [&](nlohmann::json j) {
    j["config_digest"] = summary.config_digest;
    return j.dump(2) + "\n";
  };

  try {
    put("summary.json", summary.to_json().dump(2) + "\n");
    put("config.json", tagged_json({{"config", canonical_config(summary.config)}}));
    put("schema.json", tagged_json(summary.schema.to_json()));
    put("per_model_metrics.csv", per_model_csv(summary));
    put("aggregate_metrics.csv", aggregate_csv(summary));
    put("global_importance.csv", importance_matrix_csv(summary));
    {
      std::ostringstream out;
      summary.rank_matrix.write_csv(out);
      put("rank_matrix.csv", out.str());
    }
    put("rank_frequency.json", tagged_json(summary.rank_frequency.to_json()));
    put("concordance.json", concordance_json(summary));
    put("plot_ks_histogram.csv", ks_histogram_csv(summary));
    put("plot_metric_distributions.csv", metric_distribution_csv(summary));
    put("plot_roc_curves.csv", roc_csv(summary));
    put("plot_rank_heatmap.csv", heatmap_csv(summary));
    put("plot_unique_ranks.csv", unique_ranks_csv(summary));
    for (const auto& m : summary.models) {
      std::ostringstream dec;
      m.deciles.write_csv(dec);
      put(seed_file("deciles", m.seed, ".csv"), dec.str());
      std::ostringstream imp;
      m.importance.write_csv(imp);
      put(seed_file("importance", m.seed, ".csv"), imp.str());
    }
    for (const auto& rel : summary.extra_files) record(rel, read_file(dir / rel));
    std::sort(manifest.files.begin(), manifest.files.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    write_file(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    write_file(dir / "timings.json", timings_json(summary));
  } catch (const std::exception& e) {
    try {
      auto partial = manifest.to_json();
      partial["error"] = e.what();
      write_file(dir / "manifest.partial.json", partial.dump(2) + "\n");
    } catch (const std::exception&) {
      // The directory itself is unwritable; the message below still lists progress.
    }
    throw IoError("report emission stopped after " + std::to_string(manifest.files.size()) +
                  " files: " + e.what());
  }
  return manifest;
}

}  // namespace shapstab
