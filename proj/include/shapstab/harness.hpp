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

// N-seed experiment orchestration, aggregation and report emission.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapstab/dataset.hpp"
#include "shapstab/gbdt.hpp"
#include "shapstab/metrics.hpp"
#include "shapstab/stability.hpp"
#include "shapstab/treeshap.hpp"

namespace shapstab {

enum class ShapSplit { kTest, kTrain, kAll };

std::string to_string(ShapSplit split);
ShapSplit parse_shap_split(const std::string& text);

// Features whose column name matches `pattern` (ECMAScript regex, searched).
struct SubgroupSpec {
  std::string name;
  std::string pattern;
};

std::vector<SubgroupSpec> default_subgroups();

struct ExperimentConfig {
  std::filesystem::path data_path;
  std::size_t n_models = 100;
  std::uint64_t seed_base = 0;
  double train_fraction = 0.7;
  TrainConfig train;
  double threshold = 0.5;
  ShapSplit shap_split = ShapSplit::kTest;
  std::filesystem::path output_dir = "shapstab_out";
  std::vector<SubgroupSpec> subgroups = default_subgroups();
  bool export_shap = false;    // per-model SHAP matrices
  bool export_models = false;  // per-model ensemble JSON

  // Throws ConfigError. With check_paths, the data file must exist.
  void validate(bool check_paths = true) const;

  nlohmann::json to_json() const;
  // Rejects unknown keys. Relative paths resolve against base_dir.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  // SHA-256 of the canonical JSON without output_dir, so the same study
  // written to two places has one digest.
  std::string digest() const;
};

// Encoded dataset shared read-only by every model run.
struct PreparedData {
  RawTable cleaned;
  OneHotEncoder encoder;
  DesignMatrix matrix;
  SchemaReport schema;
  std::string data_digest;
};

PreparedData prepare_data(const std::filesystem::path& csv_path);

struct ModelRun {
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_shap_rows = 0;
  ConfusionCounts confusion;
  MetricSuite metrics;
  DecileTable deciles;
  std::vector<RocPoint> roc;  // 101-point FPR grid
  GlobalImportance importance;
  std::string importance_digest;
  double max_additivity_error = 0.0;
  std::size_t n_trees = 0;
  double seconds = 0.0;
  std::optional<std::string> error;
};

struct AggregateStat {
  std::string metric;
  std::optional<double> median;
  std::optional<double> lower;  // 2.5th percentile
  std::optional<double> upper;  // 97.5th percentile
  std::size_t n_defined = 0;
  std::size_t n_undefined = 0;

  nlohmann::json to_json() const;
};

// Linear interpolation at position (n - 1) p of the sorted values.
double percentile(std::span<const double> sorted_values, double p);
double median(std::span<const double> sorted_values);

AggregateStat aggregate_values(const std::string& metric,
                               const std::vector<std::optional<double>>& values);
std::vector<AggregateStat> aggregate_metrics(const std::vector<MetricSuite>& per_model);

struct Timings {
  double prepare_seconds = 0.0;
  double models_seconds = 0.0;
  double stability_seconds = 0.0;
  double total_seconds = 0.0;
};

struct RunSummary {
  ExperimentConfig config;
  std::string config_digest;
  std::string data_digest;
  SchemaReport schema;
  std::vector<ModelRun> models;
  std::vector<AggregateStat> aggregates;
  RankMatrix rank_matrix;
  ConcordanceReport concordance;
  std::vector<SubgroupConcordance> subgroups;
  RankFrequencyTable rank_frequency;
  double max_additivity_error = 0.0;
  std::size_t workers = 1;
  Timings timings;
  // Optional artifacts already written during the run, relative to output_dir.
  std::vector<std::string> extra_files;

  // Deterministic content only; timings live in timings.json.
  nlohmann::json to_json() const;
};

struct RunOptions {
  std::size_t workers = 1;
  // Permutation of 0..n_models-1 giving the job pickup order; empty means
  // seed order. Outputs do not depend on it.
  std::vector<std::size_t> execution_order;
};

// One seeded split -> train -> evaluate -> explain pass. Never throws; stage
// failures land in ModelRun::error. When the config asks for exports they are
// written under output_dir and their relative paths appended to `exported`.
ModelRun run_model(const PreparedData& data, const ExperimentConfig& config, std::size_t k,
                   std::vector<std::string>* exported = nullptr);

// Throws RunFailure if any model run failed.
RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct Manifest {
  std::string config_digest;
  std::vector<ManifestEntry> files;

  nlohmann::json to_json() const;
};

// Writes every report plus manifest.json. A write failure throws IoError
// after recording the files written so far in manifest.partial.json.
Manifest emit_reports(const RunSummary& summary, const std::filesystem::path& dir);

// Files emit_reports always writes, relative to the output directory.
std::vector<std::string> expected_report_files(const RunSummary& summary);

}  // namespace shapstab
