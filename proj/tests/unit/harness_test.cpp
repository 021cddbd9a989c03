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

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "shapstab/error.hpp"
#include "shapstab/harness.hpp"
#include "shapstab/io_util.hpp"
#include "synthetic.hpp"

namespace shapstab {
namespace {

namespace fs = std::filesystem;

ExperimentConfig small_config(const fs::path& dir, std::size_t n_models = 2) {
  const auto csv = dir / "credit.csv";
  if (!fs::exists(csv)) testing::write_synthetic_credit_csv(csv, 500, 4);
  ExperimentConfig c;
  c.data_path = csv;
  c.n_models = n_models;
  c.seed_base = 10;
  c.train.n_rounds = 15;
  c.train.max_depth = 3;
  c.output_dir = dir / "out";
  return c;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

TEST(Aggregate, PercentileInterpolation) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < 100; ++i) v[i] = static_cast<double>(i + 1);
  EXPECT_DOUBLE_EQ(median(v), 50.5);
  EXPECT_NEAR(percentile(v, 0.025), 3.475, 1e-12);
  EXPECT_NEAR(percentile(v, 0.975), 97.525, 1e-12);
  const std::vector<double> odd{1, 2, 10};
  EXPECT_EQ(median(odd), 2.0);
}

TEST(Aggregate, ConstantUndefinedAndCounts) {
  std::vector<MetricSuite> suites(5);
  for (std::size_t k = 0; k < 5; ++k) {
    suites[k].accuracy = 0.8;
    if (k != 2) suites[k].precision = 0.1 * static_cast<double>(k);
  }
  const auto agg = aggregate_metrics(suites);
  ASSERT_EQ(agg.size(), MetricSuite::names().size());
  const auto find = [&](const std::string& name) {
    return *std::find_if(agg.begin(), agg.end(), [&](const AggregateStat& a) { return a.metric == name; });
  };
  const auto acc = find("accuracy");
  EXPECT_EQ(*acc.median, 0.8);
  EXPECT_EQ(*acc.lower, 0.8);
  EXPECT_EQ(*acc.upper, 0.8);
  const auto prec = find("precision");
  EXPECT_EQ(prec.n_defined, 4u);
  EXPECT_EQ(prec.n_undefined, 1u);
  EXPECT_NEAR(*prec.median, 0.2, 1e-12);
  const auto mcc = find("mcc");
  EXPECT_FALSE(mcc.median.has_value());
  EXPECT_EQ(mcc.n_undefined, 5u);
  EXPECT_TRUE(mcc.to_json()["median"].is_null());
  EXPECT_THROW(aggregate_metrics({MetricSuite{}}), UndefinedStatisticError);
}

TEST(Config, JsonRoundTripAndValidation) {
  const auto dir = testing::scratch_dir("config");
  const auto c = small_config(dir);
  const auto back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.digest(), c.digest());

  auto moved = c;
  moved.output_dir = "/elsewhere";
  EXPECT_EQ(moved.digest(), c.digest());
  auto other = c;
  other.seed_base = 11;
  EXPECT_NE(other.digest(), c.digest());

  auto j = c.to_json();
  j["n_model"] = 3;
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["n_models"] = 1;
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["n_models"] = -4;
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["shap_split"] = "holdout";
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["train"]["depth"] = 3;
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["feature_subgroups"] = {{{"name", "x"}, {"pattern", "(["}}};
  EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);

  auto missing = c;
  missing.data_path = dir / "nope.csv";
  EXPECT_THROW(missing.validate(true), ConfigError);
  EXPECT_NO_THROW(missing.validate(false));
}

TEST(Config, LoadResolvesRelativePaths) {
  const auto dir = testing::scratch_dir("config_load");
  small_config(dir);
  write_file(dir / "study.json", R"({"data_path": "credit.csv", "n_models": 3, "train": {"n_rounds": 5}})");
  const auto c = ExperimentConfig::load(dir / "study.json");
  EXPECT_EQ(c.data_path, (dir / "credit.csv").lexically_normal());
  EXPECT_EQ(c.n_models, 3u);
  EXPECT_EQ(c.train.n_rounds, 5);
  EXPECT_EQ(c.train.max_depth, 6);
  EXPECT_EQ(c.shap_split, ShapSplit::kTest);
  EXPECT_NO_THROW(c.validate(true));
  write_file(dir / "broken.json", "{not json");
  EXPECT_THROW(ExperimentConfig::load(dir / "broken.json"), ConfigError);
  EXPECT_THROW(ExperimentConfig::load(dir / "absent.json"), ConfigError);
}

TEST(RunExperiment, TwoModelsOnSyntheticData) {
  const auto dir = testing::scratch_dir("two_models");
  const auto c = small_config(dir);
  const auto s = run_experiment(c);
  ASSERT_EQ(s.models.size(), 2u);
  EXPECT_EQ(s.models[0].seed, 10u);
  EXPECT_EQ(s.models[1].seed, 11u);
  EXPECT_EQ(s.concordance.m, 2u);
  EXPECT_EQ(s.concordance.n, s.schema.column_names.size());
  EXPECT_EQ(s.rank_matrix.n_models(), 2u);
  EXPECT_EQ(s.subgroups.size(), 3u);
  EXPECT_EQ(s.models[0].n_train + s.models[0].n_test, 500u);
  EXPECT_EQ(s.models[0].n_test, 150u);
  EXPECT_EQ(s.models[0].n_shap_rows, 150u);
  EXPECT_LE(s.max_additivity_error, 1e-6);
  EXPECT_EQ(s.models[0].roc.size(), 101u);
  for (const auto& g : s.subgroups) EXPECT_GE(g.features.size(), 2u);
  EXPECT_EQ(s.subgroups[1].features,
            (std::vector<std::string>{"bill_amt1", "bill_amt2", "bill_amt3", "bill_amt4",
                                      "bill_amt5", "bill_amt6"}));
}

TEST(RunExperiment, DeterministicAcrossRunsOrdersAndWorkers) {
  const auto dir = testing::scratch_dir("determinism");
  auto c = small_config(dir, 4);
  c.output_dir = dir / "a";
  const auto s1 = run_experiment(c);
  const auto m1 = emit_reports(s1, c.output_dir);

  RunOptions permuted;
  permuted.workers = 3;
  permuted.execution_order = {3, 1, 0, 2};
  auto c2 = c;
  c2.output_dir = dir / "b";
  const auto s2 = run_experiment(c2, permuted);
  const auto m2 = emit_reports(s2, c2.output_dir);

  EXPECT_EQ(s1.to_json().dump(), s2.to_json().dump());
  EXPECT_EQ(read_file(dir / "a" / "manifest.json"), read_file(dir / "b" / "manifest.json"));
  EXPECT_EQ(m1.to_json(), m2.to_json());

  // Rerun into the same directory.
  const auto m3 = emit_reports(run_experiment(c), c.output_dir);
  EXPECT_EQ(m1.to_json(), m3.to_json());

  RunOptions bad;
  bad.execution_order = {0, 0, 1, 2};
  EXPECT_THROW(run_experiment(c, bad), ConfigError);
}

TEST(EmitReports, ManifestListsEveryFileAndDigestsMatch) {
  const auto dir = testing::scratch_dir("emit");
  auto c = small_config(dir, 3);
  c.export_models = true;
  c.export_shap = true;
  const auto s = run_experiment(c);
  const auto manifest = emit_reports(s, c.output_dir);
  std::vector<std::string> listed;
  for (const auto& f : manifest.files) {
    listed.push_back(f.path);
    EXPECT_EQ(sha256_file(c.output_dir / f.path), f.sha256) << f.path;
    EXPECT_EQ(fs::file_size(c.output_dir / f.path), f.bytes);
  }
  for (const auto& f : expected_report_files(s)) {
    EXPECT_NE(std::find(listed.begin(), listed.end(), f), listed.end()) << f;
  }
  for (const char* f : {"models/seed_10.json", "shap/seed_12.csv"}) {
    EXPECT_NE(std::find(listed.begin(), listed.end(), f), listed.end()) << f;
  }
  EXPECT_TRUE(fs::exists(c.output_dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(c.output_dir / "timings.json"));
  EXPECT_EQ(std::find(listed.begin(), listed.end(), "timings.json"), listed.end());
  EXPECT_EQ(manifest.config_digest, c.digest());
  const auto conc = nlohmann::json::parse(read_file(c.output_dir / "concordance.json"));
  EXPECT_EQ(conc["config_digest"], c.digest());
  const auto freq = nlohmann::json::parse(read_file(c.output_dir / "rank_frequency.json"));
  EXPECT_EQ(freq["config_digest"], c.digest());

  // Exported model reloads and reproduces SHAP exactly.
  const auto model =
      TreeEnsemble::from_json(nlohmann::json::parse(read_file(c.output_dir / "models/seed_10.json")));
  EXPECT_EQ(model.trees.size(), 15u);
}

TEST(EmitReports, PlotShapes) {
  const auto dir = testing::scratch_dir("plots");
  const auto c = small_config(dir, 3);
  const auto s = run_experiment(c);
  emit_reports(s, c.output_dir);
  std::ifstream heat(c.output_dir / "plot_rank_heatmap.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(heat, line);
  EXPECT_EQ(split_line(line).size(), s.schema.column_names.size() + 1);
  while (std::getline(heat, line)) {
    ++rows;
    EXPECT_EQ(split_line(line).size(), s.schema.column_names.size() + 1);
  }
  EXPECT_EQ(rows, 3u);

  std::ifstream roc(c.output_dir / "plot_roc_curves.csv");
  std::size_t roc_rows = 0;
  std::getline(roc, line);
  while (std::getline(roc, line)) ++roc_rows;
  EXPECT_EQ(roc_rows, 3u * 101u);

  std::ifstream ks(c.output_dir / "plot_ks_histogram.csv");
  std::size_t ks_total = 0;
  std::getline(ks, line);
  while (std::getline(ks, line)) ks_total += std::stoul(split_line(line)[2]);
  EXPECT_EQ(ks_total, 3u);
}

TEST(EmitReports, AggregatesRecomputeFromPerModelCsv) {
  const auto dir = testing::scratch_dir("roundtrip");
  const auto c = small_config(dir, 5);
  const auto s = run_experiment(c);
  emit_reports(s, c.output_dir);

  std::ifstream in(c.output_dir / "per_model_metrics.csv");
  std::string line;
  std::getline(in, line);
  const auto header = split_line(line);
  std::vector<MetricSuite> suites;
  while (std::getline(in, line)) {
    const auto cells = split_line(line);
    MetricSuite m;
    for (const auto& name : MetricSuite::names()) {
      const auto col = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
      ASSERT_LT(col, cells.size());
      std::optional<double> v;
      if (cells[col] != "NA") v = std::stod(cells[col]);
      if (name == "accuracy") m.accuracy = v;
      if (name == "sensitivity") m.sensitivity = v;
      if (name == "specificity") m.specificity = v;
      if (name == "precision") m.precision = v;
      if (name == "npv") m.npv = v;
      if (name == "f1") m.f1 = v;
      if (name == "g_mean") m.g_mean = v;
      if (name == "mcc") m.mcc = v;
      if (name == "auroc") m.auroc = v;
      if (name == "ks") m.ks = v;
    }
    suites.push_back(m);
  }
  ASSERT_EQ(suites.size(), 5u);
  const auto summary = nlohmann::json::parse(read_file(c.output_dir / "summary.json"));
  const auto recomputed = aggregate_metrics(suites);
  ASSERT_EQ(summary["aggregates"].size(), recomputed.size());
  for (std::size_t i = 0; i < recomputed.size(); ++i) {
    EXPECT_EQ(summary["aggregates"][i], recomputed[i].to_json()) << recomputed[i].metric;
  }
}

TEST(RunExperiment, FailedModelFailsTheRun) {
  const auto dir = testing::scratch_dir("failure");
  // One default in 20 rows cannot be stratified into both splits.
  std::string csv = testing::synthetic_credit_csv(20, 1);
  std::stringstream in(csv);
  std::ostringstream out;
  std::string line;
  std::getline(in, line);
  out << line << '\n';
  int row = 0;
  while (std::getline(in, line)) {
    line.back() = row++ == 0 ? '1' : '0';
    out << line << '\n';
  }
  write_file(dir / "credit.csv", out.str());
  auto c = small_config(dir);
  c.subgroups = {{"bills", "^bill_amt"}};
  try {
    run_experiment(c);
    FAIL();
  } catch (const RunFailure& e) {
    EXPECT_NE(std::string(e.what()).find("2 of 2"), std::string::npos);
  }
}

TEST(RunExperiment, SubgroupMatchingTooFewColumnsIsConfigError) {
  const auto dir = testing::scratch_dir("subgroup");
  auto c = small_config(dir);
  c.subgroups = {{"limit", "^limit_bal$"}};
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(EmitReports, WriteFailureLeavesPartialManifest) {
  const auto dir = testing::scratch_dir("write_fail");
  const auto c = small_config(dir);
  const auto s = run_experiment(c);
  const auto target = dir / "target";
  fs::create_directories(target);
  fs::create_directories(target / "per_model_metrics.csv");  // a directory blocks the file
  EXPECT_THROW(emit_reports(s, target), IoError);
  const auto partial = nlohmann::json::parse(read_file(target / "manifest.partial.json"));
  EXPECT_EQ(partial["files"].size(), 3u);
  EXPECT_TRUE(partial.contains("error"));
}

}  // namespace
}  // namespace shapstab
