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

// shapstab command-line entry point.
// Exit codes: 0 success, 1 config or data error, 2 run failure.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "shapstab/error.hpp"
#include "shapstab/harness.hpp"
#include "shapstab/io_util.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitRun = 2;

std::size_t resolve_workers(std::optional<std::size_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SHAPSTAB_WORKERS"); env && *env) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(env, &used);
      if (used != std::string(env).size() || v < 1) throw std::invalid_argument(env);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw shapstab::ConfigError(std::string("SHAPSTAB_WORKERS must be a positive integer, got '") +
                                  env + "'");
    }
  }
  return 1;
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out_dir,
            std::optional<std::size_t> workers_flag) {
  auto config = shapstab::ExperimentConfig::load(config_path);
  if (out_dir) config.output_dir = *out_dir;
  shapstab::RunOptions options;
  options.workers = resolve_workers(workers_flag);
  const auto summary = shapstab::run_experiment(config, options);
  const auto manifest = shapstab::emit_reports(summary, config.output_dir);

  std::cout << "models: " << summary.models.size() << "\n";
  for (const auto& a : summary.aggregates) {
    std::cout << a.metric << ": median "
              << (a.median ? shapstab::format_double(*a.median) : std::string("undefined"));
    if (a.lower && a.upper) {
      std::cout << " [" << shapstab::format_double(*a.lower) << ", "
                << shapstab::format_double(*a.upper) << "]";
    }
    std::cout << "\n";
  }
  std::cout << "kendall_w: " << shapstab::format_double(summary.concordance.w)
            << " (p = " << shapstab::format_double(summary.concordance.chi.p_value) << ")\n";
  for (const auto& g : summary.subgroups) {
    std::cout << "kendall_w[" << g.name << "]: " << shapstab::format_double(g.report.w)
              << " (p = " << shapstab::format_double(g.report.chi.p_value) << ")\n";
  }
  std::cout << "max_additivity_error: " << shapstab::format_double(summary.max_additivity_error)
            << "\n";
  std::cout << "wrote " << manifest.files.size() << " files to " << config.output_dir.string()
            << " in " << shapstab::format_double(std::round(summary.timings.total_seconds * 10) / 10)
            << " s\n";
  return kExitOk;
}

int cmd_prepare(const std::string& data, const std::string& report,
                const std::optional<std::string>& matrix_out) {
  const auto prepared = shapstab::prepare_data(data);
  auto j = prepared.schema.to_json();
  j["data_digest"] = prepared.data_digest;
  shapstab::write_file(report, j.dump(2) + "\n");
  if (matrix_out) {
    std::ostringstream out;
    prepared.matrix.write_csv(out);
    shapstab::write_file(*matrix_out, out.str());
  }
  std::cout << "rows: " << prepared.matrix.n_rows() << ", columns: " << prepared.matrix.n_cols()
            << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& model_path, std::size_t row_index, const std::string& data,
               double tolerance) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(shapstab::read_file(model_path));
  } catch (const shapstab::IoError& e) {
    throw shapstab::DataError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw shapstab::ModelIntegrityError(std::string("model file is not valid JSON: ") + e.what());
  }
  const auto model = shapstab::TreeEnsemble::from_json(j);
  const auto prepared = shapstab::prepare_data(data);
  if (prepared.matrix.column_names() != model.column_names) {
    throw shapstab::DimensionError("the data's encoded columns do not match the model's columns");
  }
  if (row_index >= prepared.matrix.n_rows()) {
    throw shapstab::ValidationError("row index " + std::to_string(row_index) + " out of range (" +
                                    std::to_string(prepared.matrix.n_rows()) + " rows)");
  }
  const auto row = prepared.matrix.row(row_index);
  const auto fast = shapstab::shap_values(model, row);
  const auto exact = shapstab::brute_force_shap(model, row);

  double max_diff = std::abs(fast.base_value - exact.base_value);
  std::cout << "feature,treeshap,oracle\n";
  for (std::size_t f = 0; f < fast.phi.size(); ++f) {
    max_diff = std::max(max_diff, std::abs(fast.phi[f] - exact.phi[f]));
    if (fast.phi[f] != 0.0 || exact.phi[f] != 0.0) {
      std::cout << model.column_names[f] << ',' << shapstab::format_double(fast.phi[f]) << ','
                << shapstab::format_double(exact.phi[f]) << "\n";
    }
  }
  const double margin = shapstab::predict_margin(model, row);
  std::cout << "base_value: " << shapstab::format_double(fast.base_value) << "\n"
            << "margin: " << shapstab::format_double(margin) << "\n"
            << "additivity_error: " << shapstab::format_double(std::abs(fast.total() - margin))
            << "\n"
            << "max_abs_diff: " << shapstab::format_double(max_diff) << "\n";
  const bool ok = max_diff <= tolerance;
  std::cout << (ok ? "MATCH" : "MISMATCH") << "\n";
  return ok ? kExitOk : kExitRun;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability audit of SHAP feature-importance rankings across seeded GBDT models"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the N-seed experiment and write all reports");
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  run->add_option("--config", config_path, "Experiment config JSON")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--workers", workers, "Parallel model runs (fallback: SHAPSTAB_WORKERS)")
      ->check(CLI::PositiveNumber);

  auto* prepare = app.add_subcommand("prepare", "Encode a dataset and write its schema report");
  std::string prep_data;
  std::string prep_report;
  std::optional<std::string> prep_matrix;
  prepare->add_option("--data", prep_data, "Credit dataset CSV")->required();
  prepare->add_option("--report", prep_report, "Schema report JSON to write")->required();
  prepare->add_option("--matrix", prep_matrix, "Also write the encoded design matrix CSV");

  auto* verify = app.add_subcommand("verify", "Check TreeSHAP against the exact oracle on one row");
  std::string model_path;
  std::size_t row_index = 0;
  std::string verify_data;
  double tolerance = 1e-9;
  verify->add_option("--model", model_path, "Model JSON")->required();
  verify->add_option("--row-index", row_index, "Row of the encoded dataset")->required();
  verify->add_option("--data", verify_data, "Credit dataset CSV supplying the row")->required();
  verify->add_option("--tolerance", tolerance, "Max abs difference allowed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, workers);
    if (*prepare) return cmd_prepare(prep_data, prep_report, prep_matrix);
    if (*verify) return cmd_verify(model_path, row_index, verify_data, tolerance);
  } catch (const shapstab::RunFailure& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRun;
  } catch (const shapstab::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitRun;
  } catch (const shapstab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kExitRun;
  }
  return kExitInput;
}
