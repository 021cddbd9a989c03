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

// Acceptance driver.
//   --properties        criteria 1-7 on synthetic inputs
//   --reference [csv]   criterion 2 and 8-12 on the public credit-card CSV;
//                       exits 77 (skip) when the file is absent
//   --rehearsal N       times a full-size study on an N-row synthetic CSV

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#include "criteria.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using shapstab::acceptance::Verdict;

namespace {

constexpr int kSkip = 77;

int report(const std::vector<Verdict>& verdicts) {
  int failed = 0;
  for (const auto& v : verdicts) {
    std::cout << (v.passed ? "PASS" : "FAIL") << "  criterion " << v.id << ": " << v.title << " | "
              << v.detail << '\n';
    failed += !v.passed;
  }
  std::cout << verdicts.size() - static_cast<std::size_t>(failed) << " passed, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

std::size_t workers_from_env() {
  const char* env = std::getenv("SHAPSTAB_WORKERS");
  if (!env) return 1;
  const long v = std::strtol(env, nullptr, 10);
  return v > 0 ? static_cast<std::size_t>(v) : 1;
}

fs::path reference_csv(int argc, char** argv) {
  if (argc > 2) return argv[2];
  if (const char* env = std::getenv("SHAPSTAB_REFERENCE_CSV")) return env;
  return fs::path(SHAPSTAB_SOURCE_DIR) / "data" / "UCI_Credit_Card.csv";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "--properties";
  try {
    if (mode == "--properties") {
      return report(shapstab::acceptance::property_criteria(shapstab::testing::scratch_dir("acceptance")));
    }
    if (mode == "--reference") {
      const auto csv = reference_csv(argc, argv);
      if (!fs::exists(csv)) {
        for (int id : {2, 8, 9, 10, 11, 12}) {
          std::cout << "SKIP  criterion " << id << ": reference dataset not found at " << csv.string()
                    << '\n';
        }
        return kSkip;
      }
      const auto out = shapstab::testing::scratch_dir("acceptance_reference");
      const auto summary = shapstab::acceptance::run_reference_study(csv, out, workers_from_env());
      std::cout << "reference outputs in " << out.string() << '\n';
      return report(shapstab::acceptance::reference_criteria(summary));
    }
    if (mode == "--rehearsal") {
      const std::size_t rows = argc > 2 ? std::stoul(argv[2]) : 30000;
      const auto dir = shapstab::testing::scratch_dir("acceptance_rehearsal");
      shapstab::testing::write_synthetic_credit_csv(dir / "synthetic.csv", rows, 2026);
      const auto start = std::chrono::steady_clock::now();
      const auto summary =
          shapstab::acceptance::run_reference_study(dir / "synthetic.csv", dir / "out", workers_from_env());
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cout << "rehearsal: " << rows << " rows, " << summary.models.size() << " models, " << secs
                << " s\n";
      report(shapstab::acceptance::reference_criteria(summary));
      return 0;
    }
    std::cerr << "usage: acceptance [--properties | --reference [csv] | --rehearsal [rows]]\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "acceptance aborted: " << e.what() << '\n';
    return 2;
  }
}
