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

// Acceptance criteria 1-12. Each check returns one verdict line.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "shapstab/harness.hpp"

namespace shapstab::acceptance {

struct Verdict {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
};

// Criteria 1-7; `scratch` receives the synthetic datasets and run outputs.
std::vector<Verdict> property_criteria(const std::filesystem::path& scratch);

// Criterion 2 on the full run plus criteria 8-12.
std::vector<Verdict> reference_criteria(const RunSummary& summary);

RunSummary run_reference_study(const std::filesystem::path& csv, const std::filesystem::path& out,
                               std::size_t workers);

}  // namespace shapstab::acceptance
