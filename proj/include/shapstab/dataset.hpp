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

// Credit-card-default table ingestion, cleaning, one-hot encoding and
// stratified splitting.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace shapstab {

inline constexpr std::size_t kNumMonths = 6;

// Education code used for the merged {0, 4, 5, 6} group once cleaned.
inline constexpr int kEducationOther = 4;

struct RawRecord {
  std::string id;
  std::int64_t limit_bal = 0;
  int sex = 0;
  int education = 0;
  int marriage = 0;
  std::int64_t age = 0;
  std::array<int, kNumMonths> pay{};
  std::array<std::int64_t, kNumMonths> bill_amt{};
  std::array<std::int64_t, kNumMonths> pay_amt{};
  int label = 0;
};

struct RawTable {
  std::vector<RawRecord> rows;
  // Set by clean_education; one_hot_encode refuses uncleaned tables.
  bool education_merged = false;

  std::size_t size() const { return rows.size(); }
  std::size_t count_label(int label) const;
};

// Dense row-major feature table. Rows are aligned to labels.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  DesignMatrix(std::vector<std::string> column_names, std::vector<double> values,
               std::vector<int> labels);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return column_names_.size(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_cols(), n_cols()};
  }
  double at(std::size_t i, std::size_t j) const { return values_[i * n_cols() + j]; }

  const std::vector<double>& values() const { return values_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const std::vector<int>& labels() const { return labels_; }

  // Copies the given rows, in the given order, into a new matrix.
  DesignMatrix select_rows(std::span<const std::size_t> rows) const;

  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::string> column_names_;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::size_t n_rows_ = 0;
};

// Category levels observed for each categorical variable, sorted ascending.
struct CategoryMaps {
  std::vector<std::string> variables;
  std::vector<std::vector<int>> levels;
};

class OneHotEncoder {
 public:
  static const std::vector<std::string>& numeric_columns();
  static const std::vector<std::string>& categorical_variables();

  // Records the observed levels of every categorical variable.
  static OneHotEncoder fit(const RawTable& table);

  // Throws EncodingError for a level not seen during fit.
  DesignMatrix transform(const RawTable& table) const;

  const CategoryMaps& categories() const { return categories_; }
  std::vector<std::string> column_names() const;

 private:
  CategoryMaps categories_;
};

struct SchemaReport {
  std::vector<std::string> column_names;
  CategoryMaps categories;
  std::size_t n_rows = 0;
  std::size_t n_numeric = 0;
  std::size_t n_non_default = 0;
  std::size_t n_default = 0;
  std::size_t education_other_rows = 0;

  nlohmann::json to_json() const;
};

struct SplitIndices {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
};

// Parses the reference CSV layout. Header matching is case-insensitive and
// accepts both pay_0,pay_2..pay_6 and pay_1..pay_6.
RawTable load_dataset(const std::filesystem::path& path);
RawTable parse_dataset(std::istream& in);

// Merges education codes {0, 4, 5, 6} into kEducationOther.
RawTable clean_education(RawTable raw);

// Fits the encoder on `raw` and transforms it; the fitted encoder is
// returned through `encoder_out` when non-null.
DesignMatrix one_hot_encode(const RawTable& raw, OneHotEncoder* encoder_out = nullptr);

SchemaReport make_schema_report(const RawTable& cleaned, const OneHotEncoder& encoder);

SplitIndices stratified_split(const DesignMatrix& matrix, std::uint64_t seed,
                              double train_fraction);

}  // namespace shapstab
