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

#include "shapstab/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <unordered_set>

#include "shapstab/error.hpp"
#include "shapstab/io_util.hpp"
#include "shapstab/random.hpp"

namespace shapstab {

namespace {

const std::vector<std::string>& canonical_columns() {
  static const std::vector<std::string> kColumns = [] {
    std::vector<std::string> c = {"id", "limit_bal", "sex", "education", "marriage", "age"};
    for (std::size_t m = 1; m <= kNumMonths; ++m) c.push_back("pay_" + std::to_string(m));
    for (std::size_t m = 1; m <= kNumMonths; ++m) c.push_back("bill_amt" + std::to_string(m));
    for (std::size_t m = 1; m <= kNumMonths; ++m) c.push_back("pay_amt" + std::to_string(m));
    c.push_back("label");
    return c;
  }();
  return kColumns;
}

std::optional<std::string> canonical_name(const std::string& header) {
  std::string h = detail::to_lower(header);
  if (h == "pay_0") h = "pay_1";
  if (h == "default.payment.next.month" || h == "default_payment_next_month") h = "label";
  const auto& cols = canonical_columns();
  if (std::find(cols.begin(), cols.end(), h) == cols.end()) return std::nullopt;
  return h;
}

std::string row_context(std::size_t data_row) {
  return "data row " + std::to_string(data_row) + " (line " + std::to_string(data_row + 2) + ")";
}

// Integers may be written with a zero fractional part ("20000.0").
std::int64_t parse_integer(const std::string& text, const std::string& column,
                           std::size_t data_row) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc() && ptr == last) return value;
  double d = 0.0;
  auto [dptr, dec] = std::from_chars(first, last, d);
  if (dec == std::errc() && dptr == last && std::isfinite(d) && d == std::trunc(d) &&
      std::abs(d) < 9.0e15) {
    return static_cast<std::int64_t>(d);
  }
  throw ParseError("non-numeric value '" + text + "' in column '" + column + "' at " +
                   row_context(data_row));
}

}  // namespace

std::size_t RawTable::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [&](const RawRecord& r) { return r.label == label; }));
}

DesignMatrix::DesignMatrix(std::vector<std::string> column_names, std::vector<double> values,
                           std::vector<int> labels)
    : column_names_(std::move(column_names)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      n_rows_(labels_.size()) {
  if (values_.size() != n_rows_ * column_names_.size()) {
    throw DimensionError("DesignMatrix: value count " + std::to_string(values_.size()) +
                         " does not match " + std::to_string(n_rows_) + " rows x " +
                         std::to_string(column_names_.size()) + " columns");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : column_names_) {
    if (!seen.insert(name).second) throw SchemaError("duplicate column name '" + name + "'");
  }
}

DesignMatrix DesignMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<double> values;
  values.reserve(rows.size() * n_cols());
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= n_rows_) throw DimensionError("select_rows: row index out of range");
    auto src = row(r);
    values.insert(values.end(), src.begin(), src.end());
    labels.push_back(labels_[r]);
  }
  return DesignMatrix(column_names_, std::move(values), std::move(labels));
}

void DesignMatrix::write_csv(std::ostream& out) const {
  for (const auto& name : column_names_) out << name << ',';
  out << "label\n";
  for (std::size_t i = 0; i < n_rows_; ++i) {
    for (double v : row(i)) out << format_double(v) << ',';
    out << labels_[i] << '\n';
  }
}

RawTable parse_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file: missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto headers = detail::split_csv_line(line);
  const auto& canon = canonical_columns();
  std::vector<std::size_t> slot(headers.size());
  std::vector<bool> present(canon.size(), false);
  for (std::size_t i = 0; i < headers.size(); ++i) {
    auto name = canonical_name(headers[i]);
    if (!name) throw SchemaError("unexpected column '" + headers[i] + "'");
    const auto idx = static_cast<std::size_t>(
        std::find(canon.begin(), canon.end(), *name) - canon.begin());
    if (present[idx]) throw SchemaError("duplicate column '" + headers[i] + "'");
    present[idx] = true;
    slot[i] = idx;
  }
  for (std::size_t c = 0; c < canon.size(); ++c) {
    if (!present[c]) throw SchemaError("missing column '" + canon[c] + "'");
  }

  RawTable table;
  std::unordered_set<std::string> ids;
  std::vector<std::string> cells(canon.size());
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != headers.size()) {
      throw ParseError("expected " + std::to_string(headers.size()) + " fields, found " +
                       std::to_string(fields.size()) + " at " + row_context(data_row));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) cells[slot[i]] = std::move(fields[i]);

    RawRecord rec;
    std::size_t c = 0;
    auto next_int = [&]() {
      const std::size_t idx = c++;
      return parse_integer(cells[idx], canon[idx], data_row);
    };
    rec.id = cells[c++];
    rec.limit_bal = next_int();
    rec.sex = static_cast<int>(next_int());
    rec.education = static_cast<int>(next_int());
    rec.marriage = static_cast<int>(next_int());
    rec.age = next_int();
    for (auto& p : rec.pay) p = static_cast<int>(next_int());
    for (auto& b : rec.bill_amt) b = next_int();
    for (auto& p : rec.pay_amt) {
      p = next_int();
      if (p < 0) {
        throw ValidationError("negative pay amount in column '" + canon[c - 1] + "' at " +
                              row_context(data_row));
      }
    }
    const auto label = next_int();
    if (label != 0 && label != 1) {
      throw ValidationError("label must be 0 or 1, found " + std::to_string(label) + " at " +
                            row_context(data_row));
    }
    rec.label = static_cast<int>(label);
    if (!ids.insert(rec.id).second) {
      throw IntegrityError("duplicate id '" + rec.id + "' at " + row_context(data_row));
    }
    table.rows.push_back(std::move(rec));
    ++data_row;
  }
  return table;
}

RawTable load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_dataset(in);
}

RawTable clean_education(RawTable raw) {
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    int& code = raw.rows[i].education;
    if (raw.education_merged) {
      if (code < 1 || code > kEducationOther) {
        throw ValidationError("education code " + std::to_string(code) +
                              " invalid after merge at " + row_context(i));
      }
      continue;
    }
    if (code < 0 || code > 6) {
      throw ValidationError("education code " + std::to_string(code) + " out of range 0..6 at " +
                            row_context(i));
    }
    if (code == 0 || code >= 4) code = kEducationOther;
  }
  raw.education_merged = true;
  return raw;
}

// ---------------------------------------------------------------------------
// One-hot encoding

namespace {

int categorical_value(const RawRecord& r, std::size_t var) {
  switch (var) {
    case 0:
      return r.sex;
    case 1:
      return r.education;
    case 2:
      return r.marriage;
    default:
      return r.pay[var - 3];
  }
}

std::string level_name(const std::string& variable, int level) {
  if (variable == "education" && level == kEducationOther) return "education_other";
  return variable + "_" + std::to_string(level);
}

}  // namespace

const std::vector<std::string>& OneHotEncoder::numeric_columns() {
  static const std::vector<std::string> kNumeric = [] {
    std::vector<std::string> c = {"limit_bal", "age"};
    for (std::size_t m = 1; m <= kNumMonths; ++m) c.push_back("bill_amt" + std::to_string(m));
    for (std::size_t m = 1; m <= kNumMonths; ++m) c.push_back("pay_amt" + std::to_string(m));
    return c;
  }();
  return kNumeric;
}

const std::vector<std::string>& OneHotEncoder::categorical_variables() {
  static const std::vector<std::string> kVars = [] {
    std::vector<std::string> c = {"sex", "education", "marriage"};
    for (std::size_t m = 1; m <= kNumMonths; ++m) c.push_back("pay_" + std::to_string(m));
    return c;
  }();
  return kVars;
}

OneHotEncoder OneHotEncoder::fit(const RawTable& table) {
  if (!table.education_merged) {
    throw EncodingError("one_hot_encode requires clean_education to be applied first");
  }
  const auto& vars = categorical_variables();
  std::vector<std::set<int>> observed(vars.size());
  for (const auto& r : table.rows) {
    for (std::size_t v = 0; v < vars.size(); ++v) observed[v].insert(categorical_value(r, v));
  }
  OneHotEncoder enc;
  enc.categories_.variables = vars;
  for (auto& levels : observed) enc.categories_.levels.emplace_back(levels.begin(), levels.end());
  return enc;
}

std::vector<std::string> OneHotEncoder::column_names() const {
  std::vector<std::string> names = numeric_columns();
  for (std::size_t v = 0; v < categories_.variables.size(); ++v) {
    for (int level : categories_.levels[v]) {
      names.push_back(level_name(categories_.variables[v], level));
    }
  }
  return names;
}

DesignMatrix OneHotEncoder::transform(const RawTable& table) const {
  if (!table.education_merged) {
    throw EncodingError("one_hot_encode requires clean_education to be applied first");
  }
  auto names = column_names();
  const std::size_t n_cols = names.size();
  const std::size_t n_numeric = numeric_columns().size();

  std::vector<std::size_t> group_offset(categories_.variables.size());
  std::size_t offset = n_numeric;
  for (std::size_t v = 0; v < categories_.variables.size(); ++v) {
    group_offset[v] = offset;
    offset += categories_.levels[v].size();
  }

  std::vector<double> values(table.size() * n_cols, 0.0);
  std::vector<int> labels;
  labels.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const RawRecord& r = table.rows[i];
    double* out = values.data() + i * n_cols;
    std::size_t c = 0;
    out[c++] = static_cast<double>(r.limit_bal);
    out[c++] = static_cast<double>(r.age);
    for (auto b : r.bill_amt) out[c++] = static_cast<double>(b);
    for (auto p : r.pay_amt) out[c++] = static_cast<double>(p);
    for (std::size_t v = 0; v < categories_.variables.size(); ++v) {
      const auto& levels = categories_.levels[v];
      const int value = categorical_value(r, v);
      auto it = std::lower_bound(levels.begin(), levels.end(), value);
      if (it == levels.end() || *it != value) {
        throw EncodingError("unseen level " + std::to_string(value) + " for variable '" +
                            categories_.variables[v] + "' at " + row_context(i));
      }
      out[group_offset[v] + static_cast<std::size_t>(it - levels.begin())] = 1.0;
    }
    labels.push_back(r.label);
  }
  return DesignMatrix(std::move(names), std::move(values), std::move(labels));
}

DesignMatrix one_hot_encode(const RawTable& raw, OneHotEncoder* encoder_out) {
  auto encoder = OneHotEncoder::fit(raw);
  auto matrix = encoder.transform(raw);
  if (encoder_out) *encoder_out = std::move(encoder);
  return matrix;
}

SchemaReport make_schema_report(const RawTable& cleaned, const OneHotEncoder& encoder) {
  SchemaReport report;
  report.column_names = encoder.column_names();
  report.categories = encoder.categories();
  report.n_rows = cleaned.size();
  report.n_numeric = OneHotEncoder::numeric_columns().size();
  report.n_default = cleaned.count_label(1);
  report.n_non_default = cleaned.count_label(0);
  report.education_other_rows = static_cast<std::size_t>(
      std::count_if(cleaned.rows.begin(), cleaned.rows.end(),
                    [](const RawRecord& r) { return r.education == kEducationOther; }));
  return report;
}

nlohmann::json SchemaReport::to_json() const {
  nlohmann::json cats = nlohmann::json::object();
  for (std::size_t v = 0; v < categories.variables.size(); ++v) {
    cats[categories.variables[v]] = categories.levels[v];
  }
  return {
      {"n_rows", n_rows},
      {"n_cols", column_names.size()},
      {"n_numeric", n_numeric},
      {"n_one_hot", column_names.size() - n_numeric},
      {"label_counts", {{"non_default", n_non_default}, {"default", n_default}}},
      {"education_other_rows", education_other_rows},
      {"columns", column_names},
      {"categories", cats},
  };
}

// ---------------------------------------------------------------------------
// Splitting

SplitIndices stratified_split(const DesignMatrix& matrix, std::uint64_t seed,
                              double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie in (0, 1)");
  }
  const std::size_t n = matrix.n_rows();
  if (n < 10) throw ValidationError("stratified_split needs at least 10 rows");

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[matrix.labels()[i] ? 1 : 0].push_back(i);

  // Largest-remainder allocation: exact total round(n * f), each class within
  // one row of its proportional share.
  const auto total_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  std::size_t allocated = 0;
  for (int c = 0; c < 2; ++c) {
    const double share = static_cast<double>(by_class[c].size()) * train_fraction;
    take[c] = static_cast<std::size_t>(std::floor(share));
    remainder[c] = share - std::floor(share);
    allocated += take[c];
  }
  while (allocated < total_train) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    ++take[c];
    remainder[c] = -1.0;
    ++allocated;
  }

  for (int c = 0; c < 2; ++c) {
    if (take[c] == 0 || take[c] >= by_class[c].size()) {
      throw DegenerateSplitError("train_fraction " + std::to_string(train_fraction) +
                                 " leaves a split without members of class " + std::to_string(c));
    }
  }

  Rng rng(seed);
  SplitIndices split;
  split.seed = seed;
  split.train_fraction = train_fraction;
  for (int c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    shuffle(std::span<std::size_t>(idx), rng);
    split.train_rows.insert(split.train_rows.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
    split.test_rows.insert(split.test_rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]), idx.end());
  }
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  return split;
}

}  // namespace shapstab
