#pragma once

// Tabular CSV ingestion, one-hot encoding and train/test partitioning.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lire/error.hpp"

namespace lire {

enum class FeatureKind { kNumeric, kCategorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  std::vector<std::string> categories;  // categorical only, in first-seen order
};

// Where an encoded column came from: a numeric feature, or one category of a
// categorical feature.
struct ColumnSource {
  std::size_t feature = 0;
  std::optional<std::size_t> category;
};

struct LabelSpec {
  std::string column;
  std::string positive;
  std::string negative;
};

struct Schema {
  std::vector<FeatureSpec> features;
  std::vector<ColumnSource> columns;
  LabelSpec label;

  std::size_t num_columns() const { return columns.size(); }

  bool is_categorical(std::size_t column) const {
    return columns.at(column).category.has_value();
  }

  const std::string& feature_name(std::size_t column) const {
    return features.at(columns.at(column).feature).name;
  }

  const std::string& category_label(std::size_t column) const {
    const auto& src = columns.at(column);
    return features.at(src.feature).categories.at(src.category.value());
  }

  // Display name of an encoded column: "age" or "sex=M".
  std::string column_name(std::size_t column) const {
    if (!is_categorical(column)) return feature_name(column);
    return feature_name(column) + "=" + category_label(column);
  }
};

// Dense row-major N x D matrix of encoded features plus labels in {-1,+1}.
class Sample {
 public:
  Sample() = default;

  Sample(std::vector<double> values, std::size_t cols, std::vector<int> labels,
         std::shared_ptr<const Schema> schema)
      : values_(std::move(values)),
        cols_(cols),
        labels_(std::move(labels)),
        schema_(std::move(schema)) {
    if (cols_ == 0 || labels_.empty()) {
      throw DataError("dataset", "sample must have at least one row and one column");
    }
    if (values_.size() != cols_ * labels_.size()) {
      throw DataError("dataset", "feature matrix size does not match label count");
    }
    for (int y : labels_) {
      if (y != 1 && y != -1) throw DataError("dataset", "labels must be -1 or +1");
    }
    if (schema_ && schema_->num_columns() != cols_) {
      throw DataError("dataset", "schema column count does not match matrix");
    }
  }

  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return cols_; }

  std::span<const double> row(std::size_t n) const {
    return {values_.data() + n * cols_, cols_};
  }
  double at(std::size_t n, std::size_t d) const { return values_[n * cols_ + d]; }

  std::span<const int> labels() const { return labels_; }
  int label(std::size_t n) const { return labels_[n]; }

  const Schema& schema() const { return *schema_; }
  std::shared_ptr<const Schema> schema_ptr() const { return schema_; }

  Sample subset(std::span<const std::size_t> rows) const {
    std::vector<double> values;
    values.reserve(rows.size() * cols_);
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (std::size_t n : rows) {
      auto r = row(n);
      values.insert(values.end(), r.begin(), r.end());
      labels.push_back(labels_.at(n));
    }
    return Sample(std::move(values), cols_, std::move(labels), schema_);
  }

 private:
  std::vector<double> values_;
  std::size_t cols_ = 0;
  std::vector<int> labels_;
  std::shared_ptr<const Schema> schema_;
};

// Features encoded against an existing schema; labels are present only when
// the label column was found in the input.
struct EncodedTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::optional<std::vector<int>> labels;

  std::span<const double> row(std::size_t n) const {
    return {values.data() + n * cols, cols};
  }
};

namespace csv {

using Record = std::vector<std::string>;

// RFC 4180 reader: comma separated, double-quote quoting with "" escapes,
// LF or CRLF record terminators, quoted fields may span lines.
inline std::vector<Record> parse(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<Record> records;
  Record record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) {
          throw DataError("dataset", "stray quote inside unquoted field on line " +
                                         std::to_string(line));
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw DataError("dataset", "unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();

  // Blank lines carry no data.
  std::erase_if(records, [](const Record& r) { return r.size() == 1 && r[0].empty(); });
  return records;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("dataset", "cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Quotes a field only when it contains a comma, quote or line break.
inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace csv

inline std::optional<double> parse_decimal(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

namespace detail {

inline std::size_t find_column(const csv::Record& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw DataError("dataset", "column '" + name + "' not found in header");
  }
  return static_cast<std::size_t>(it - header.begin());
}

inline void check_records(const std::vector<csv::Record>& records) {
  if (records.empty()) throw DataError("dataset", "missing header row");
  if (records.size() < 2) throw DataError("dataset", "no data rows");
  const std::size_t width = records.front().size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw DataError("dataset", "row " + std::to_string(r) + " has " +
                                     std::to_string(records[r].size()) + " fields, expected " +
                                     std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      if (records[r][c].empty()) {
        throw DataError("dataset", "missing value at row " + std::to_string(r) +
                                       ", column '" + records.front()[c] + "'");
      }
    }
  }
}

}  // namespace detail

// Infers the schema from the data and encodes it. A column is numeric iff all
// of its cells parse as decimals; every other column is one-hot encoded over
// all of its categories.
inline Sample parse_csv_sample(std::string_view text, const std::string& label_column,
                               const std::string& positive_label) {
  const auto records = csv::parse(text);
  detail::check_records(records);
  const auto& header = records.front();
  {
    std::set<std::string> seen;
    for (const auto& h : header) {
      if (!seen.insert(h).second) throw DataError("dataset", "duplicate column '" + h + "'");
    }
  }
  const std::size_t label_idx = detail::find_column(header, label_column);
  const std::size_t n_rows = records.size() - 1;

  std::vector<std::string> label_values;
  for (std::size_t r = 1; r <= n_rows; ++r) {
    const auto& v = records[r][label_idx];
    if (std::find(label_values.begin(), label_values.end(), v) == label_values.end()) {
      label_values.push_back(v);
    }
  }
  if (label_values.size() < 2) throw DataError("dataset", "label column is constant");
  if (label_values.size() > 2) throw DataError("dataset", "label column not binary");
  if (std::find(label_values.begin(), label_values.end(), positive_label) ==
      label_values.end()) {
    throw DataError("dataset", "positive label '" + positive_label +
                                   "' does not occur in column '" + label_column + "'");
  }

  auto schema = std::make_shared<Schema>();
  schema->label = {label_column, positive_label,
                   label_values[0] == positive_label ? label_values[1] : label_values[0]};

  // Per source column: index into the encoded matrix of its first column.
  std::vector<std::size_t> first_encoded(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_idx) continue;
    FeatureSpec spec{header[c], FeatureKind::kNumeric, {}};
    bool numeric = true;
    for (std::size_t r = 1; r <= n_rows && numeric; ++r) {
      numeric = parse_decimal(records[r][c]).has_value();
    }
    const std::size_t feature = schema->features.size();
    first_encoded[c] = schema->columns.size();
    if (numeric) {
      schema->columns.push_back({feature, std::nullopt});
    } else {
      spec.kind = FeatureKind::kCategorical;
      for (std::size_t r = 1; r <= n_rows; ++r) {
        const auto& v = records[r][c];
        if (std::find(spec.categories.begin(), spec.categories.end(), v) ==
            spec.categories.end()) {
          spec.categories.push_back(v);
        }
      }
      for (std::size_t k = 0; k < spec.categories.size(); ++k) {
        schema->columns.push_back({feature, k});
      }
    }
    schema->features.push_back(std::move(spec));
  }
  if (schema->columns.empty()) throw DataError("dataset", "no feature columns");

  const std::size_t d = schema->columns.size();
  std::vector<double> values(n_rows * d, 0.0);
  std::vector<int> labels(n_rows);
  std::size_t feature = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_idx) continue;
    const auto& spec = schema->features[feature++];
    for (std::size_t r = 1; r <= n_rows; ++r) {
      double* out = values.data() + (r - 1) * d + first_encoded[c];
      const auto& cell = records[r][c];
      if (spec.kind == FeatureKind::kNumeric) {
        *out = *parse_decimal(cell);
      } else {
        auto it = std::find(spec.categories.begin(), spec.categories.end(), cell);
        out[it - spec.categories.begin()] = 1.0;
      }
    }
  }
  for (std::size_t r = 1; r <= n_rows; ++r) {
    labels[r - 1] = records[r][label_idx] == positive_label ? 1 : -1;
  }
  return Sample(std::move(values), d, std::move(labels), std::move(schema));
}

inline Sample load_csv(const std::string& path, const std::string& label_column,
                       const std::string& positive_label) {
  return parse_csv_sample(csv::read_file(path), label_column, positive_label);
}

// Encodes rows against a fixed schema (e.g. the one stored in a model).
// Feature columns are matched by header name; the label column is optional.
// A category never seen during training encodes as an all-zero block.
inline EncodedTable parse_csv_with_schema(std::string_view text, const Schema& schema) {
  const auto records = csv::parse(text);
  detail::check_records(records);
  const auto& header = records.front();
  const std::size_t n_rows = records.size() - 1;

  EncodedTable table;
  table.rows = n_rows;
  table.cols = schema.num_columns();
  table.values.assign(n_rows * table.cols, 0.0);

  std::size_t encoded = 0;
  for (const auto& spec : schema.features) {
    auto it = std::find(header.begin(), header.end(), spec.name);
    if (it == header.end()) {
      throw DataError("dataset", "feature '" + spec.name + "' required by the model is missing");
    }
    const std::size_t c = static_cast<std::size_t>(it - header.begin());
    for (std::size_t r = 1; r <= n_rows; ++r) {
      double* out = table.values.data() + (r - 1) * table.cols + encoded;
      const auto& cell = records[r][c];
      if (spec.kind == FeatureKind::kNumeric) {
        auto v = parse_decimal(cell);
        if (!v) {
          throw DataError("dataset", "unparseable numeric cell '" + cell + "' at row " +
                                         std::to_string(r) + ", column '" + spec.name + "'");
        }
        *out = *v;
      } else {
        auto cat = std::find(spec.categories.begin(), spec.categories.end(), cell);
        if (cat != spec.categories.end()) out[cat - spec.categories.begin()] = 1.0;
      }
    }
    encoded += spec.kind == FeatureKind::kNumeric ? 1 : spec.categories.size();
  }

  auto label_it = std::find(header.begin(), header.end(), schema.label.column);
  if (label_it != header.end()) {
    const std::size_t c = static_cast<std::size_t>(label_it - header.begin());
    std::vector<int> labels(n_rows);
    for (std::size_t r = 1; r <= n_rows; ++r) {
      const auto& v = records[r][c];
      if (v == schema.label.positive) {
        labels[r - 1] = 1;
      } else if (v == schema.label.negative) {
        labels[r - 1] = -1;
      } else {
        throw DataError("dataset", "unknown label '" + v + "' at row " + std::to_string(r));
      }
    }
    table.labels = std::move(labels);
  }
  return table;
}

inline EncodedTable load_csv_with_schema(const std::string& path, const Schema& schema) {
  return parse_csv_with_schema(csv::read_file(path), schema);
}

struct Split {
  Sample train;
  Sample test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

namespace detail {

inline std::vector<std::size_t> shuffled_rows(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

inline Split make_split(const Sample& sample, std::vector<std::size_t> test_rows) {
  std::sort(test_rows.begin(), test_rows.end());
  std::vector<std::size_t> train_rows;
  train_rows.reserve(sample.rows() - test_rows.size());
  std::size_t t = 0;
  for (std::size_t n = 0; n < sample.rows(); ++n) {
    if (t < test_rows.size() && test_rows[t] == n) {
      ++t;
    } else {
      train_rows.push_back(n);
    }
  }
  Split split{sample.subset(train_rows), sample.subset(test_rows), std::move(train_rows),
              std::move(test_rows)};
  return split;
}

}  // namespace detail

// k folds over a seeded permutation; the first N mod k folds get one extra row.
inline std::vector<Split> kfold_split(const Sample& sample, std::size_t k, std::uint64_t seed) {
  const std::size_t n = sample.rows();
  if (k < 2) throw UsageError("dataset", "k-fold requires k >= 2");
  if (k > n) throw UsageError("dataset", "k-fold requires k <= number of rows");
  const auto perm = detail::shuffled_rows(n, seed);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::vector<Split> folds;
  folds.reserve(k);
  std::size_t offset = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(offset),
                                  perm.begin() + static_cast<std::ptrdiff_t>(offset + size));
    offset += size;
    folds.push_back(detail::make_split(sample, std::move(test)));
  }
  return folds;
}

// Test partition of ceil(N * test_fraction) rows.
inline Split holdout_split(const Sample& sample, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw UsageError("dataset", "test fraction must lie in (0, 1)");
  }
  const std::size_t n = sample.rows();
  // Guard against products such as 0.7 * 10 = 7.000000000000001.
  const auto n_test =
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * test_fraction - 1e-9));
  if (n_test == 0 || n_test >= n) {
    throw UsageError("dataset", "test fraction yields an empty partition");
  }
  auto perm = detail::shuffled_rows(n, seed);
  perm.resize(n_test);
  return detail::make_split(sample, std::move(perm));
}

}  // namespace lire
