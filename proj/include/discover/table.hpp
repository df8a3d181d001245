#pragma once

// Column-major typed table, CSV ingestion with schema inference, and
// deterministic train/holdout splitting.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "discover/error.hpp"
#include "discover/rng.hpp"

namespace discover {

enum class ColumnKind { numeric, categorical, binary };
enum class ColumnRole { feature, target, ignored };

inline std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::binary: return "binary";
  }
  return "?";
}

inline std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::feature: return "feature";
    case ColumnRole::target: return "target";
    case ColumnRole::ignored: return "ignored";
  }
  return "?";
}

inline ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "binary") return ColumnKind::binary;
  fail(ErrorKind::config, "unknown column kind '" + std::string(s) + "'");
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  ColumnRole role = ColumnRole::feature;

  bool operator==(const ColumnSchema&) const = default;
};

// One column. Numeric columns use `values`; categorical and binary columns use
// `codes` into `levels`. Missing cells have missing[i] == 1; their slot in
// `values` holds NaN and their code is 0.
struct Column {
  ColumnSchema schema;
  std::vector<double> values;
  std::vector<std::uint32_t> codes;
  std::vector<std::string> levels;
  std::vector<std::uint8_t> missing;

  bool is_numeric() const { return schema.kind == ColumnKind::numeric; }
  std::size_t size() const { return missing.size(); }
  bool is_missing(std::size_t row) const { return missing[row] != 0; }

  const std::string& level_of(std::size_t row) const { return levels[codes[row]]; }

  std::optional<std::uint32_t> find_level(std::string_view level) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i] == level) return static_cast<std::uint32_t>(i);
    return std::nullopt;
  }

  static Column numeric(std::string name, std::vector<double> data) {
    Column c;
    c.schema = {std::move(name), ColumnKind::numeric, ColumnRole::feature};
    c.missing.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(data[i])) {
        c.missing[i] = 1;
        data[i] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    c.values = std::move(data);
    return c;
  }

  // Builds a categorical column from labels; empty strings are missing.
  // Levels are sorted so codes do not depend on row order.
  static Column categorical(std::string name, const std::vector<std::string>& labels,
                            ColumnKind kind = ColumnKind::categorical) {
    Column c;
    c.schema = {std::move(name), kind, ColumnRole::feature};
    std::set<std::string> distinct;
    for (const auto& s : labels)
      if (!s.empty()) distinct.insert(s);
    c.levels.assign(distinct.begin(), distinct.end());
    c.codes.resize(labels.size());
    c.missing.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].empty()) {
        c.missing[i] = 1;
        continue;
      }
      auto it = std::lower_bound(c.levels.begin(), c.levels.end(), labels[i]);
      c.codes[i] = static_cast<std::uint32_t>(it - c.levels.begin());
    }
    return c;
  }
};

// Immutable after construction. row_ids carry each row's index in the source
// file so reports can point back at raw rows.
class Table {
 public:
  Table() = default;

  explicit Table(std::vector<Column> columns, std::vector<std::size_t> row_ids = {})
      : columns_(std::move(columns)), row_ids_(std::move(row_ids)) {
    rows_ = columns_.empty() ? row_ids_.size() : columns_.front().size();
    if (row_ids_.empty()) {
      row_ids_.resize(rows_);
      for (std::size_t i = 0; i < rows_; ++i) row_ids_[i] = i;
    }
    validate();
  }

  std::size_t row_count() const { return rows_; }
  std::size_t column_count() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  const std::vector<std::size_t>& row_ids() const { return row_ids_; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].schema.name == name) return i;
    return std::nullopt;
  }

  std::size_t index_of(std::string_view name) const {
    auto i = find(name);
    if (!i) fail(ErrorKind::schema, "no column named '" + std::string(name) + "'");
    return *i;
  }

  const Column& column(std::string_view name) const { return columns_[index_of(name)]; }

  std::optional<std::size_t> target_index() const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].schema.role == ColumnRole::target) return i;
    return std::nullopt;
  }

  const Column& target() const {
    auto i = target_index();
    if (!i) fail(ErrorKind::schema, "table has no target column");
    return columns_[*i];
  }

  std::vector<std::size_t> feature_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].schema.role == ColumnRole::feature) out.push_back(i);
    return out;
  }

  // Rows in the given order (duplicates allowed).
  Table take(std::span<const std::size_t> rows) const {
    std::vector<Column> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) {
      Column n;
      n.schema = c.schema;
      n.levels = c.levels;
      n.missing.reserve(rows.size());
      if (c.is_numeric()) {
        n.values.reserve(rows.size());
        for (auto r : rows) n.values.push_back(c.values.at(r));
      } else {
        n.codes.reserve(rows.size());
        for (auto r : rows) n.codes.push_back(c.codes.at(r));
      }
      for (auto r : rows) n.missing.push_back(c.missing[r]);
      out.push_back(std::move(n));
    }
    std::vector<std::size_t> ids;
    ids.reserve(rows.size());
    for (auto r : rows) ids.push_back(row_ids_.at(r));
    return Table(std::move(out), std::move(ids));
  }

  Table with_column(std::size_t index, Column replacement) const {
    auto cols = columns_;
    cols.at(index) = std::move(replacement);
    return Table(std::move(cols), row_ids_);
  }

  Table with_role(std::string_view name, ColumnRole role) const {
    auto cols = columns_;
    cols[index_of(name)].schema.role = role;
    return Table(std::move(cols), row_ids_);
  }

  // Marks `name` as the only target; any previous target becomes a feature.
  Table with_target(std::string_view name) const {
    auto cols = columns_;
    const auto t = index_of(name);
    for (auto& c : cols)
      if (c.schema.role == ColumnRole::target) c.schema.role = ColumnRole::feature;
    cols[t].schema.role = ColumnRole::target;
    return Table(std::move(cols), row_ids_);
  }

 private:
  void validate() const {
    std::unordered_set<std::string> names;
    int targets = 0;
    require(row_ids_.size() == rows_, ErrorKind::schema, "row id count differs from row count");
    for (const auto& c : columns_) {
      if (!names.insert(c.schema.name).second)
        fail(ErrorKind::schema, "duplicate column name '" + c.schema.name + "'");
      if (c.schema.role == ColumnRole::target) ++targets;
      if (c.missing.size() != rows_)
        fail(ErrorKind::schema, "column '" + c.schema.name + "' has wrong length");
      if (c.is_numeric()) {
        if (c.values.size() != rows_)
          fail(ErrorKind::schema, "column '" + c.schema.name + "' has wrong length");
      } else {
        if (c.codes.size() != rows_)
          fail(ErrorKind::schema, "column '" + c.schema.name + "' has wrong length");
        for (std::size_t i = 0; i < rows_; ++i)
          if (!c.missing[i] && c.codes[i] >= c.levels.size())
            fail(ErrorKind::schema, "column '" + c.schema.name + "' has out-of-range code");
      }
    }
    require(targets <= 1, ErrorKind::schema, "more than one target column");
  }

  std::vector<Column> columns_;
  std::vector<std::size_t> row_ids_;
  std::size_t rows_ = 0;
};

// Cell-wise equality: schemas, missing masks, and non-missing contents.
inline bool same_contents(const Table& a, const Table& b) {
  if (a.row_count() != b.row_count() || a.column_count() != b.column_count()) return false;
  for (std::size_t j = 0; j < a.column_count(); ++j) {
    const auto& x = a.column(j);
    const auto& y = b.column(j);
    if (!(x.schema == y.schema) || x.missing != y.missing) return false;
    for (std::size_t i = 0; i < a.row_count(); ++i) {
      if (x.missing[i]) continue;
      if (x.is_numeric()) {
        if (x.values[i] != y.values[i]) return false;
      } else if (x.level_of(i) != y.level_of(i)) {
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
  std::map<std::string, ColumnKind> kind_hints;
  std::vector<std::string> missing_tokens = {"", "NA", "NaN"};
  double numeric_threshold = 0.95;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// RFC-4180 records: comma separated, double-quote quoting with "" escapes,
// quoted fields may span lines. Unquoted fields are trimmed.
inline std::vector<std::vector<std::string>> parse_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  bool any = false;

  auto end_field = [&] {
    record.push_back(was_quoted ? field : std::string(trim(field)));
    field.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (trim(field).empty()) {
          field.clear();
          in_quotes = true;
          was_quoted = true;
        } else {
          field.push_back(ch);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        any = false;
        break;
      default:
        field.push_back(ch);
    }
  }
  if (in_quotes) fail(ErrorKind::data, "unterminated quoted field");
  if (any) end_record();
  return records;
}

inline ColumnKind infer_kind(const std::vector<std::string>& cells,
                             const std::vector<std::uint8_t>& missing, double threshold) {
  std::size_t present = 0;
  std::size_t parsed = 0;
  std::map<std::string_view, std::size_t> counts;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (missing[i]) continue;
    ++present;
    if (parse_real(cells[i])) ++parsed;
    ++counts[cells[i]];
  }
  if (present == 0) return ColumnKind::numeric;
  if (static_cast<double>(parsed) >= threshold * static_cast<double>(present))
    return ColumnKind::numeric;
  if (counts.size() == 2 &&
      std::all_of(counts.begin(), counts.end(), [](const auto& kv) { return kv.second >= 2; }))
    return ColumnKind::binary;
  return ColumnKind::categorical;
}

}  // namespace detail

inline Table parse_csv(std::string_view text, const CsvOptions& options = {}) {
  auto records = detail::parse_records(text);
  if (records.empty()) fail(ErrorKind::data, "CSV has no header");
  const auto header = records.front();
  const std::size_t width = header.size();
  const std::size_t rows = records.size() - 1;
  if (rows == 0) fail(ErrorKind::data, "CSV has no data rows");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width)
      fail(ErrorKind::data, "ragged CSV: record " + std::to_string(r) + " has " +
                                std::to_string(records[r].size()) + " fields, header has " +
                                std::to_string(width));
  }

  const std::unordered_set<std::string> missing_tokens(options.missing_tokens.begin(),
                                                       options.missing_tokens.end());
  std::vector<Column> columns;
  columns.reserve(width);
  for (std::size_t j = 0; j < width; ++j) {
    std::string name = header[j].empty() ? "column_" + std::to_string(j) : header[j];
    std::vector<std::string> cells(rows);
    std::vector<std::uint8_t> missing(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      cells[r] = std::move(records[r + 1][j]);
      missing[r] = missing_tokens.count(cells[r]) ? 1 : 0;
    }
    ColumnKind kind;
    if (auto hint = options.kind_hints.find(name); hint != options.kind_hints.end())
      kind = hint->second;
    else
      kind = detail::infer_kind(cells, missing, options.numeric_threshold);

    if (kind == ColumnKind::numeric) {
      std::vector<double> values(rows, std::numeric_limits<double>::quiet_NaN());
      for (std::size_t r = 0; r < rows; ++r) {
        if (missing[r]) continue;
        if (auto v = detail::parse_real(cells[r])) values[r] = *v;
      }
      auto col = Column::numeric(std::move(name), std::move(values));
      columns.push_back(std::move(col));
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        if (missing[r]) cells[r].clear();
      auto col = Column::categorical(std::move(name), cells, kind);
      if (kind == ColumnKind::binary && col.levels.size() > 2)
        fail(ErrorKind::schema, "column '" + col.schema.name + "' hinted binary but has " +
                                    std::to_string(col.levels.size()) + " levels");
      columns.push_back(std::move(col));
    }
  }
  return Table(std::move(columns));
}

inline Table read_csv(const std::string& path, const CsvOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

namespace detail {

inline std::string quote_if_needed(std::string_view s) {
  const bool needs = s.find_first_of(",\"\n\r") != std::string_view::npos ||
                     (!s.empty() && (s.front() == ' ' || s.back() == ' ' || s.front() == '\t' ||
                                     s.back() == '\t'));
  if (!needs) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline void write_csv(const Table& table, std::ostream& out) {
  for (std::size_t j = 0; j < table.column_count(); ++j) {
    if (j) out << ',';
    out << detail::quote_if_needed(table.column(j).schema.name);
  }
  out << '\n';
  for (std::size_t i = 0; i < table.row_count(); ++i) {
    for (std::size_t j = 0; j < table.column_count(); ++j) {
      if (j) out << ',';
      const auto& c = table.column(j);
      if (c.missing[i]) continue;
      if (c.is_numeric()) out << detail::format_real(c.values[i]);
      else out << detail::quote_if_needed(c.level_of(i));
    }
    out << '\n';
  }
}

inline std::string to_csv(const Table& table) {
  std::ostringstream out;
  write_csv(table, out);
  return out.str();
}

// Keeps the first row of every group of rows whose feature cells are
// identical (missing compares equal to missing). Ignored and target columns
// do not take part in the comparison.
inline std::vector<std::size_t> first_of_duplicate_features(const Table& table) {
  const auto features = table.feature_indices();
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<std::size_t> keep;
  std::string key;
  for (std::size_t i = 0; i < table.row_count(); ++i) {
    key.clear();
    for (auto j : features) {
      const auto& c = table.column(j);
      if (c.missing[i]) key += "\x01";
      else if (c.is_numeric()) key += detail::format_real(c.values[i]);
      else key += c.level_of(i);
      key += '\x1f';
    }
    if (seen.emplace(key, i).second) keep.push_back(i);
  }
  return keep;
}

inline Table drop_duplicate_features(const Table& table) {
  const auto keep = first_of_duplicate_features(table);
  return table.take(keep);
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double holdout_fraction = 0.2;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct Partition {
  Table train;
  Table holdout;
};

namespace detail {

// Stratum per row: target class for categorical/binary targets (and numeric
// targets with exactly two distinct values); missing targets form their own
// stratum. Returns an empty vector when stratification does not apply.
inline std::vector<std::int64_t> strata_of(const Table& table) {
  auto t = table.target_index();
  if (!t) return {};
  const auto& c = table.column(*t);
  std::vector<std::int64_t> strata(table.row_count(), -1);
  if (!c.is_numeric()) {
    for (std::size_t i = 0; i < strata.size(); ++i)
      if (!c.missing[i]) strata[i] = c.codes[i];
    return strata;
  }
  std::set<double> distinct;
  for (std::size_t i = 0; i < strata.size(); ++i)
    if (!c.missing[i]) distinct.insert(c.values[i]);
  if (distinct.size() != 2) return {};
  for (std::size_t i = 0; i < strata.size(); ++i)
    if (!c.missing[i]) strata[i] = c.values[i] == *distinct.begin() ? 0 : 1;
  return strata;
}

inline std::size_t rounded_share(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

}  // namespace detail

// Holdout row indices (ascending) for `table` under `spec`.
inline std::vector<std::size_t> holdout_rows(const Table& table, const SplitSpec& spec) {
  require(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0, ErrorKind::invalid_argument,
          "holdout_fraction must lie in (0, 1)");
  const std::size_t n = table.row_count();
  require(n >= 5, ErrorKind::data, "split needs at least 5 rows");

  Rng rng(spec.seed);
  std::vector<std::size_t> holdout;
  const auto strata = spec.stratified ? detail::strata_of(table) : std::vector<std::int64_t>{};
  if (strata.empty()) {
    const std::size_t h = detail::rounded_share(n, spec.holdout_fraction);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(std::span<std::size_t>(order), rng);
    holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(h, n)));
  } else {
    std::map<std::int64_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[strata[i]].push_back(i);
    for (auto& [key, members] : groups) {
      const std::size_t size = members.size();
      std::size_t h = detail::rounded_share(size, spec.holdout_fraction);
      if (size >= 2) h = std::clamp<std::size_t>(h, 1, size - 1);
      else h = 0;
      shuffle(std::span<std::size_t>(members), rng);
      holdout.insert(holdout.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(h));
    }
  }
  if (holdout.empty() || holdout.size() >= n)
    fail(ErrorKind::invalid_argument, "holdout_fraction leaves an empty partition");
  std::sort(holdout.begin(), holdout.end());
  return holdout;
}

inline Partition split_by_holdout(const Table& table, const std::vector<std::size_t>& holdout) {
  std::vector<std::uint8_t> in_holdout(table.row_count(), 0);
  for (auto r : holdout) in_holdout.at(r) = 1;
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < table.row_count(); ++i)
    if (!in_holdout[i]) train.push_back(i);
  return {table.take(train), table.take(holdout)};
}

inline Partition split(const Table& table, const SplitSpec& spec) {
  return split_by_holdout(table, holdout_rows(table, spec));
}

}  // namespace discover
