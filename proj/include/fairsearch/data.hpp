#pragma once

// Tabular binary-classification datasets annotated with protected attributes:
// schema, privileged-group predicates, CSV ingestion, splitting, protected
// column exclusion and a synthetic biased-data generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairsearch/csv.hpp"
#include "fairsearch/error.hpp"
#include "fairsearch/random.hpp"
#include "json.hpp"

namespace fairsearch {

enum class ColumnKind { numeric, categorical };

inline std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

/// Category assigned to empty (or "?") categorical cells.
inline const std::string kMissingCategory = "⟨missing⟩";

inline bool is_missing_token(std::string_view cell) { return cell.empty() || cell == "?"; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// ---------------------------------------------------------------------------
// Privileged-group predicates

enum class CompareOp { equals, at_least, less_than };

struct Condition {
  std::string column;
  CompareOp op = CompareOp::equals;
  std::string value;  // as written
  double number = std::numeric_limits<double>::quiet_NaN();  // parsed when numeric
};

/// A conjunction of `col=value`, `col>=number` and `col<number` terms joined
/// by `AND`.
class Predicate {
 public:
  Predicate() = default;
  explicit Predicate(std::vector<Condition> conditions) : conditions_(std::move(conditions)) {}

  static Predicate parse(std::string_view text) {
    std::vector<Condition> conditions;
    std::string_view rest = text;
    while (true) {
      std::size_t cut = std::string_view::npos;
      std::size_t cut_len = 0;
      for (std::string_view sep : {" AND ", " and ", "&&"}) {
        auto pos = rest.find(sep);
        if (pos != std::string_view::npos && pos < cut) {
          cut = pos;
          cut_len = sep.size();
        }
      }
      conditions.push_back(parse_condition(trim(rest.substr(0, cut))));
      if (cut == std::string_view::npos) break;
      rest = rest.substr(cut + cut_len);
    }
    return Predicate(std::move(conditions));
  }

  const std::vector<Condition>& conditions() const noexcept { return conditions_; }

  std::vector<std::string> columns() const {
    std::vector<std::string> out;
    for (const auto& c : conditions_) {
      if (std::find(out.begin(), out.end(), c.column) == out.end()) out.push_back(c.column);
    }
    return out;
  }

  std::string to_string() const {
    std::string out;
    for (const auto& c : conditions_) {
      if (!out.empty()) out += " AND ";
      out += c.column;
      out += c.op == CompareOp::equals ? "=" : c.op == CompareOp::at_least ? ">=" : "<";
      out += c.value;
    }
    return out;
  }

 private:
  static Condition parse_condition(std::string_view term) {
    Condition c;
    // The leftmost operator wins so values may contain operator characters.
    struct Token {
      std::string_view text;
      CompareOp op;
    };
    static constexpr Token kTokens[] = {
        {">=", CompareOp::at_least}, {"≥", CompareOp::at_least}, {"<", CompareOp::less_than},
        {"=", CompareOp::equals}};
    std::size_t pos = std::string_view::npos;
    std::size_t len = 0;
    for (const auto& tok : kTokens) {
      const auto p = term.find(tok.text);
      if (p < pos) {
        pos = p;
        len = tok.text.size();
        c.op = tok.op;
      }
    }
    if (pos == std::string_view::npos) {
      throw SchemaError("malformed predicate term '" + std::string(term) + "'");
    }
    c.column = std::string(trim(term.substr(0, pos)));
    c.value = std::string(trim(term.substr(pos + len)));
    if (c.column.empty() || c.value.empty()) {
      throw SchemaError("malformed predicate term '" + std::string(term) + "'");
    }
    if (!csv::parse_double(c.value, c.number)) {
      if (c.op != CompareOp::equals) {
        throw SchemaError("predicate '" + std::string(term) + "' compares against a non-number");
      }
      c.number = std::numeric_limits<double>::quiet_NaN();
    }
    return c;
  }

  std::vector<Condition> conditions_;
};

struct ProtectedAttribute {
  std::string name;
  Predicate privileged;
};

// ---------------------------------------------------------------------------
// Schema

struct DatasetSchema {
  std::vector<ColumnSpec> columns;  // feature columns; the label is separate
  std::string label;
  std::string favorable;
  std::optional<std::string> unfavorable;
  std::vector<ProtectedAttribute> protected_attributes;

  const ColumnSpec* find(std::string_view name) const {
    for (const auto& c : columns) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }

  std::size_t attribute_index(std::string_view name) const {
    for (std::size_t i = 0; i < protected_attributes.size(); ++i) {
      if (protected_attributes[i].name == name) return i;
    }
    throw SchemaError("unknown protected attribute '" + std::string(name) + "'");
  }

  /// Every column referenced by any protected predicate.
  std::vector<std::string> protected_columns() const {
    std::vector<std::string> out;
    for (const auto& attr : protected_attributes) {
      for (auto& col : attr.privileged.columns()) {
        if (std::find(out.begin(), out.end(), col) == out.end()) out.push_back(col);
      }
    }
    return out;
  }

  void validate() const {
    if (label.empty()) throw SchemaError("schema has no label column");
    if (favorable.empty()) throw SchemaError("schema has no favorable label value");
    if (find(label)) throw SchemaError("label column '" + label + "' is also listed as a feature");
    std::set<std::string> seen;
    for (const auto& c : columns) {
      if (c.name.empty()) throw SchemaError("column with empty name");
      if (!seen.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
    }
    if (protected_attributes.empty()) throw SchemaError("schema declares no protected attribute");
    std::set<std::string> names;
    for (const auto& attr : protected_attributes) {
      if (!names.insert(attr.name).second) {
        throw SchemaError("duplicate protected attribute '" + attr.name + "'");
      }
      if (attr.privileged.conditions().empty()) {
        throw SchemaError("protected attribute '" + attr.name + "' has an empty predicate");
      }
      for (const auto& cond : attr.privileged.conditions()) {
        const ColumnSpec* col = find(cond.column);
        if (!col) {
          throw SchemaError("predicate of '" + attr.name + "' references missing column '" +
                            cond.column + "'");
        }
        if (col->kind == ColumnKind::numeric && std::isnan(cond.number)) {
          throw SchemaError("predicate of '" + attr.name + "' compares numeric column '" +
                            cond.column + "' against '" + cond.value + "'");
        }
        if (col->kind == ColumnKind::categorical && cond.op != CompareOp::equals) {
          throw SchemaError("ordered comparison on categorical column '" + cond.column + "'");
        }
      }
    }
  }

  static DatasetSchema from_json(const nlohmann::json& doc) {
    DatasetSchema s;
    try {
      for (const auto& c : doc.at("columns")) {
        ColumnSpec spec;
        spec.name = c.at("name").get<std::string>();
        const auto kind = c.value("kind", std::string("numeric"));
        if (kind == "numeric") {
          spec.kind = ColumnKind::numeric;
        } else if (kind == "categorical") {
          spec.kind = ColumnKind::categorical;
        } else {
          throw SchemaError("column '" + spec.name + "' has unknown kind '" + kind + "'");
        }
        s.columns.push_back(std::move(spec));
      }
      s.label = doc.at("label").get<std::string>();
      s.favorable = json_scalar(doc.at("favorable"));
      if (doc.contains("unfavorable")) s.unfavorable = json_scalar(doc.at("unfavorable"));
      for (const auto& p : doc.at("protected")) {
        s.protected_attributes.push_back(
            {p.at("name").get<std::string>(), Predicate::parse(p.at("predicate").get<std::string>())});
      }
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed schema document: ") + e.what());
    }
    s.validate();
    return s;
  }

  static DatasetSchema load(const std::string& path) {
    const std::string text = csv::read_file(path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path + ": " + e.what());
    }
    return from_json(doc);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["columns"] = nlohmann::ordered_json::array();
    for (const auto& c : columns) {
      doc["columns"].push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}});
    }
    doc["label"] = label;
    doc["favorable"] = favorable;
    if (unfavorable) doc["unfavorable"] = *unfavorable;
    doc["protected"] = nlohmann::ordered_json::array();
    for (const auto& p : protected_attributes) {
      doc["protected"].push_back({{"name", p.name}, {"predicate", p.privileged.to_string()}});
    }
    return doc;
  }

 private:
  static std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return csv::format_short(v.get<double>());
    throw SchemaError("label values must be scalars");
  }
};

// ---------------------------------------------------------------------------
// Dataset

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<double> numbers;        // numeric cells; NaN marks missing
  std::vector<std::string> category;  // categorical cells

  std::size_t size() const { return kind == ColumnKind::numeric ? numbers.size() : category.size(); }
};

/// 1 = favorable.
using Labels = std::vector<std::uint8_t>;
/// 1 = privileged.
using GroupVector = std::vector<std::uint8_t>;

inline bool holds(const Condition& cond, const Column& col, std::size_t row) {
  if (col.kind == ColumnKind::categorical) return col.category[row] == cond.value;
  const double x = col.numbers[row];
  switch (cond.op) {
    case CompareOp::equals: return x == cond.number;
    case CompareOp::at_least: return x >= cond.number;
    case CompareOp::less_than: return x < cond.number;
  }
  return false;
}

inline const Column* find_column(const std::vector<Column>& columns, std::string_view name) {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

/// Evaluates `predicate` on every row. NaN cells fail every comparison.
inline GroupVector evaluate(const Predicate& predicate, const std::vector<Column>& columns,
                            std::size_t rows) {
  GroupVector out(rows, 1);
  for (const auto& cond : predicate.conditions()) {
    const Column* col = find_column(columns, cond.column);
    if (!col) throw SchemaError("predicate references missing column '" + cond.column + "'");
    for (std::size_t r = 0; r < rows; ++r) {
      if (out[r] && !holds(cond, *col, r)) out[r] = 0;
    }
  }
  return out;
}

/// Immutable after construction; copies share the schema.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::shared_ptr<const DatasetSchema> schema, std::vector<Column> columns, Labels labels,
          std::vector<GroupVector> groups, std::vector<double> weights)
      : schema_(std::move(schema)),
        columns_(std::move(columns)),
        labels_(std::move(labels)),
        groups_(std::move(groups)),
        weights_(std::move(weights)) {
    const std::size_t n = labels_.size();
    for (const auto& c : columns_) {
      if (c.size() != n) throw DataError("column '" + c.name + "' has a different length");
    }
    if (weights_.size() != n) throw DataError("weight vector has a different length");
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("instance weights must be finite and >= 0");
    }
    if (groups_.size() != schema_->protected_attributes.size()) {
      throw DataError("one group vector per protected attribute is required");
    }
    for (const auto& g : groups_) {
      if (g.size() != n) throw DataError("group vector has a different length");
    }
  }

  /// Builds a dataset with groups evaluated from the schema predicates and
  /// unit weights.
  static Dataset from_columns(std::shared_ptr<const DatasetSchema> schema, std::vector<Column> columns,
                              Labels labels) {
    std::vector<GroupVector> groups;
    for (const auto& attr : schema->protected_attributes) {
      groups.push_back(evaluate(attr.privileged, columns, labels.size()));
    }
    std::vector<double> weights(labels.size(), 1.0);
    return Dataset(std::move(schema), std::move(columns), std::move(labels), std::move(groups),
                   std::move(weights));
  }

  const DatasetSchema& schema() const { return *schema_; }
  const std::shared_ptr<const DatasetSchema>& schema_ptr() const { return schema_; }
  std::size_t rows() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column* column(std::string_view name) const { return find_column(columns_, name); }
  const Labels& labels() const { return labels_; }
  const GroupVector& groups(std::size_t attribute) const { return groups_.at(attribute); }
  const std::vector<GroupVector>& all_groups() const { return groups_; }
  const std::vector<double>& weights() const { return weights_; }

  Dataset with_weights(std::vector<double> weights) const {
    return Dataset(schema_, columns_, labels_, groups_, std::move(weights));
  }

  /// Replaces the feature table; labels, groups and weights are kept.
  Dataset with_columns(std::vector<Column> columns) const {
    return Dataset(schema_, std::move(columns), labels_, groups_, weights_);
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) {
      Column out{c.name, c.kind, {}, {}};
      if (c.kind == ColumnKind::numeric) {
        out.numbers.reserve(rows.size());
        for (auto r : rows) out.numbers.push_back(c.numbers.at(r));
      } else {
        out.category.reserve(rows.size());
        for (auto r : rows) out.category.push_back(c.category.at(r));
      }
      cols.push_back(std::move(out));
    }
    Labels labels;
    std::vector<double> weights;
    for (auto r : rows) {
      labels.push_back(labels_.at(r));
      weights.push_back(weights_.at(r));
    }
    std::vector<GroupVector> groups;
    for (const auto& g : groups_) {
      GroupVector sub;
      for (auto r : rows) sub.push_back(g[r]);
      groups.push_back(std::move(sub));
    }
    return Dataset(schema_, std::move(cols), std::move(labels), std::move(groups), std::move(weights));
  }

 private:
  std::shared_ptr<const DatasetSchema> schema_ = std::make_shared<const DatasetSchema>();
  std::vector<Column> columns_;
  Labels labels_;
  std::vector<GroupVector> groups_;
  std::vector<double> weights_;
};

// ---------------------------------------------------------------------------
// Operations

/// Parses CSV text under `schema`. Rows with a missing label are dropped.
inline Dataset parse_dataset(std::string_view text, DatasetSchema schema) {
  schema.validate();
  auto records = csv::parse(text);
  if (records.empty()) throw SchemaError("CSV has no header row");
  const auto& header = records.front();

  auto index_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw SchemaError("CSV is missing column '" + name + "'");
  };

  const std::size_t label_idx = index_of(schema.label);
  std::vector<std::size_t> col_idx;
  for (const auto& c : schema.columns) col_idx.push_back(index_of(c.name));

  std::vector<Column> columns;
  for (const auto& c : schema.columns) columns.push_back({c.name, c.kind, {}, {}});
  Labels labels;
  std::optional<std::string> other_label = schema.unfavorable;

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    if (rec.size() != header.size()) {
      throw ParseError(r, "expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(rec.size()));
    }
    const std::string_view raw_label = trim(rec[label_idx]);
    if (is_missing_token(raw_label)) continue;
    std::uint8_t y;
    if (raw_label == schema.favorable) {
      y = 1;
    } else if (!other_label) {
      other_label = std::string(raw_label);
      y = 0;
    } else if (raw_label == *other_label) {
      y = 0;
    } else {
      throw LabelError("row " + std::to_string(r) + ": label value '" + std::string(raw_label) +
                       "' is neither '" + schema.favorable + "' nor '" + *other_label +
                       "'; labels must be binary");
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string_view cell = trim(rec[col_idx[c]]);
      if (columns[c].kind == ColumnKind::numeric) {
        double v;
        if (is_missing_token(cell)) {
          v = std::numeric_limits<double>::quiet_NaN();
        } else if (!csv::parse_double(cell, v)) {
          throw ParseError(r, "column '" + columns[c].name + "': cannot parse '" + std::string(cell) +
                                  "' as a number");
        }
        columns[c].numbers.push_back(v);
      } else {
        columns[c].category.push_back(is_missing_token(cell) ? kMissingCategory : std::string(cell));
      }
    }
    labels.push_back(y);
  }
  return Dataset::from_columns(std::make_shared<const DatasetSchema>(std::move(schema)),
                               std::move(columns), std::move(labels));
}

inline Dataset load_dataset(const std::string& csv_path, DatasetSchema schema) {
  return parse_dataset(csv::read_file(csv_path), std::move(schema));
}

/// Seeded shuffle, then the first round(test_fraction * n) shuffled rows form
/// the test set.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must lie strictly between 0 and 1");
  }
  if (ds.empty()) throw DataError("cannot split an empty dataset");
  std::vector<std::size_t> order(ds.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.rows())));
  std::span<const std::size_t> all(order);
  return {ds.subset(all.subspan(n_test)), ds.subset(all.first(n_test))};
}

/// Drops every column referenced by a protected predicate. Groups and labels
/// stay so fairness can still be measured.
inline Dataset exclude_protected(const Dataset& ds) {
  const auto drop = ds.schema().protected_columns();
  std::vector<Column> kept;
  for (const auto& c : ds.columns()) {
    if (std::find(drop.begin(), drop.end(), c.name) == drop.end()) kept.push_back(c);
  }
  return ds.with_columns(std::move(kept));
}

/// Schema of make_synthetic's output.
inline DatasetSchema synthetic_schema() {
  DatasetSchema s;
  s.columns = {{"x1", ColumnKind::numeric}, {"x2", ColumnKind::numeric}, {"group", ColumnKind::categorical}};
  s.label = "label";
  s.favorable = "1";
  s.unfavorable = "0";
  s.protected_attributes = {{"group", Predicate::parse("group=privileged")}};
  return s;
}

/// Two standard-normal features drive P(favorable) = sigmoid(2*x1 + x2). For
/// unprivileged rows a favorable label is then flipped to unfavorable with
/// probability `bias`.
inline Dataset make_synthetic(std::size_t n, double bias, std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("synthetic datasets need at least 10 rows");
  if (!(bias >= 0.0 && bias <= 1.0)) throw std::invalid_argument("bias must lie in [0, 1]");
  Rng rng(seed);
  Column x1{"x1", ColumnKind::numeric, {}, {}};
  Column x2{"x2", ColumnKind::numeric, {}, {}};
  Column group{"group", ColumnKind::categorical, {}, {}};
  Labels labels;
  for (std::size_t i = 0; i < n; ++i) {
    const bool privileged = rng.uniform() < 0.5;
    const double a = rng.normal();
    const double b = rng.normal();
    const double p = 1.0 / (1.0 + std::exp(-(2.0 * a + b)));
    bool favorable = rng.uniform() < p;
    const bool flip = rng.uniform() < bias;
    if (!privileged && favorable && flip) favorable = false;
    x1.numbers.push_back(a);
    x2.numbers.push_back(b);
    group.category.push_back(privileged ? "privileged" : "unprivileged");
    labels.push_back(favorable ? 1 : 0);
  }
  return Dataset::from_columns(std::make_shared<const DatasetSchema>(synthetic_schema()),
                               {std::move(x1), std::move(x2), std::move(group)}, std::move(labels));
}

/// Serializes the feature table and label back to CSV (17 significant digits).
inline std::string dataset_to_csv(const Dataset& ds) {
  const auto& schema = ds.schema();
  const std::string unfavorable = schema.unfavorable.value_or("not_" + schema.favorable);
  std::string out;
  csv::Record header;
  for (const auto& c : ds.columns()) header.push_back(c.name);
  header.push_back(schema.label);
  csv::append_record(out, header);
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    csv::Record rec;
    for (const auto& c : ds.columns()) {
      if (c.kind == ColumnKind::numeric) {
        rec.push_back(std::isnan(c.numbers[r]) ? std::string() : csv::format_double(c.numbers[r]));
      } else {
        rec.push_back(c.category[r] == kMissingCategory ? std::string() : c.category[r]);
      }
    }
    rec.push_back(ds.labels()[r] ? schema.favorable : unfavorable);
    csv::append_record(out, rec);
  }
  return out;
}

}  // namespace fairsearch
