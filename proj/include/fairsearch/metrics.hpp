#pragma once

// Quality and group-fairness metrics. Every metric reports a raw value in its
// natural units plus a canonical score in [0, 1] where higher is better; a
// metric whose denominator vanishes is reported as undefined rather than as
// NaN or infinity.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairsearch/data.hpp"
#include "fairsearch/encoding.hpp"
#include "fairsearch/error.hpp"
#include "fairsearch/learners.hpp"

namespace fairsearch {

enum class MetricId {
  accuracy,
  precision,
  recall,
  f1,
  disparate_impact,
  statistical_parity,
  equal_opportunity,
  predictive_equality,
  average_odds,
  treatment_equality,
  conditional_use_accuracy,
  overall_accuracy_equality,
  representation_disparity,
  causal_flip,
  consistency,
};

inline constexpr std::array kAllMetrics = {
    MetricId::accuracy,          MetricId::precision,
    MetricId::recall,            MetricId::f1,
    MetricId::disparate_impact,  MetricId::statistical_parity,
    MetricId::equal_opportunity, MetricId::predictive_equality,
    MetricId::average_odds,      MetricId::treatment_equality,
    MetricId::conditional_use_accuracy, MetricId::overall_accuracy_equality,
    MetricId::representation_disparity, MetricId::causal_flip,
    MetricId::consistency,
};

/// Group metrics computed from a GroupConfusion.
inline constexpr std::array kGroupMetrics = {
    MetricId::disparate_impact,         MetricId::statistical_parity,        MetricId::equal_opportunity,
    MetricId::predictive_equality,      MetricId::average_odds,              MetricId::treatment_equality,
    MetricId::conditional_use_accuracy, MetricId::overall_accuracy_equality, MetricId::representation_disparity,
};

inline std::string_view to_string(MetricId id) {
  switch (id) {
    case MetricId::accuracy: return "accuracy";
    case MetricId::precision: return "precision";
    case MetricId::recall: return "recall";
    case MetricId::f1: return "f1";
    case MetricId::disparate_impact: return "disparate_impact";
    case MetricId::statistical_parity: return "statistical_parity";
    case MetricId::equal_opportunity: return "equal_opportunity";
    case MetricId::predictive_equality: return "predictive_equality";
    case MetricId::average_odds: return "average_odds";
    case MetricId::treatment_equality: return "treatment_equality";
    case MetricId::conditional_use_accuracy: return "conditional_use_accuracy";
    case MetricId::overall_accuracy_equality: return "overall_accuracy_equality";
    case MetricId::representation_disparity: return "representation_disparity";
    case MetricId::causal_flip: return "causal_flip";
    case MetricId::consistency: return "consistency";
  }
  return "?";
}

inline MetricId parse_metric(std::string_view s) {
  for (MetricId id : kAllMetrics) {
    if (to_string(id) == s) return id;
  }
  throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

inline std::string_view display_name(MetricId id) {
  switch (id) {
    case MetricId::accuracy: return "Accuracy";
    case MetricId::precision: return "Precision";
    case MetricId::recall: return "Recall";
    case MetricId::f1: return "F1";
    case MetricId::disparate_impact: return "Disparate impact";
    case MetricId::statistical_parity: return "Statistical parity difference";
    case MetricId::equal_opportunity: return "Equal opportunity difference";
    case MetricId::predictive_equality: return "Predictive equality difference";
    case MetricId::average_odds: return "Average odds difference";
    case MetricId::treatment_equality: return "Treatment equality difference";
    case MetricId::conditional_use_accuracy: return "Conditional use accuracy difference";
    case MetricId::overall_accuracy_equality: return "Overall accuracy equality difference";
    case MetricId::representation_disparity: return "Representation disparity";
    case MetricId::causal_flip: return "Causal flip rate";
    case MetricId::consistency: return "Consistency";
  }
  return "?";
}

/// How the raw value reads; the canonical score is always higher-is-better.
inline std::string_view orientation(MetricId id) {
  switch (id) {
    case MetricId::accuracy:
    case MetricId::precision:
    case MetricId::recall:
    case MetricId::f1:
    case MetricId::consistency: return "raw in [0,1], higher is better; score = raw";
    case MetricId::disparate_impact: return "raw ratio, 1 is ideal; score = min(raw, 1/raw)";
    case MetricId::representation_disparity: return "raw max group error, lower is better; score = 1 - raw";
    case MetricId::causal_flip: return "raw flip fraction, lower is better; score = 1 - raw";
    default: return "raw unprivileged minus privileged, 0 is ideal; score = clamp(1 - |raw|, 0, 1)";
  }
}

inline bool is_group_metric(MetricId id) {
  return std::find(kGroupMetrics.begin(), kGroupMetrics.end(), id) != kGroupMetrics.end();
}

inline bool is_quality_metric(MetricId id) {
  return id == MetricId::accuracy || id == MetricId::precision || id == MetricId::recall || id == MetricId::f1;
}

/// Maps a defined raw value to [0, 1], higher is better.
inline double canonical_score(MetricId id, double raw) {
  switch (id) {
    case MetricId::accuracy:
    case MetricId::precision:
    case MetricId::recall:
    case MetricId::f1:
    case MetricId::consistency: return std::clamp(raw, 0.0, 1.0);
    case MetricId::disparate_impact:
      if (raw <= 0.0) return 0.0;
      return std::min(raw, 1.0 / raw);
    case MetricId::representation_disparity:
    case MetricId::causal_flip: return std::clamp(1.0 - raw, 0.0, 1.0);
    default: return std::clamp(1.0 - std::fabs(raw), 0.0, 1.0);
  }
}

struct MetricValue {
  MetricId id = MetricId::accuracy;
  std::optional<double> raw;
  std::optional<double> score;

  bool defined() const { return raw.has_value(); }

  static MetricValue undefined(MetricId id) { return {id, std::nullopt, std::nullopt}; }
  static MetricValue of(MetricId id, double raw) { return {id, raw, canonical_score(id, raw)}; }

  bool operator==(const MetricValue&) const = default;
};

// ---------------------------------------------------------------------------
// Confusion statistics

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t n() const { return tp + fp + tn + fn; }

  static std::optional<double> ratio(std::int64_t num, std::int64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  }

  std::optional<double> selection_rate() const { return ratio(tp + fp, n()); }
  std::optional<double> tpr() const { return ratio(tp, tp + fn); }
  std::optional<double> fpr() const { return ratio(fp, fp + tn); }
  std::optional<double> fnr() const {
    auto r = tpr();
    return r ? std::optional<double>(1.0 - *r) : std::nullopt;
  }
  std::optional<double> precision() const { return ratio(tp, tp + fp); }
  std::optional<double> accuracy() const { return ratio(tp + tn, n()); }
  std::optional<double> error() const { return ratio(fp + fn, n()); }

  bool operator==(const ConfusionCounts&) const = default;
};

struct GroupConfusion {
  ConfusionCounts privileged;
  ConfusionCounts unprivileged;

  GroupConfusion swapped() const { return {unprivileged, privileged}; }

  bool operator==(const GroupConfusion&) const = default;
};

inline ConfusionCounts confusion(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> labels) {
  if (decisions.size() != labels.size()) throw std::invalid_argument("decisions and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i]) {
      labels[i] ? ++c.tp : ++c.fp;
    } else {
      labels[i] ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

inline GroupConfusion group_confusion(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> labels,
                                      std::span<const std::uint8_t> groups) {
  if (decisions.size() != labels.size() || decisions.size() != groups.size()) {
    throw std::invalid_argument("decisions, labels and groups differ in length");
  }
  GroupConfusion gc;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    auto& c = groups[i] ? gc.privileged : gc.unprivileged;
    if (decisions[i]) {
      labels[i] ? ++c.tp : ++c.fp;
    } else {
      labels[i] ? ++c.fn : ++c.tn;
    }
  }
  if (gc.privileged.n() == 0) throw MetricError("privileged group is empty");
  if (gc.unprivileged.n() == 0) throw MetricError("unprivileged group is empty");
  return gc;
}

namespace detail {

inline MetricValue difference(MetricId id, std::optional<double> u, std::optional<double> p) {
  if (!u || !p) return MetricValue::undefined(id);
  return MetricValue::of(id, *u - *p);
}

}  // namespace detail

/// Signed differences are unprivileged minus privileged.
inline MetricValue fairness_metric(MetricId id, const GroupConfusion& gc) {
  const auto& p = gc.privileged;
  const auto& u = gc.unprivileged;
  if (p.n() == 0 || u.n() == 0) throw MetricError("group confusion has an empty group");
  switch (id) {
    case MetricId::disparate_impact: {
      const auto sr_u = u.selection_rate();
      const auto sr_p = p.selection_rate();
      if (*sr_p == 0.0) return MetricValue::undefined(id);
      if (*sr_u == 0.0) return MetricValue::of(id, 0.0);
      // A ratio below one is stored as the reciprocal of its inverse, so
      // swapping the groups yields exactly 1.0 / raw.
      const double raw = *sr_u >= *sr_p ? *sr_u / *sr_p : 1.0 / (*sr_p / *sr_u);
      return MetricValue::of(id, raw);
    }
    case MetricId::statistical_parity: return detail::difference(id, u.selection_rate(), p.selection_rate());
    case MetricId::equal_opportunity: return detail::difference(id, u.tpr(), p.tpr());
    case MetricId::predictive_equality: return detail::difference(id, u.fpr(), p.fpr());
    case MetricId::average_odds: {
      const auto ped = detail::difference(id, u.fpr(), p.fpr());
      const auto eod = detail::difference(id, u.tpr(), p.tpr());
      if (!ped.defined() || !eod.defined()) return MetricValue::undefined(id);
      return MetricValue::of(id, 0.5 * (*ped.raw + *eod.raw));
    }
    case MetricId::treatment_equality:
      return detail::difference(id, ConfusionCounts::ratio(u.fp, u.fn), ConfusionCounts::ratio(p.fp, p.fn));
    case MetricId::conditional_use_accuracy: return detail::difference(id, u.precision(), p.precision());
    case MetricId::overall_accuracy_equality: return detail::difference(id, u.accuracy(), p.accuracy());
    case MetricId::representation_disparity: return MetricValue::of(id, std::max(*p.error(), *u.error()));
    default: throw std::invalid_argument("metric " + std::string(to_string(id)) + " is not a group metric");
  }
}

inline MetricValue quality_metric(MetricId id, const ConfusionCounts& c) {
  switch (id) {
    case MetricId::accuracy: {
      auto a = c.accuracy();
      return a ? MetricValue::of(id, *a) : MetricValue::undefined(id);
    }
    case MetricId::precision: {
      auto v = c.precision();
      return v ? MetricValue::of(id, *v) : MetricValue::undefined(id);
    }
    case MetricId::recall: {
      auto v = c.tpr();
      return v ? MetricValue::of(id, *v) : MetricValue::undefined(id);
    }
    case MetricId::f1: {
      auto v = ConfusionCounts::ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
      return v ? MetricValue::of(id, *v) : MetricValue::undefined(id);
    }
    default: throw std::invalid_argument("metric " + std::string(to_string(id)) + " is not a quality metric");
  }
}

/// Accuracy, precision, recall and f1, favorable = positive.
inline std::vector<MetricValue> quality_metrics(std::span<const std::uint8_t> decisions,
                                                std::span<const std::uint8_t> labels) {
  if (decisions.empty()) throw std::invalid_argument("quality metrics need at least one row");
  const auto c = confusion(decisions, labels);
  return {quality_metric(MetricId::accuracy, c), quality_metric(MetricId::precision, c),
          quality_metric(MetricId::recall, c), quality_metric(MetricId::f1, c)};
}

// ---------------------------------------------------------------------------
// Counterfactual flips

/// Copy of `ds` with every column of `predicate` pushed to the other side of
/// its condition: categorical `col=v` swaps v with the first other observed
/// category; numeric comparisons move to one unit past the boundary. Group
/// vectors are re-evaluated on the flipped columns.
inline Dataset flip_protected(const Dataset& ds, const Predicate& predicate, const Encoder* encoder = nullptr) {
  std::vector<Column> cols = ds.columns();
  for (const auto& cond : predicate.conditions()) {
    Column* col = nullptr;
    for (auto& c : cols) {
      if (c.name == cond.column) col = &c;
    }
    if (!col) throw MetricError("cannot flip '" + cond.column + "': column not in the raw table");
    if (col->kind == ColumnKind::categorical) {
      if (cond.op != CompareOp::equals) throw MetricError("cannot flip ordered comparison on '" + cond.column + "'");
      std::set<std::string> observed(col->category.begin(), col->category.end());
      if (encoder) {
        for (const auto& src : encoder->sources()) {
          if (src.name == cond.column) observed.insert(src.categories.begin(), src.categories.end());
        }
      }
      observed.erase(cond.value);
      if (observed.empty()) {
        throw MetricError("cannot flip '" + cond.column + "': it has no value other than '" + cond.value + "'");
      }
      const std::string other = *observed.begin();
      for (auto& cell : col->category) cell = cell == cond.value ? other : cond.value;
    } else {
      const double c = cond.number;
      for (auto& x : col->numbers) {
        switch (cond.op) {
          case CompareOp::equals: x = x == c ? c + 1.0 : c; break;
          case CompareOp::at_least: x = x >= c ? c - 1.0 : c + 1.0; break;
          case CompareOp::less_than: x = x < c ? c + 1.0 : c - 1.0; break;
        }
      }
    }
  }
  std::vector<GroupVector> groups;
  for (const auto& attr : ds.schema().protected_attributes) {
    groups.push_back(evaluate(attr.privileged, cols, ds.rows()));
  }
  return Dataset(ds.schema_ptr(), std::move(cols), ds.labels(), std::move(groups), ds.weights());
}

/// Fraction of rows whose thresholded model decision changes when the
/// attribute's predicate columns are flipped and the row re-encoded.
inline MetricValue causal_flip_rate(const Model& model, const Dataset& ds, const Encoder& encoder,
                                    std::size_t attribute, double threshold) {
  if (ds.empty()) return MetricValue::undefined(MetricId::causal_flip);
  const auto& predicate = ds.schema().protected_attributes.at(attribute).privileged;
  const Dataset flipped = flip_protected(ds, predicate, &encoder);
  const auto before = decide(model.predict(encoder.apply(ds)), threshold);
  const auto after = decide(model.predict(encoder.apply(flipped)), threshold);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) changed += before[i] != after[i];
  return MetricValue::of(MetricId::causal_flip, static_cast<double>(changed) / static_cast<double>(before.size()));
}

// ---------------------------------------------------------------------------
// Consistency

using NeighborLists = std::vector<std::vector<std::uint32_t>>;

/// k nearest Euclidean neighbors of each row, excluding itself; equal
/// distances resolve to the lower row index.
inline NeighborLists nearest_neighbors(const EncodedMatrix& x, std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (x.rows <= k) throw std::invalid_argument("consistency needs more than k rows");
  NeighborLists out(x.rows);
  std::vector<std::pair<double, std::uint32_t>> dist;
  dist.reserve(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    dist.clear();
    const auto a = x.row(i);
    for (std::size_t j = 0; j < x.rows; ++j) {
      if (j == i) continue;
      const auto b = x.row(j);
      double d = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
      dist.emplace_back(d, static_cast<std::uint32_t>(j));
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    out[i].reserve(k);
    for (std::size_t m = 0; m < k; ++m) out[i].push_back(dist[m].second);
  }
  return out;
}

inline MetricValue consistency(std::span<const double> scores, const NeighborLists& neighbors) {
  if (scores.size() != neighbors.size()) throw std::invalid_argument("scores and neighbor lists differ in length");
  if (scores.empty()) return MetricValue::undefined(MetricId::consistency);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double mean = 0.0;
    for (auto j : neighbors[i]) mean += scores[j];
    mean /= static_cast<double>(neighbors[i].size());
    total += std::fabs(scores[i] - mean);
  }
  return MetricValue::of(MetricId::consistency, 1.0 - total / static_cast<double>(scores.size()));
}

/// 1 - mean |s_i - mean score of i's k nearest neighbors|.
inline MetricValue consistency(std::span<const double> scores, const EncodedMatrix& x, std::size_t k) {
  if (scores.size() != x.rows) throw std::invalid_argument("scores and features differ in length");
  return consistency(scores, nearest_neighbors(x, k));
}

}  // namespace fairsearch
