#pragma once

// Pareto dominance over canonical (higher-is-better) metric scores.

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fairsearch/error.hpp"
#include "fairsearch/results.hpp"

namespace fairsearch {

/// a >= b everywhere and a > b somewhere.
inline bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("points differ in dimension");
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

/// Indices (ascending) of the points no other point dominates.
///
/// Points are visited in descending lexicographic order. A dominator always
/// sorts before what it dominates, and by transitivity some frontier member
/// dominates any dominated point, so each point is only tested against the
/// frontier collected so far. Exact duplicates never dominate each other and
/// are all kept.
inline std::vector<std::size_t> pareto_indices(std::span<const std::vector<double>> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = points[a];
    const auto& pb = points[b];
    if (pa != pb) return std::lexicographical_compare(pb.begin(), pb.end(), pa.begin(), pa.end());
    return a < b;
  });
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    const bool dominated = std::any_of(front.begin(), front.end(),
                                       [&](std::size_t f) { return dominates(points[f], points[i]); });
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end());
  return front;
}

/// Contract: every metric in `metrics` is defined on both models.
inline bool dominates(const EvaluatedModel& a, const EvaluatedModel& b, std::span<const MetricId> metrics) {
  std::vector<double> pa;
  std::vector<double> pb;
  for (MetricId id : metrics) {
    const auto sa = a.score(id);
    const auto sb = b.score(id);
    if (!sa || !sb) {
      throw std::invalid_argument("dominance needs " + std::string(to_string(id)) + " defined on both models");
    }
    pa.push_back(*sa);
    pb.push_back(*sb);
  }
  return dominates(pa, pb);
}

struct FrontierResult {
  std::vector<std::size_t> frontier;  // config ids, ascending
  std::vector<std::size_t> excluded;  // failed or with an undefined requested metric
};

/// Models dominated by no other over `metrics`. Failed models and models
/// with an undefined requested metric are excluded and reported.
inline FrontierResult pareto_front(std::span<const MetricId> metrics, std::span<const EvaluatedModel> candidates) {
  if (metrics.size() < 2) throw std::invalid_argument("a frontier needs at least two metrics");
  FrontierResult result;
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> ids;
  for (const auto& c : candidates) {
    std::vector<double> p;
    for (MetricId id : metrics) {
      const auto s = c.score(id);
      if (!s) break;
      p.push_back(*s);
    }
    if (p.size() != metrics.size()) {
      result.excluded.push_back(c.config.config_id);
      continue;
    }
    points.push_back(std::move(p));
    ids.push_back(c.config.config_id);
  }
  if (points.empty()) throw FrontierError("no candidate has every requested metric defined");
  for (std::size_t i : pareto_indices(points)) result.frontier.push_back(ids[i]);
  std::sort(result.frontier.begin(), result.frontier.end());
  std::sort(result.excluded.begin(), result.excluded.end());
  return result;
}

}  // namespace fairsearch
