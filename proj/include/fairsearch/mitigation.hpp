#pragma once

// Bias mitigation slots of a pipeline: reweighing before training and
// per-group decision thresholds after scoring.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairsearch/data.hpp"
#include "fairsearch/error.hpp"

namespace fairsearch {

enum class Preprocessor { none, reweigh };

enum class RateTarget { selection_rate, true_positive_rate };

struct Postprocessor {
  enum class Kind { none, group_threshold };
  Kind kind = Kind::none;
  RateTarget target = RateTarget::selection_rate;

  bool operator==(const Postprocessor&) const = default;
};

inline std::string to_string(Preprocessor p) { return p == Preprocessor::none ? "none" : "reweigh"; }

inline Preprocessor parse_preprocessor(std::string_view s) {
  if (s == "none") return Preprocessor::none;
  if (s == "reweigh") return Preprocessor::reweigh;
  throw std::invalid_argument("unknown preprocessor '" + std::string(s) + "'");
}

inline std::string to_string(const Postprocessor& p) {
  if (p.kind == Postprocessor::Kind::none) return "none";
  return p.target == RateTarget::selection_rate ? "group_threshold:selection_rate"
                                                : "group_threshold:true_positive_rate";
}

inline Postprocessor parse_postprocessor(std::string_view s) {
  if (s == "none") return {};
  if (s == "group_threshold:selection_rate") return {Postprocessor::Kind::group_threshold, RateTarget::selection_rate};
  if (s == "group_threshold:true_positive_rate") {
    return {Postprocessor::Kind::group_threshold, RateTarget::true_positive_rate};
  }
  throw std::invalid_argument("unknown postprocessor '" + std::string(s) + "'");
}

/// Weight for every instance in cell (g, y): P(g) P(y) / P(g, y), from
/// counts. Afterwards group and label are independent under the weights.
inline std::vector<double> reweigh(std::span<const std::uint8_t> groups, std::span<const std::uint8_t> labels) {
  if (groups.size() != labels.size()) throw std::invalid_argument("groups and labels differ in length");
  double cell[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < groups.size(); ++i) cell[groups[i] ? 1 : 0][labels[i] ? 1 : 0] += 1;
  const double n_group[2] = {cell[0][0] + cell[0][1], cell[1][0] + cell[1][1]};
  const double n_label[2] = {cell[0][0] + cell[1][0], cell[0][1] + cell[1][1]};
  if (n_group[1] == 0) throw MitigationError("reweighing: privileged group is empty");
  if (n_group[0] == 0) throw MitigationError("reweighing: unprivileged group is empty");
  const double n = static_cast<double>(groups.size());
  double weight[2][2] = {{0, 0}, {0, 0}};
  for (int g = 0; g < 2; ++g) {
    for (int y = 0; y < 2; ++y) {
      if (cell[g][y] > 0) weight[g][y] = (n_group[g] * n_label[y]) / (n * cell[g][y]);
    }
  }
  std::vector<double> out(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) out[i] = weight[groups[i] ? 1 : 0][labels[i] ? 1 : 0];
  return out;
}

inline std::vector<double> reweigh(const Dataset& train, std::size_t attribute) {
  return reweigh(train.groups(attribute), train.labels());
}

struct GroupThresholdResult {
  double privileged_threshold = 0.0;
  double unprivileged_threshold = 0.0;
  double base_gap = 0.0;      // |rate_u - rate_p| with one shared threshold
  double achieved_gap = 0.0;  // with the chosen unprivileged threshold
  std::vector<std::uint8_t> decisions;
};

/// Decisions with a separate threshold per group.
inline std::vector<std::uint8_t> apply_group_thresholds(std::span<const double> scores,
                                                        std::span<const std::uint8_t> groups,
                                                        double privileged_threshold, double unprivileged_threshold) {
  std::vector<std::uint8_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = scores[i] >= (groups[i] ? privileged_threshold : unprivileged_threshold) ? 1 : 0;
  }
  return out;
}

/// Keeps `base_threshold` for the privileged group and picks the
/// unprivileged threshold minimizing the target-rate gap. Candidates are the
/// observed unprivileged scores plus the base threshold itself; ties go to
/// the candidate closest to the base, then to the larger one.
inline GroupThresholdResult group_threshold(std::span<const double> scores, std::span<const std::uint8_t> groups,
                                            double base_threshold, RateTarget target,
                                            std::optional<std::span<const std::uint8_t>> labels = std::nullopt) {
  if (scores.size() != groups.size()) throw std::invalid_argument("scores and groups differ in length");
  if (target == RateTarget::true_positive_rate && (!labels || labels->size() != scores.size())) {
    throw std::invalid_argument("true-positive-rate target requires labels of matching length");
  }
  if (!(base_threshold >= 0.0 && base_threshold <= 1.0)) {
    throw std::invalid_argument("threshold must lie in [0, 1]");
  }
  const bool tpr = target == RateTarget::true_positive_rate;
  auto counts = [&](std::size_t i) { return !tpr || (*labels)[i] != 0; };

  // Privileged rate at the base threshold; unprivileged scores that count.
  double priv_den = 0.0;
  double priv_num = 0.0;
  std::size_t n_priv = 0;
  std::size_t n_unpriv = 0;
  std::vector<double> unpriv;  // scores in the rate denominator
  std::vector<double> unpriv_all;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (groups[i]) {
      ++n_priv;
      if (counts(i)) {
        priv_den += 1;
        if (scores[i] >= base_threshold) priv_num += 1;
      }
    } else {
      ++n_unpriv;
      unpriv_all.push_back(scores[i]);
      if (counts(i)) unpriv.push_back(scores[i]);
    }
  }
  if (n_priv == 0) throw MitigationError("group thresholding: privileged group is empty");
  if (n_unpriv == 0) throw MitigationError("group thresholding: unprivileged group is empty");
  if (priv_den == 0 || unpriv.empty()) {
    throw MitigationError("group thresholding: a group has no favorable labels, true positive rate undefined");
  }
  const double rate_p = priv_num / priv_den;
  const double unpriv_den = static_cast<double>(unpriv.size());
  std::sort(unpriv.begin(), unpriv.end());

  auto gap_at = [&](double t) {
    const auto selected = static_cast<double>(unpriv.end() - std::lower_bound(unpriv.begin(), unpriv.end(), t));
    return std::fabs(selected / unpriv_den - rate_p);
  };

  std::vector<double> candidates = unpriv_all;
  candidates.push_back(base_threshold);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  GroupThresholdResult result;
  result.privileged_threshold = base_threshold;
  result.base_gap = gap_at(base_threshold);
  double best_gap = 0.0;
  double best_t = 0.0;
  bool first = true;
  for (double t : candidates) {
    const double gap = gap_at(t);
    bool better = first || gap < best_gap;
    if (!better && gap == best_gap) {
      const double d = std::fabs(t - base_threshold);
      const double best_d = std::fabs(best_t - base_threshold);
      better = d < best_d || (d == best_d && t > best_t);
    }
    if (better) {
      best_gap = gap;
      best_t = t;
      first = false;
    }
  }
  result.unprivileged_threshold = best_t;
  result.achieved_gap = best_gap;
  result.decisions = apply_group_thresholds(scores, groups, base_threshold, best_t);
  return result;
}

}  // namespace fairsearch
