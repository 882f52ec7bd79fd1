#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fairsearch/learners.hpp"
#include "fairsearch/metrics.hpp"
#include "fairsearch/mitigation.hpp"

namespace fairsearch {

/// One point of the search grid.
struct PipelineConfig {
  std::size_t config_id = 0;
  Hyperparameters hyperparameters{Family::logistic};
  double threshold = 0.5;
  Preprocessor preprocessor = Preprocessor::none;
  Postprocessor postprocessor;
  bool exclude_protected = false;

  Family family() const { return hyperparameters.family(); }

  bool operator==(const PipelineConfig&) const = default;
};

struct EvaluatedModel {
  PipelineConfig config;
  std::vector<MetricValue> metrics;  // in the search's requested order
  bool failed = false;
  std::string error;
  double train_seconds = 0.0;  // informational; never serialized

  const MetricValue* metric(MetricId id) const {
    for (const auto& m : metrics) {
      if (m.id == id) return &m;
    }
    return nullptr;
  }

  /// Canonical score, or nullopt when failed, missing or undefined.
  std::optional<double> score(MetricId id) const {
    if (failed) return std::nullopt;
    const auto* m = metric(id);
    return m ? m->score : std::nullopt;
  }
};

}  // namespace fairsearch
