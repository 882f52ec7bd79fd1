#pragma once

// Grid search over pipeline configurations.
//
// A search space is a JSON document:
//
//   {
//     "families": [
//       {"family": "logistic", "hyperparameters": {"l2_penalty": [0, 0.01]}},
//       {"family": "forest"}
//     ],
//     "thresholds": [0.5, 0.7],
//     "preprocessors": ["none", "reweigh"],
//     "postprocessors": ["none", "group_threshold:selection_rate"],
//     "exclude_protected": [false, true],
//     "metrics": ["accuracy", "disparate_impact"],
//     "protected_attribute": "race",
//     "test_fraction": 0.3,
//     "seed": 42,
//     "consistency_k": 5
//   }
//
// Enumeration is the cartesian product in the order families, their
// hyperparameter options (first declared key varies slowest),
// exclude_protected, preprocessor, postprocessor, threshold.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fairsearch/data.hpp"
#include "fairsearch/encoding.hpp"
#include "fairsearch/error.hpp"
#include "fairsearch/learners.hpp"
#include "fairsearch/metrics.hpp"
#include "fairsearch/mitigation.hpp"
#include "fairsearch/random.hpp"
#include "fairsearch/results.hpp"
#include "json.hpp"

namespace fairsearch {

struct FamilyGrid {
  Family family = Family::logistic;
  /// Option lists in declared order; keys absent here keep their defaults.
  std::vector<std::pair<std::string, std::vector<double>>> options;
};

struct SearchSpace {
  std::vector<FamilyGrid> families;
  std::vector<double> thresholds;
  std::vector<Preprocessor> preprocessors{Preprocessor::none};
  std::vector<Postprocessor> postprocessors{Postprocessor{}};
  std::vector<bool> exclude_protected{false};
  std::vector<MetricId> metrics;
  std::string protected_attribute;  // empty selects the schema's first attribute
  double test_fraction = 0.3;
  std::uint64_t seed = 0;
  std::size_t consistency_k = 5;

  void validate() const {
    if (families.empty()) throw std::invalid_argument("search space has no model families");
    if (thresholds.empty()) throw std::invalid_argument("search space has no thresholds");
    if (metrics.empty()) throw std::invalid_argument("search space has no metrics");
    if (preprocessors.empty() || postprocessors.empty() || exclude_protected.empty()) {
      throw std::invalid_argument("search space has an empty option list");
    }
    for (double t : thresholds) {
      if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("thresholds must lie in [0, 1]");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw std::invalid_argument("test_fraction must lie strictly between 0 and 1");
    }
    if (consistency_k < 1) throw std::invalid_argument("consistency_k must be at least 1");
    for (const auto& fam : families) {
      Hyperparameters probe(fam.family);
      for (const auto& [name, values] : fam.options) {
        if (values.empty()) throw std::invalid_argument("hyperparameter '" + name + "' has no options");
        for (double v : values) probe.set(name, v);
      }
    }
  }

  static SearchSpace from_json(const nlohmann::ordered_json& doc) {
    SearchSpace s;
    try {
      s.families.clear();
      for (const auto& f : doc.at("families")) {
        FamilyGrid grid;
        grid.family = parse_family(f.at("family").get<std::string>());
        if (f.contains("hyperparameters")) {
          for (const auto& [name, opts] : f.at("hyperparameters").items()) {
            std::vector<double> values;
            auto push = [&](const nlohmann::ordered_json& v) {
              values.push_back(v.is_boolean() ? (v.get<bool>() ? 1.0 : 0.0) : v.get<double>());
            };
            if (opts.is_array()) {
              for (const auto& v : opts) push(v);
            } else {
              push(opts);
            }
            grid.options.emplace_back(name, std::move(values));
          }
        }
        s.families.push_back(std::move(grid));
      }
      s.thresholds = doc.at("thresholds").get<std::vector<double>>();
      if (doc.contains("preprocessors")) {
        s.preprocessors.clear();
        for (const auto& p : doc.at("preprocessors")) s.preprocessors.push_back(parse_preprocessor(p.get<std::string>()));
      }
      if (doc.contains("postprocessors")) {
        s.postprocessors.clear();
        for (const auto& p : doc.at("postprocessors")) {
          s.postprocessors.push_back(parse_postprocessor(p.get<std::string>()));
        }
      }
      if (doc.contains("exclude_protected")) {
        s.exclude_protected.clear();
        for (const auto& e : doc.at("exclude_protected")) s.exclude_protected.push_back(e.get<bool>());
      }
      for (const auto& m : doc.at("metrics")) s.metrics.push_back(parse_metric(m.get<std::string>()));
      s.protected_attribute = doc.value("protected_attribute", std::string());
      s.test_fraction = doc.value("test_fraction", 0.3);
      s.seed = doc.value("seed", std::uint64_t{0});
      s.consistency_k = doc.value("consistency_k", std::size_t{5});
    } catch (const nlohmann::ordered_json::exception& e) {
      throw std::invalid_argument(std::string("malformed search space: ") + e.what());
    }
    s.validate();
    return s;
  }

  static SearchSpace load(const std::string& path) {
    nlohmann::ordered_json doc;
    try {
      doc = nlohmann::ordered_json::parse(csv::read_file(path));
    } catch (const nlohmann::ordered_json::exception& e) {
      throw std::invalid_argument(path + ": " + e.what());
    }
    return from_json(doc);
  }
};

inline std::size_t config_count(const SearchSpace& space) {
  std::size_t per_family_total = 0;
  for (const auto& fam : space.families) {
    std::size_t combos = 1;
    for (const auto& [_, values] : fam.options) combos *= values.size();
    per_family_total += combos;
  }
  return per_family_total * space.thresholds.size() * space.preprocessors.size() * space.postprocessors.size() *
         space.exclude_protected.size();
}

inline std::vector<PipelineConfig> enumerate_configs(const SearchSpace& space) {
  space.validate();
  std::vector<PipelineConfig> out;
  out.reserve(config_count(space));
  for (const auto& fam : space.families) {
    // Odometer over the option lists; the last declared key turns fastest.
    std::vector<std::size_t> digit(fam.options.size(), 0);
    while (true) {
      Hyperparameters hp(fam.family);
      for (std::size_t k = 0; k < fam.options.size(); ++k) hp.set(fam.options[k].first, fam.options[k].second[digit[k]]);
      for (bool excl : space.exclude_protected) {
        for (Preprocessor pre : space.preprocessors) {
          for (const auto& post : space.postprocessors) {
            for (double t : space.thresholds) {
              out.push_back({out.size(), hp, t, pre, post, excl});
            }
          }
        }
      }
      bool wrapped = true;
      for (std::size_t k = fam.options.size(); k-- > 0;) {
        if (++digit[k] < fam.options[k].second.size()) {
          wrapped = false;
          break;
        }
        digit[k] = 0;
      }
      if (wrapped) break;
    }
  }
  return out;
}

/// Inputs shared by every configuration of one search: the split, the
/// attribute under evaluation and, when consistency is requested, the test
/// set's nearest neighbors for each exclusion setting.
struct SearchContext {
  const SearchSpace* space = nullptr;
  Dataset train;
  Dataset test;
  std::size_t attribute = 0;
  std::map<bool, NeighborLists> neighbors;

  static SearchContext prepare(const SearchSpace& space, Dataset train, Dataset test) {
    SearchContext ctx;
    ctx.space = &space;
    ctx.train = std::move(train);
    ctx.test = std::move(test);
    const auto& schema = ctx.train.schema();
    ctx.attribute = space.protected_attribute.empty() ? 0 : schema.attribute_index(space.protected_attribute);
    const bool wants_consistency =
        std::find(space.metrics.begin(), space.metrics.end(), MetricId::consistency) != space.metrics.end();
    if (wants_consistency && ctx.test.rows() > space.consistency_k) {
      for (bool excl : space.exclude_protected) {
        if (ctx.neighbors.count(excl)) continue;
        const Dataset tr = excl ? exclude_protected(ctx.train) : ctx.train;
        const Dataset te = excl ? exclude_protected(ctx.test) : ctx.test;
        ctx.neighbors[excl] = nearest_neighbors(Encoder::fit(tr).apply(te), space.consistency_k);
      }
    }
    return ctx;
  }
};

namespace detail {

inline Model train_model(const EncodedMatrix& x, const Dataset& data, std::span<const double> weights,
                         std::size_t attribute, const Hyperparameters& hp, std::uint64_t seed) {
  return fairsearch::train(x, data.labels(), weights, data.groups(attribute), hp, seed);
}

inline void mark_failed(EvaluatedModel& result, const SearchSpace& space, const std::string& error) {
  result.failed = true;
  result.error = error;
  result.metrics.clear();
  for (MetricId id : space.metrics) result.metrics.push_back(MetricValue::undefined(id));
}

}  // namespace detail

/// Runs one pipeline: exclusion, encoding fitted on train, preprocessing,
/// training, test scoring, postprocessing and metrics. Errors raised by the
/// pipeline mark the result failed instead of propagating.
inline EvaluatedModel evaluate_config(const PipelineConfig& cfg, const SearchContext& ctx) {
  const SearchSpace& space = *ctx.space;
  EvaluatedModel result;
  result.config = cfg;
  try {
    const std::uint64_t seed = derive_seed(space.seed, cfg.config_id);
    const std::size_t attr = ctx.attribute;
    const Dataset train = cfg.exclude_protected ? exclude_protected(ctx.train) : ctx.train;
    const Dataset test = cfg.exclude_protected ? exclude_protected(ctx.test) : ctx.test;
    const Encoder encoder = Encoder::fit(train);
    const EncodedMatrix x_train = encoder.apply(train);
    const EncodedMatrix x_test = encoder.apply(test);
    const std::vector<double> weights =
        cfg.preprocessor == Preprocessor::reweigh ? reweigh(train, attr) : train.weights();

    const auto start = std::chrono::steady_clock::now();
    const Model model = detail::train_model(x_train, train, weights, attr, cfg.hyperparameters, seed);
    result.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const Scores scores = model.predict(x_test);
    std::vector<std::uint8_t> decisions;
    if (cfg.postprocessor.kind == Postprocessor::Kind::none) {
      decisions = decide(scores, cfg.threshold);
    } else {
      // Thresholds are fitted on the training split and replayed on test.
      const Scores train_scores = model.predict(x_train);
      const auto fitted = group_threshold(train_scores, train.groups(attr), cfg.threshold, cfg.postprocessor.target,
                                          std::span<const std::uint8_t>(train.labels()));
      decisions = apply_group_thresholds(scores, test.groups(attr), fitted.privileged_threshold,
                                         fitted.unprivileged_threshold);
    }

    const auto& labels = test.labels();
    const ConfusionCounts overall = confusion(decisions, labels);
    std::optional<GroupConfusion> gc;
    for (MetricId id : space.metrics) {
      if (is_quality_metric(id)) {
        result.metrics.push_back(quality_metric(id, overall));
      } else if (is_group_metric(id)) {
        if (!gc) gc = group_confusion(decisions, labels, test.groups(attr));
        result.metrics.push_back(fairness_metric(id, *gc));
      } else if (id == MetricId::causal_flip) {
        // Measured on the raw test table so protected columns can be flipped.
        result.metrics.push_back(causal_flip_rate(model, ctx.test, encoder, attr, cfg.threshold));
      } else if (id == MetricId::consistency) {
        auto it = ctx.neighbors.find(cfg.exclude_protected);
        result.metrics.push_back(it == ctx.neighbors.end() ? MetricValue::undefined(id)
                                                           : consistency(scores, it->second));
      }
    }
  } catch (const Error& e) {
    detail::mark_failed(result, space, e.what());
  } catch (const std::invalid_argument& e) {
    detail::mark_failed(result, space, e.what());
  }
  return result;
}

inline EvaluatedModel evaluate_config(const PipelineConfig& cfg, const Dataset& train, const Dataset& test,
                                      const SearchSpace& space) {
  return evaluate_config(cfg, SearchContext::prepare(space, train, test));
}

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Evaluates every configuration of `space` on one shared split of `ds`.
/// Workers claim configurations from a shared counter; results land in
/// config_id order whatever the scheduling.
inline std::vector<EvaluatedModel> run_search(const SearchSpace& space, const Dataset& ds, std::size_t parallelism,
                                              const ProgressFn& progress = {}) {
  const auto configs = enumerate_configs(space);
  auto [train, test] = split(ds, space.test_fraction, space.seed);
  const SearchContext ctx = SearchContext::prepare(space, std::move(train), std::move(test));

  std::vector<EvaluatedModel> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      results[i] = evaluate_config(configs[i], ctx);
      const std::size_t finished = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(finished, configs.size());
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(parallelism, configs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace fairsearch
