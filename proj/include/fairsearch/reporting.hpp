#pragma once

// Search result exports: the results CSV and the JSON plot document read by
// the trade-off explorer.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fairsearch/csv.hpp"
#include "fairsearch/error.hpp"
#include "fairsearch/pareto.hpp"
#include "fairsearch/results.hpp"
#include "json.hpp"

namespace fairsearch {

inline constexpr int kPlotFormatVersion = 1;

inline std::string_view family_color(Family f) {
  switch (f) {
    case Family::logistic: return "purple";
    case Family::fair_logistic: return "magenta";
    case Family::forest: return "orange";
  }
  return "gray";
}

/// Rows of a results CSV, with the metric columns it carries.
struct ResultsTable {
  std::vector<MetricId> metrics;
  std::vector<EvaluatedModel> rows;
};

inline std::vector<std::string> results_header(std::span<const MetricId> metrics) {
  std::vector<std::string> header = {"config_id",     "family",         "hyperparams",
                                     "preprocessor",  "postprocessor",  "threshold",
                                     "exclude_protected", "failed",     "error"};
  for (MetricId id : metrics) {
    header.push_back(std::string(to_string(id)) + "_raw");
    header.push_back(std::string(to_string(id)) + "_score");
  }
  return header;
}

inline std::string results_to_csv(std::span<const EvaluatedModel> results, std::span<const MetricId> metrics) {
  std::vector<const EvaluatedModel*> ordered;
  for (const auto& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const EvaluatedModel* a, const EvaluatedModel* b) {
    return a->config.config_id < b->config.config_id;
  });
  std::string out;
  csv::append_record(out, results_header(metrics));
  for (const EvaluatedModel* r : ordered) {
    const auto& c = r->config;
    csv::Record rec = {std::to_string(c.config_id),
                       std::string(to_string(c.family())),
                       c.hyperparameters.descriptor(),
                       to_string(c.preprocessor),
                       to_string(c.postprocessor),
                       csv::format_short(c.threshold),
                       c.exclude_protected ? "true" : "false",
                       r->failed ? "true" : "false",
                       r->error};
    for (MetricId id : metrics) {
      const MetricValue* m = r->failed ? nullptr : r->metric(id);
      rec.push_back(m && m->raw ? csv::format_double(*m->raw) : std::string());
      rec.push_back(m && m->score ? csv::format_double(*m->score) : std::string());
    }
    csv::append_record(out, rec);
  }
  return out;
}

/// Metric columns follow the first result's metric order.
inline std::string results_to_csv(std::span<const EvaluatedModel> results) {
  if (results.empty()) throw std::invalid_argument("no results to write");
  std::vector<MetricId> metrics;
  for (const auto& m : results.front().metrics) metrics.push_back(m.id);
  return results_to_csv(results, metrics);
}

inline void write_results_csv(std::span<const EvaluatedModel> results, const std::string& path) {
  if (results.empty()) throw std::invalid_argument("no results to write");
  csv::write_file(path, results_to_csv(results));
}

inline ResultsTable parse_results_csv(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty()) throw DataError("results CSV is empty");
  const auto& header = records.front();
  constexpr std::size_t kFixed = 9;
  if (header.size() < kFixed || (header.size() - kFixed) % 2 != 0) throw DataError("results CSV has a malformed header");
  ResultsTable table;
  for (std::size_t i = kFixed; i < header.size(); i += 2) {
    const std::string& col = header[i];
    if (col.size() < 4 || col.substr(col.size() - 4) != "_raw") {
      throw DataError("results CSV column '" + col + "' is not a metric column");
    }
    table.metrics.push_back(parse_metric(col.substr(0, col.size() - 4)));
  }
  if (std::vector<std::string>(header) != results_header(table.metrics)) {
    throw DataError("results CSV header does not match the expected layout");
  }

  auto number = [](std::size_t row, const std::string& cell) {
    double v;
    if (!csv::parse_double(cell, v)) throw ParseError(row, "cannot parse '" + cell + "' as a number");
    return v;
  };
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != header.size()) throw ParseError(r, "wrong field count");
    EvaluatedModel m;
    try {
      const Family family = parse_family(rec[1]);
      m.config.config_id = static_cast<std::size_t>(number(r, rec[0]));
      m.config.hyperparameters = Hyperparameters::from_descriptor(family, rec[2]);
      m.config.preprocessor = parse_preprocessor(rec[3]);
      m.config.postprocessor = parse_postprocessor(rec[4]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(r, e.what());
    }
    m.config.threshold = number(r, rec[5]);
    m.config.exclude_protected = rec[6] == "true";
    m.failed = rec[7] == "true";
    m.error = rec[8];
    for (std::size_t k = 0; k < table.metrics.size(); ++k) {
      const auto& raw = rec[kFixed + 2 * k];
      const auto& score = rec[kFixed + 2 * k + 1];
      MetricValue v = MetricValue::undefined(table.metrics[k]);
      if (!raw.empty()) v.raw = number(r, raw);
      if (!score.empty()) v.score = number(r, score);
      m.metrics.push_back(v);
    }
    table.rows.push_back(std::move(m));
  }
  return table;
}

inline ResultsTable read_results_csv(const std::string& path) { return parse_results_csv(csv::read_file(path)); }

// ---------------------------------------------------------------------------
// Plot document

namespace detail {

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

/// Keys are sorted, so equal inputs serialize to identical bytes.
inline nlohmann::json build_plot_document(std::span<const EvaluatedModel> results, std::span<const MetricId> metrics) {
  if (results.empty()) throw std::invalid_argument("no results to export");
  nlohmann::json doc;
  doc["format_version"] = kPlotFormatVersion;

  doc["metrics"] = nlohmann::json::array();
  for (MetricId id : metrics) {
    doc["metrics"].push_back({{"id", std::string(to_string(id))},
                              {"display_name", std::string(display_name(id))},
                              {"orientation", std::string(orientation(id))}});
  }

  doc["families"] = nlohmann::json::array();
  for (Family f : kAllFamilies) {
    const bool present = std::any_of(results.begin(), results.end(),
                                     [&](const EvaluatedModel& r) { return r.config.family() == f; });
    if (present) {
      doc["families"].push_back({{"family", std::string(to_string(f))}, {"color_key", std::string(family_color(f))}});
    }
  }

  std::vector<const EvaluatedModel*> ordered;
  for (const auto& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const EvaluatedModel* a, const EvaluatedModel* b) {
    return a->config.config_id < b->config.config_id;
  });
  doc["points"] = nlohmann::json::array();
  for (const EvaluatedModel* r : ordered) {
    const auto& c = r->config;
    nlohmann::json hp = nlohmann::json::object();
    for (const auto& [k, v] : c.hyperparameters.values()) hp[k] = csv::format_short(v);
    nlohmann::json values = nlohmann::json::object();
    for (MetricId id : metrics) {
      const MetricValue* m = r->failed ? nullptr : r->metric(id);
      values[std::string(to_string(id))] = {{"raw", detail::optional_number(m ? m->raw : std::nullopt)},
                                            {"score", detail::optional_number(m ? m->score : std::nullopt)}};
    }
    doc["points"].push_back({{"config_id", c.config_id},
                             {"family", std::string(to_string(c.family()))},
                             {"hyperparameters", hp},
                             {"threshold", c.threshold},
                             {"preprocessor", to_string(c.preprocessor)},
                             {"postprocessor", to_string(c.postprocessor)},
                             {"exclude_protected", c.exclude_protected},
                             {"failed", r->failed},
                             {"error", r->error},
                             {"metrics", values}});
  }

  doc["frontiers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    for (std::size_t j = i + 1; j < metrics.size(); ++j) {
      const MetricId pair[] = {metrics[i], metrics[j]};
      FrontierResult front;
      try {
        front = pareto_front(pair, results);
      } catch (const FrontierError&) {
        for (const EvaluatedModel* r : ordered) front.excluded.push_back(r->config.config_id);
      }
      doc["frontiers"].push_back({{"metrics", {std::string(to_string(pair[0])), std::string(to_string(pair[1]))}},
                                  {"config_ids", front.frontier},
                                  {"excluded", front.excluded}});
    }
  }
  return doc;
}

inline std::string plot_document_text(std::span<const EvaluatedModel> results, std::span<const MetricId> metrics) {
  return build_plot_document(results, metrics).dump(2) + "\n";
}

inline void write_plot_document(std::span<const EvaluatedModel> results, std::span<const MetricId> metrics,
                                const std::string& path) {
  csv::write_file(path, plot_document_text(results, metrics));
}

}  // namespace fairsearch
