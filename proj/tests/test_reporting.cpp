#include <gtest/gtest.h>

#include <fstream>

#include "fairsearch/reporting.hpp"
#include "fairsearch/search.hpp"
#include "test_util.hpp"

namespace fairsearch {
namespace {

const std::vector<MetricId> kMetrics = {MetricId::accuracy, MetricId::disparate_impact, MetricId::statistical_parity,
                                        MetricId::treatment_equality};

std::vector<EvaluatedModel> fixture_results(std::size_t n) {
  Rng rng(6);
  std::vector<EvaluatedModel> out;
  for (std::size_t i = 0; i < n; ++i) {
    EvaluatedModel m;
    m.config.config_id = i;
    m.config.hyperparameters = Hyperparameters(kAllFamilies[i % 3]);
    m.config.threshold = i % 2 ? 0.7 : 0.5;
    m.config.preprocessor = i % 4 == 0 ? Preprocessor::reweigh : Preprocessor::none;
    m.config.exclude_protected = i % 5 == 0;
    for (MetricId id : kMetrics) {
      const double raw = id == MetricId::accuracy || id == MetricId::disparate_impact ? rng.uniform() + 0.1
                                                                                        : rng.uniform() - 0.5;
      m.metrics.push_back(MetricValue::of(id, raw));
    }
    if (i == 3) m.metrics[3] = MetricValue::undefined(MetricId::treatment_equality);
    if (i == 5) {
      m.failed = true;
      m.error = "diverged at epoch 3: non-finite loss";
      for (auto& v : m.metrics) v = MetricValue::undefined(v.id);
    }
    out.push_back(m);
  }
  return out;
}

TEST(ResultsCsvTest, OneLinePerResultPlusHeader) {
  const auto text = results_to_csv(fixture_results(14));
  const auto records = csv::parse(text);
  EXPECT_EQ(records.size(), 15u);
  EXPECT_EQ(records[0], results_header(kMetrics));
  EXPECT_EQ(records[0][9], "accuracy_raw");
  EXPECT_EQ(records[0][10], "accuracy_score");
}

TEST(ResultsCsvTest, RoundTrip) {
  const auto results = fixture_results(14);
  const auto table = parse_results_csv(results_to_csv(results));
  EXPECT_EQ(table.metrics, kMetrics);
  ASSERT_EQ(table.rows.size(), results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& a = results[i];
    const auto& b = table.rows[i];
    EXPECT_EQ(a.config.config_id, b.config.config_id);
    EXPECT_EQ(a.config.hyperparameters, b.config.hyperparameters);
    EXPECT_EQ(a.config.threshold, b.config.threshold);
    EXPECT_EQ(a.config.preprocessor, b.config.preprocessor);
    EXPECT_EQ(a.config.postprocessor, b.config.postprocessor);
    EXPECT_EQ(a.config.exclude_protected, b.config.exclude_protected);
    EXPECT_EQ(a.failed, b.failed);
    EXPECT_EQ(a.error, b.error);
    for (std::size_t k = 0; k < kMetrics.size(); ++k) {
      EXPECT_EQ(a.metrics[k].defined(), b.metrics[k].defined());
      if (!a.metrics[k].defined()) continue;
      EXPECT_NEAR(*a.metrics[k].raw, *b.metrics[k].raw, 1e-12);
      EXPECT_NEAR(*a.metrics[k].score, *b.metrics[k].score, 1e-12);
    }
  }
}

TEST(ResultsCsvTest, FailedRowHasEmptyMetricCells) {
  const auto records = csv::parse(results_to_csv(fixture_results(14)));
  const auto& row = records[6];
  EXPECT_EQ(row[0], "5");
  EXPECT_EQ(row[7], "true");
  EXPECT_EQ(row[8], "diverged at epoch 3: non-finite loss");
  for (std::size_t c = 9; c < row.size(); ++c) EXPECT_TRUE(row[c].empty());
}

TEST(ResultsCsvTest, RowsSortedByConfigId) {
  auto results = fixture_results(6);
  std::reverse(results.begin(), results.end());
  const auto records = csv::parse(results_to_csv(results));
  for (std::size_t r = 1; r < records.size(); ++r) EXPECT_EQ(records[r][0], std::to_string(r - 1));
}

TEST(ResultsCsvTest, MalformedInputRejected) {
  EXPECT_THROW(parse_results_csv(""), DataError);
  EXPECT_THROW(parse_results_csv("config_id,family\r\n"), DataError);
  auto text = results_to_csv(fixture_results(2));
  text.replace(text.find("\r\n0,") + 2, 1, "x");
  EXPECT_THROW(parse_results_csv(text), ParseError);
}

TEST(ResultsCsvTest, WriteToUnwritablePathRaises) {
  EXPECT_THROW(write_results_csv(fixture_results(2), "/nonexistent-dir/results.csv"), IoError);
  EXPECT_THROW(write_results_csv(std::vector<EvaluatedModel>{}, "x.csv"), std::invalid_argument);
}

TEST(PlotDocumentTest, PairEntriesCoverEveryMetricPair) {
  const auto results = fixture_results(14);
  const std::vector<MetricId> two(kMetrics.begin(), kMetrics.begin() + 2);
  EXPECT_EQ(build_plot_document(results, two)["frontiers"].size(), 1u);
  const auto doc = build_plot_document(results, kMetrics);
  EXPECT_EQ(doc["frontiers"].size(), 6u);
  EXPECT_EQ(doc["format_version"], kPlotFormatVersion);
  EXPECT_EQ(doc["points"].size(), 14u);
  EXPECT_EQ(doc["families"].size(), 3u);
  EXPECT_EQ(doc["families"][0]["color_key"], "purple");
  EXPECT_EQ(doc["metrics"][1]["id"], "disparate_impact");
}

TEST(PlotDocumentTest, RegenerationIsByteIdentical) {
  const auto results = fixture_results(14);
  const auto dir = testing::temp_dir("plot_regen");
  write_plot_document(results, kMetrics, (dir / "a.json").string());
  write_plot_document(results, kMetrics, (dir / "b.json").string());
  EXPECT_EQ(csv::read_file((dir / "a.json").string()), csv::read_file((dir / "b.json").string()));
  auto shuffled = results;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(plot_document_text(shuffled, kMetrics), plot_document_text(results, kMetrics));
}

TEST(PlotDocumentTest, AgreesWithCsv) {
  const auto results = fixture_results(14);
  const auto table = parse_results_csv(results_to_csv(results));
  const auto doc = nlohmann::json::parse(plot_document_text(results, kMetrics));
  ASSERT_EQ(doc["points"].size(), table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& point = doc["points"][i];
    const auto& row = table.rows[i];
    EXPECT_EQ(point["config_id"].get<std::size_t>(), row.config.config_id);
    EXPECT_EQ(point["failed"].get<bool>(), row.failed);
    for (std::size_t k = 0; k < kMetrics.size(); ++k) {
      const auto& v = point["metrics"][std::string(to_string(kMetrics[k]))];
      if (!row.metrics[k].defined()) {
        EXPECT_TRUE(v["raw"].is_null());
        EXPECT_TRUE(v["score"].is_null());
        continue;
      }
      EXPECT_EQ(v["raw"].get<double>(), *row.metrics[k].raw);
      EXPECT_EQ(v["score"].get<double>(), *row.metrics[k].score);
    }
  }
}

TEST(PlotDocumentTest, FrontiersMatchRecomputationFromPoints) {
  const auto results = fixture_results(14);
  const auto doc = build_plot_document(results, kMetrics);
  for (const auto& entry : doc["frontiers"]) {
    const MetricId a = parse_metric(entry["metrics"][0].get<std::string>());
    const MetricId b = parse_metric(entry["metrics"][1].get<std::string>());
    std::vector<std::vector<double>> pts;
    std::vector<std::size_t> ids;
    for (const auto& p : doc["points"]) {
      const auto& sa = p["metrics"][std::string(to_string(a))]["score"];
      const auto& sb = p["metrics"][std::string(to_string(b))]["score"];
      if (p["failed"].get<bool>() || sa.is_null() || sb.is_null()) continue;
      pts.push_back({sa.get<double>(), sb.get<double>()});
      ids.push_back(p["config_id"].get<std::size_t>());
    }
    std::vector<std::size_t> expected;
    for (auto i : pareto_indices(pts)) expected.push_back(ids[i]);
    EXPECT_EQ(entry["config_ids"].get<std::vector<std::size_t>>(), expected);
    for (auto id : entry["config_ids"]) EXPECT_FALSE(doc["points"][id.get<std::size_t>()]["failed"].get<bool>());
  }
}

TEST(PlotDocumentTest, HyperparametersAreStrings) {
  const auto doc = build_plot_document(fixture_results(3), kMetrics);
  EXPECT_EQ(doc["points"][2]["hyperparameters"]["n_trees"], "25");
  EXPECT_EQ(doc["points"][0]["hyperparameters"]["learning_rate"], "0.1");
}

}  // namespace
}  // namespace fairsearch
