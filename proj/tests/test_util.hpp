#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fairsearch/fairsearch.hpp"

namespace fairsearch::testing {

/// Dataset with numeric features x0..x{d-1}, a categorical "g" column
/// ("p" = privileged) and the given labels.
inline Dataset small_dataset(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                             const std::vector<int>& privileged) {
  DatasetSchema schema;
  const std::size_t d = features.empty() ? 0 : features.front().size();
  for (std::size_t j = 0; j < d; ++j) schema.columns.push_back({"x" + std::to_string(j), ColumnKind::numeric});
  schema.columns.push_back({"g", ColumnKind::categorical});
  schema.label = "y";
  schema.favorable = "1";
  schema.unfavorable = "0";
  schema.protected_attributes = {{"g", Predicate::parse("g=p")}};
  std::vector<Column> cols;
  for (std::size_t j = 0; j < d; ++j) {
    Column c{"x" + std::to_string(j), ColumnKind::numeric, {}, {}};
    for (const auto& row : features) c.numbers.push_back(row[j]);
    cols.push_back(std::move(c));
  }
  Column g{"g", ColumnKind::categorical, {}, {}};
  for (int p : privileged) g.category.push_back(p ? "p" : "u");
  cols.push_back(std::move(g));
  Labels y(labels.begin(), labels.end());
  return Dataset::from_columns(std::make_shared<const DatasetSchema>(schema), std::move(cols), std::move(y));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fairsearch_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fairsearch::testing
