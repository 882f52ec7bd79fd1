#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fairsearch/data.hpp"
#include "fairsearch/error.hpp"

namespace fairsearch {

/// Where an encoded column came from. `category` is set for one-hot
/// indicators and empty for standardized numeric columns.
struct Provenance {
  std::string source;
  std::optional<std::string> category;

  bool operator==(const Provenance&) const = default;
};

/// Dense row-major design matrix.
struct EncodedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<Provenance> provenance;
  std::vector<double> means;  // per encoded column; 0 for indicators
  std::vector<double> stds;   // per encoded column; 1 for indicators

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// One-hot + standardization fitted on a training set and replayed on
/// others. Columns are looked up by name, so a fitted encoder ignores extra
/// columns in the data it is applied to.
class Encoder {
 public:
  struct Source {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    double mean = 0.0;
    double std = 0.0;  // population; 0 maps every value to 0
    std::vector<std::string> categories;  // sorted
  };

  static Encoder fit(const Dataset& train) {
    if (train.empty()) throw DataError("cannot fit an encoder on an empty training set");
    Encoder enc;
    for (const auto& col : train.columns()) {
      Source src{col.name, col.kind, 0.0, 0.0, {}};
      if (col.kind == ColumnKind::numeric) {
        double sum = 0.0;
        std::size_t count = 0;
        for (double v : col.numbers) {
          if (!std::isnan(v)) {
            sum += v;
            ++count;
          }
        }
        if (count > 0) {
          src.mean = sum / static_cast<double>(count);
          double ss = 0.0;
          for (double v : col.numbers) {
            if (!std::isnan(v)) ss += (v - src.mean) * (v - src.mean);
          }
          src.std = std::sqrt(ss / static_cast<double>(count));
        }
      } else {
        std::set<std::string> cats(col.category.begin(), col.category.end());
        src.categories.assign(cats.begin(), cats.end());
      }
      enc.sources_.push_back(std::move(src));
    }
    return enc;
  }

  const std::vector<Source>& sources() const { return sources_; }

  std::size_t width() const {
    std::size_t w = 0;
    for (const auto& s : sources_) w += s.kind == ColumnKind::numeric ? 1 : s.categories.size();
    return w;
  }

  EncodedMatrix apply(const Dataset& ds) const {
    EncodedMatrix m;
    m.rows = ds.rows();
    m.cols = width();
    m.values.assign(m.rows * m.cols, 0.0);
    std::size_t offset = 0;
    for (const auto& src : sources_) {
      const Column* col = ds.column(src.name);
      if (!col) throw SchemaError("encoder input lacks fitted column '" + src.name + "'");
      if (col->kind != src.kind) throw SchemaError("column '" + src.name + "' changed kind");
      if (src.kind == ColumnKind::numeric) {
        m.provenance.push_back({src.name, std::nullopt});
        m.means.push_back(src.mean);
        m.stds.push_back(src.std);
        if (src.std > 0.0) {
          for (std::size_t r = 0; r < m.rows; ++r) {
            const double v = col->numbers[r];
            m.values[r * m.cols + offset] = std::isnan(v) ? 0.0 : (v - src.mean) / src.std;
          }
        }
        offset += 1;
      } else {
        for (const auto& cat : src.categories) {
          m.provenance.push_back({src.name, cat});
          m.means.push_back(0.0);
          m.stds.push_back(1.0);
        }
        for (std::size_t r = 0; r < m.rows; ++r) {
          const auto& cell = col->category[r];
          auto it = std::lower_bound(src.categories.begin(), src.categories.end(), cell);
          if (it != src.categories.end() && *it == cell) {
            m.values[r * m.cols + offset + static_cast<std::size_t>(it - src.categories.begin())] = 1.0;
          }
        }
        offset += src.categories.size();
      }
    }
    return m;
  }

 private:
  std::vector<Source> sources_;
};

/// Fits on `train` and encodes it followed by each of `others`.
inline std::vector<EncodedMatrix> encode(const Dataset& train, std::span<const Dataset> others) {
  const Encoder enc = Encoder::fit(train);
  std::vector<EncodedMatrix> out;
  out.push_back(enc.apply(train));
  for (const auto& ds : others) {
    if (ds.schema_ptr() != train.schema_ptr() &&
        ds.schema().to_json() != train.schema().to_json()) {
      throw SchemaError("encode inputs do not share one schema");
    }
    out.push_back(enc.apply(ds));
  }
  return out;
}

}  // namespace fairsearch
