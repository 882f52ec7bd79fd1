#pragma once

// Classifier families: L2-regularized logistic regression, the same with a
// group/margin covariance penalty, and a CART random forest. All training is
// deterministic given inputs and seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fairsearch/csv.hpp"
#include "fairsearch/data.hpp"
#include "fairsearch/encoding.hpp"
#include "fairsearch/error.hpp"
#include "fairsearch/random.hpp"

namespace fairsearch {

enum class Family { logistic, fair_logistic, forest };

inline constexpr Family kAllFamilies[] = {Family::logistic, Family::fair_logistic, Family::forest};

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::logistic: return "logistic";
    case Family::fair_logistic: return "fair_logistic";
    case Family::forest: return "forest";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (Family f : kAllFamilies) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown model family '" + std::string(s) + "'");
}

struct ParamSpec {
  std::string_view name;
  double default_value;
  double min;
  double max;
  bool min_exclusive;
  bool integer;
};

inline std::span<const ParamSpec> param_specs(Family f) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  static constexpr ParamSpec kLogistic[] = {
      {"epochs", 500, 0, 1e7, false, true},
      {"l2_penalty", 0.0, 0, inf, false, false},
      {"learning_rate", 0.1, 0, inf, true, false},
  };
  static constexpr ParamSpec kFair[] = {
      {"epochs", 500, 0, 1e7, false, true},
      {"fairness_weight", 1.0, 0, inf, false, false},
      {"l2_penalty", 0.0, 0, inf, false, false},
      {"learning_rate", 0.1, 0, inf, true, false},
  };
  static constexpr ParamSpec kForest[] = {
      {"bootstrap", 1, 0, 1, false, true},
      {"feature_subsample_fraction", 0.5, 0, 1, true, false},
      {"max_depth", 8, 0, 1e4, false, true},  // 0 = unlimited
      {"min_leaf", 1, 1, 1e9, false, true},
      {"n_trees", 25, 1, 1e5, false, true},
  };
  switch (f) {
    case Family::logistic: return kLogistic;
    case Family::fair_logistic: return kFair;
    case Family::forest: return kForest;
  }
  return {};
}

/// A complete, validated hyperparameter assignment for one family. Keys not
/// set explicitly hold their defaults.
class Hyperparameters {
 public:
  explicit Hyperparameters(Family family) : family_(family) {
    for (const auto& spec : param_specs(family)) values_[std::string(spec.name)] = spec.default_value;
  }

  Hyperparameters(Family family, const std::map<std::string, double>& overrides) : Hyperparameters(family) {
    for (const auto& [k, v] : overrides) set(k, v);
  }

  Family family() const { return family_; }

  Hyperparameters& set(std::string_view name, double value) {
    const ParamSpec* spec = nullptr;
    for (const auto& s : param_specs(family_)) {
      if (s.name == name) spec = &s;
    }
    if (!spec) {
      throw std::invalid_argument("unknown hyperparameter '" + std::string(name) + "' for family " +
                                  std::string(to_string(family_)));
    }
    const bool below = spec->min_exclusive ? !(value > spec->min) : !(value >= spec->min);
    if (below || !(value <= spec->max) || (spec->integer && value != std::floor(value))) {
      throw std::invalid_argument("hyperparameter " + std::string(name) + "=" + csv::format_short(value) +
                                  " is out of range");
    }
    values_[std::string(name)] = value;
    return *this;
  }

  double get(std::string_view name) const {
    auto it = values_.find(std::string(name));
    if (it == values_.end()) throw std::invalid_argument("no hyperparameter '" + std::string(name) + "'");
    return it->second;
  }

  const std::map<std::string, double>& values() const { return values_; }

  /// `key=value;...` with keys sorted and shortest round-trip numbers.
  std::string descriptor() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      if (!out.empty()) out += ';';
      out += k + "=" + csv::format_short(v);
    }
    return out;
  }

  static Hyperparameters from_descriptor(Family family, std::string_view text) {
    Hyperparameters hp(family);
    while (!text.empty()) {
      const auto semi = text.find(';');
      const auto item = text.substr(0, semi);
      const auto eq = item.find('=');
      double v;
      if (eq == std::string_view::npos || !csv::parse_double(item.substr(eq + 1), v)) {
        throw std::invalid_argument("malformed hyperparameter descriptor '" + std::string(text) + "'");
      }
      hp.set(item.substr(0, eq), v);
      if (semi == std::string_view::npos) break;
      text.remove_prefix(semi + 1);
    }
    return hp;
  }

  bool operator==(const Hyperparameters&) const = default;

 private:
  Family family_;
  std::map<std::string, double> values_;
};

/// Predicted probability of the favorable label, per row.
using Scores = std::vector<double>;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;  // favorable fraction at a leaf
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[i].feature >= 0) {
      const auto& n = nodes[i];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[i].value;
  }
};

struct TrainingInfo {
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // objective before each epoch's step
};

struct Model {
  Family family = Family::logistic;
  std::vector<double> weights;  // logistic families
  double intercept = 0.0;
  std::vector<Tree> trees;  // forest
  TrainingInfo info;

  double score(std::span<const double> x) const {
    if (family == Family::forest) {
      double sum = 0.0;
      for (const auto& t : trees) sum += t.predict(x);
      return trees.empty() ? 0.5 : sum / static_cast<double>(trees.size());
    }
    double m = intercept;
    for (std::size_t j = 0; j < weights.size(); ++j) m += weights[j] * x[j];
    return 1.0 / (1.0 + std::exp(-m));
  }

  Scores predict(const EncodedMatrix& x) const {
    if (family != Family::forest && weights.size() != x.cols) {
      throw std::invalid_argument("model expects " + std::to_string(weights.size()) + " features, got " +
                                  std::to_string(x.cols));
    }
    Scores s(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) s[r] = score(x.row(r));
    return s;
  }
};

// ---------------------------------------------------------------------------
// Logistic families

namespace detail {

inline double softplus(double m) { return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }
inline double sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

inline void check_training_inputs(const EncodedMatrix& x, std::span<const std::uint8_t> y,
                                  std::span<const double> w) {
  if (x.rows == 0) throw DataError("empty training set");
  if (y.size() != x.rows || w.size() != x.rows) throw std::invalid_argument("rows, labels and weights differ in length");
  for (double v : x.values) {
    if (std::isnan(v)) throw DataError("NaN in training features");
  }
}

}  // namespace detail

/// Weighted mean log-loss + l2 * |w|^2 + fairness_weight * C^2, where C is
/// the weighted covariance between the privileged indicator and the margin
/// w.x + b. Parameters are laid out as [w_0..w_{d-1}, b].
class FairLogisticObjective {
 public:
  FairLogisticObjective(const EncodedMatrix& x, std::span<const std::uint8_t> y, std::span<const double> w,
                        std::span<const std::uint8_t> groups, double l2_penalty, double fairness_weight)
      : x_(x), y_(y), w_(w), groups_(groups), l2_(l2_penalty), eta_(fairness_weight) {
    detail::check_training_inputs(x, y, w);
    total_weight_ = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total_weight_ > 0.0)) throw DataError("instance weights sum to zero");
    if (eta_ > 0.0) {
      if (groups.size() != x.rows) throw std::invalid_argument("group vector length differs from rows");
      double zw = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) zw += w[i] * groups[i];
      group_mean_ = zw / total_weight_;
    }
  }

  std::size_t dimension() const { return x_.cols + 1; }

  /// Weighted covariance between the group indicator and the margin.
  double covariance(std::span<const double> params) const {
    if (groups_.size() != x_.rows) return 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i < x_.rows; ++i) {
      c += w_[i] * (groups_[i] - group_mean_) * margin(params, i);
    }
    return c / total_weight_;
  }

  double value(std::span<const double> params) const {
    std::vector<double> unused(dimension());
    return evaluate(params, unused, false);
  }

  double value_and_gradient(std::span<const double> params, std::span<double> grad) const {
    return evaluate(params, grad, true);
  }

 private:
  double margin(std::span<const double> params, std::size_t i) const {
    const auto row = x_.row(i);
    double m = params[x_.cols];
    for (std::size_t j = 0; j < x_.cols; ++j) m += params[j] * row[j];
    return m;
  }

  double evaluate(std::span<const double> params, std::span<double> grad, bool want_grad) const {
    const std::size_t d = x_.cols;
    std::vector<double> margins(x_.rows);
    double loss = 0.0;
    double cov = 0.0;
    for (std::size_t i = 0; i < x_.rows; ++i) {
      margins[i] = margin(params, i);
      loss += w_[i] * (detail::softplus(margins[i]) - y_[i] * margins[i]);
      if (eta_ > 0.0) cov += w_[i] * (groups_[i] - group_mean_) * margins[i];
    }
    loss /= total_weight_;
    cov /= total_weight_;
    double l2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) l2 += params[j] * params[j];
    double objective = loss + l2_ * l2;
    if (eta_ > 0.0) objective += eta_ * cov * cov;

    if (want_grad) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < x_.rows; ++i) {
        double r = detail::sigmoid(margins[i]) - y_[i];
        if (eta_ > 0.0) r += 2.0 * eta_ * cov * (groups_[i] - group_mean_);
        r *= w_[i] / total_weight_;
        const auto row = x_.row(i);
        for (std::size_t j = 0; j < d; ++j) grad[j] += r * row[j];
        grad[d] += r;
      }
      for (std::size_t j = 0; j < d; ++j) grad[j] += 2.0 * l2_ * params[j];
    }
    return objective;
  }

  const EncodedMatrix& x_;
  std::span<const std::uint8_t> y_;
  std::span<const double> w_;
  std::span<const std::uint8_t> groups_;
  double l2_;
  double eta_;
  double total_weight_ = 0.0;
  double group_mean_ = 0.0;
};

namespace detail {

inline Model gradient_descent(const FairLogisticObjective& objective, Family family, std::size_t d,
                              double learning_rate, std::size_t epochs, std::uint64_t seed) {
  std::vector<double> params(d + 1, 0.0);
  std::vector<double> grad(d + 1);
  Model model;
  model.family = family;
  model.info.seed = seed;
  model.info.loss_history.reserve(epochs);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const double loss = objective.value_and_gradient(params, grad);
    if (!std::isfinite(loss)) throw DivergenceError(epoch, "non-finite loss");
    model.info.loss_history.push_back(loss);
    for (std::size_t j = 0; j <= d; ++j) params[j] -= learning_rate * grad[j];
  }
  model.info.final_loss = objective.value(params);
  if (!std::isfinite(model.info.final_loss)) throw DivergenceError(epochs, "non-finite loss");
  model.info.epochs_run = epochs;
  model.intercept = params[d];
  params.pop_back();
  model.weights = std::move(params);
  return model;
}

}  // namespace detail

/// Full-batch gradient descent from zero on weighted log-loss + L2.
inline Model train_logistic(const EncodedMatrix& x, std::span<const std::uint8_t> y, std::span<const double> w,
                            const Hyperparameters& hp, std::uint64_t seed) {
  const FairLogisticObjective objective(x, y, w, {}, hp.get("l2_penalty"), 0.0);
  return detail::gradient_descent(objective, Family::logistic, x.cols, hp.get("learning_rate"),
                                  static_cast<std::size_t>(hp.get("epochs")), seed);
}

inline Model train_fair_logistic(const EncodedMatrix& x, std::span<const std::uint8_t> y,
                                 std::span<const double> w, std::span<const std::uint8_t> groups,
                                 const Hyperparameters& hp, std::uint64_t seed) {
  if (groups.size() != x.rows) throw std::invalid_argument("group vector length differs from rows");
  const FairLogisticObjective objective(x, y, w, groups, hp.get("l2_penalty"), hp.get("fairness_weight"));
  return detail::gradient_descent(objective, Family::fair_logistic, x.cols, hp.get("learning_rate"),
                                  static_cast<std::size_t>(hp.get("epochs")), seed);
}

// ---------------------------------------------------------------------------
// Random forest

namespace detail {

struct SampleEntry {
  std::uint32_t row;
  double weight;
};

class TreeBuilder {
 public:
  TreeBuilder(const EncodedMatrix& x, std::span<const std::uint8_t> y, std::size_t max_depth,
              std::size_t min_leaf, std::size_t features_per_node, Rng& rng)
      : x_(x), y_(y), max_depth_(max_depth), min_leaf_(min_leaf), features_per_node_(features_per_node), rng_(rng) {
    feature_pool_.resize(x.cols);
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
  }

  Tree build(std::vector<SampleEntry> sample) {
    sample_ = std::move(sample);
    tree_ = Tree{};
    grow(0, sample_.size(), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  // Weighted Gini impurity times node weight: 2 P (W - P) / W.
  static double impurity(double pos, double total) { return total > 0.0 ? 2.0 * pos * (total - pos) / total : 0.0; }

  int grow(std::size_t begin, std::size_t end, std::size_t depth) {
    double total = 0.0;
    double pos = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = begin; i < end; ++i) {
      total += sample_[i].weight;
      if (y_[sample_[i].row]) {
        pos += sample_[i].weight;
        ++n_pos;
      }
    }
    const std::size_t count = end - begin;
    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[index].value =
        total > 0.0 ? pos / total : static_cast<double>(n_pos) / static_cast<double>(count);

    const bool pure = n_pos == 0 || n_pos == count;
    if (pure || (max_depth_ > 0 && depth >= max_depth_) || count < 2 * min_leaf_) return index;

    const Split split = best_split(begin, end, total, pos);
    if (split.feature < 0) return index;

    const auto mid_it = std::stable_partition(
        sample_.begin() + static_cast<std::ptrdiff_t>(begin), sample_.begin() + static_cast<std::ptrdiff_t>(end),
        [&](const SampleEntry& e) { return x_(e.row, static_cast<std::size_t>(split.feature)) <= split.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - sample_.begin());

    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    auto& node = tree_.nodes[index];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  Split best_split(std::size_t begin, std::size_t end, double total, double pos) {
    // Draw the candidate features, then scan them in index order so ties
    // resolve toward the lowest feature.
    const std::size_t k = std::min(features_per_node_, feature_pool_.size());
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + rng_.below(feature_pool_.size() - i);
      std::swap(feature_pool_[i], feature_pool_[j]);
    }
    std::vector<std::size_t> candidates(feature_pool_.begin(), feature_pool_.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(candidates.begin(), candidates.end());

    const double parent = impurity(pos, total);
    Split best;
    bool found = false;
    std::vector<SampleEntry> order(sample_.begin() + static_cast<std::ptrdiff_t>(begin),
                                   sample_.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t f : candidates) {
      std::sort(order.begin(), order.end(), [&](const SampleEntry& a, const SampleEntry& b) {
        const double va = x_(a.row, f);
        const double vb = x_(b.row, f);
        return va < vb || (va == vb && a.row < b.row);
      });
      double left_total = 0.0;
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left_total += order[i].weight;
        if (y_[order[i].row]) left_pos += order[i].weight;
        const double a = x_(order[i].row, f);
        const double b = x_(order[i + 1].row, f);
        if (!(a < b)) continue;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf_ || order.size() - n_left < min_leaf_) continue;
        const double gain =
            parent - impurity(left_pos, left_total) - impurity(pos - left_pos, total - left_total);
        if (!found || gain > best.gain) {
          found = true;
          double threshold = a + (b - a) / 2.0;
          if (!(threshold < b)) threshold = a;
          best = {static_cast<int>(f), threshold, gain};
        }
      }
    }
    return best;
  }

  const EncodedMatrix& x_;
  std::span<const std::uint8_t> y_;
  std::size_t max_depth_;
  std::size_t min_leaf_;
  std::size_t features_per_node_;
  Rng& rng_;
  std::vector<std::size_t> feature_pool_;
  std::vector<SampleEntry> sample_;
  Tree tree_;
};

}  // namespace detail

/// Tree t draws from Rng(derive_seed(seed, t)): first its bootstrap sample
/// (n weight-proportional draws, each with unit weight), then per-node
/// feature subsets. Without bootstrap every row enters with its instance
/// weight.
inline Model train_forest(const EncodedMatrix& x, std::span<const std::uint8_t> y, std::span<const double> w,
                          const Hyperparameters& hp, std::uint64_t seed) {
  detail::check_training_inputs(x, y, w);
  const auto n_trees = static_cast<std::size_t>(hp.get("n_trees"));
  const auto max_depth = static_cast<std::size_t>(hp.get("max_depth"));
  const auto min_leaf = static_cast<std::size_t>(hp.get("min_leaf"));
  const bool bootstrap = hp.get("bootstrap") != 0.0;
  const auto features_per_node = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(hp.get("feature_subsample_fraction") * static_cast<double>(x.cols))));

  std::vector<double> cumulative(x.rows);
  std::partial_sum(w.begin(), w.end(), cumulative.begin());
  const double total = cumulative.back();
  if (bootstrap && !(total > 0.0)) throw DataError("instance weights sum to zero");

  Model model;
  model.family = Family::forest;
  model.info.seed = seed;
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng rng(derive_seed(seed, t));
    std::vector<detail::SampleEntry> sample;
    sample.reserve(x.rows);
    if (bootstrap) {
      for (std::size_t i = 0; i < x.rows; ++i) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        sample.push_back({static_cast<std::uint32_t>(it - cumulative.begin()), 1.0});
      }
    } else {
      for (std::size_t i = 0; i < x.rows; ++i) sample.push_back({static_cast<std::uint32_t>(i), w[i]});
    }
    detail::TreeBuilder builder(x, y, max_depth, min_leaf, features_per_node, rng);
    model.trees.push_back(builder.build(std::move(sample)));
  }
  return model;
}

/// Dispatches on the hyperparameters' family.
inline Model train(const EncodedMatrix& x, std::span<const std::uint8_t> y, std::span<const double> w,
                   std::span<const std::uint8_t> groups, const Hyperparameters& hp, std::uint64_t seed) {
  switch (hp.family()) {
    case Family::logistic: return train_logistic(x, y, w, hp, seed);
    case Family::fair_logistic: return train_fair_logistic(x, y, w, groups, hp, seed);
    case Family::forest: return train_forest(x, y, w, hp, seed);
  }
  throw std::logic_error("unreachable");
}

/// 1 iff score >= threshold.
inline std::vector<std::uint8_t> decide(std::span<const double> scores, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in [0, 1]");
  std::vector<std::uint8_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
  return out;
}

}  // namespace fairsearch
