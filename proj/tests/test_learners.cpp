#include <gtest/gtest.h>

#include <cmath>

#include "fairsearch/learners.hpp"
#include "fairsearch/metrics.hpp"
#include "test_util.hpp"

namespace fairsearch {
namespace {

EncodedMatrix matrix(const std::vector<std::vector<double>>& rows) {
  EncodedMatrix m;
  m.rows = rows.size();
  m.cols = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
  for (std::size_t j = 0; j < m.cols; ++j) {
    m.provenance.push_back({"x" + std::to_string(j), std::nullopt});
    m.means.push_back(0);
    m.stds.push_back(1);
  }
  return m;
}

Hyperparameters logistic(double lr, double l2, double epochs) {
  return Hyperparameters(Family::logistic, {{"learning_rate", lr}, {"l2_penalty", l2}, {"epochs", epochs}});
}

double accuracy(const std::vector<std::uint8_t>& d, const Labels& y) {
  double hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hits += d[i] == y[i];
  return hits / static_cast<double>(d.size());
}

TEST(HyperparametersTest, DefaultsAndValidation) {
  const Hyperparameters hp(Family::logistic);
  EXPECT_EQ(hp.get("learning_rate"), 0.1);
  EXPECT_EQ(hp.get("epochs"), 500);
  EXPECT_THROW(Hyperparameters(Family::logistic, {{"n_trees", 3}}), std::invalid_argument);
  EXPECT_THROW(Hyperparameters(Family::logistic, {{"learning_rate", 0}}), std::invalid_argument);
  EXPECT_THROW(Hyperparameters(Family::forest, {{"n_trees", 2.5}}), std::invalid_argument);
  EXPECT_THROW(Hyperparameters(Family::forest, {{"feature_subsample_fraction", 1.5}}), std::invalid_argument);
}

TEST(HyperparametersTest, DescriptorRoundTrip) {
  const Hyperparameters hp(Family::fair_logistic, {{"fairness_weight", 10}, {"learning_rate", 0.05}});
  EXPECT_EQ(hp.descriptor(), "epochs=500;fairness_weight=10;l2_penalty=0;learning_rate=0.05");
  EXPECT_EQ(Hyperparameters::from_descriptor(Family::fair_logistic, hp.descriptor()), hp);
}

TEST(LogisticTest, ZeroEpochsGivesHalf) {
  const auto x = matrix({{1, 2}, {3, 4}, {-1, 0}});
  const Labels y{1, 0, 1};
  const std::vector<double> w(3, 1.0);
  const auto model = train_logistic(x, y, w, logistic(0.1, 0, 0), 1);
  EXPECT_EQ(model.weights, (std::vector<double>{0, 0}));
  EXPECT_EQ(model.intercept, 0.0);
  for (double s : model.predict(x)) EXPECT_EQ(s, 0.5);
}

// Independent scalar gradient descent for one feature, unit weights.
std::pair<double, double> reference_gd(const std::vector<double>& x, const std::vector<int>& y, double lr,
                                       int epochs) {
  double w = 0;
  double b = 0;
  const double n = static_cast<double>(x.size());
  for (int e = 0; e < epochs; ++e) {
    double gw = 0;
    double gb = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(w * x[i] + b)));
      gw += (p - y[i]) * x[i] / n;
      gb += (p - y[i]) / n;
    }
    w -= lr * gw;
    b -= lr * gb;
  }
  return {w, b};
}

TEST(LogisticTest, SeparableMatchesReferenceOracle) {
  const std::vector<double> xs{-2.0, -1.5, -1.0, -0.5, -0.1, 0.1, 0.4, 1.0, 1.7, 2.2};
  const std::vector<int> ys{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  std::vector<std::vector<double>> rows;
  for (double v : xs) rows.push_back({v});
  const auto x = matrix(rows);
  const Labels y(ys.begin(), ys.end());
  const auto model = train_logistic(x, y, std::vector<double>(xs.size(), 1.0), logistic(0.5, 0, 2000), 0);
  const auto [w, b] = reference_gd(xs, ys, 0.5, 2000);
  EXPECT_NEAR(model.weights[0], w, 1e-9 * std::fabs(w));
  EXPECT_NEAR(model.intercept, b, 1e-9);
  EXPECT_EQ(accuracy(decide(model.predict(x), 0.5), y), 1.0);
}

TEST(LogisticTest, ClassSymmetricDataHasZeroIntercept) {
  std::vector<std::vector<double>> rows;
  std::vector<std::uint8_t> ys;
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const double a = rng.normal();
    const double b = rng.normal();
    const std::uint8_t label = rng.bernoulli(0.5);
    rows.push_back({a, b});
    ys.push_back(label);
    rows.push_back({-a, -b});
    ys.push_back(1 - label);
  }
  const auto x = matrix(rows);
  const auto model = train_logistic(x, ys, std::vector<double>(ys.size(), 1.0), logistic(0.1, 0.01, 500), 0);
  EXPECT_NEAR(model.intercept, 0.0, 1e-9);
}

TEST(LogisticTest, MonotoneLossForSmallStep) {
  const auto ds = make_synthetic(300, 0.3, 2);
  const auto x = Encoder::fit(ds).apply(ds);
  const auto model = train_logistic(x, ds.labels(), ds.weights(), logistic(0.05, 0.01, 300), 0);
  const auto& h = model.info.loss_history;
  ASSERT_EQ(h.size(), 300u);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1]) << "epoch " << i;
  EXPECT_LE(model.info.final_loss, h.back());
}

TEST(LogisticTest, DuplicateRowEqualsDoubledWeight) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> rows;
    Labels y;
    for (int i = 0; i < 12; ++i) {
      rows.push_back({rng.normal(), rng.normal(), rng.normal()});
      y.push_back(rng.bernoulli(0.5));
    }
    const std::size_t dup = rng.below(rows.size());
    auto rows_dup = rows;
    auto y_dup = y;
    rows_dup.push_back(rows[dup]);
    y_dup.push_back(y[dup]);
    std::vector<double> doubled(rows.size(), 1.0);
    doubled[dup] = 2.0;
    const auto hp = logistic(0.2, 0.05, 200);
    const auto a = train_logistic(matrix(rows_dup), y_dup, std::vector<double>(rows_dup.size(), 1.0), hp, 0);
    const auto b = train_logistic(matrix(rows), y, doubled, hp, 0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.weights[j], b.weights[j], 1e-9);
    EXPECT_NEAR(a.intercept, b.intercept, 1e-9);
  }
}

TEST(LogisticTest, DivergenceReportsEpoch) {
  const auto x = matrix({{1}, {2}, {-1}, {-3}});
  const Labels y{1, 0, 1, 0};
  try {
    train_logistic(x, y, std::vector<double>(4, 1.0), logistic(10.0, 1.0, 2000), 0);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.epoch(), 0u);
    EXPECT_LT(e.epoch(), 2000u);
  }
}

TEST(LogisticTest, NaNFeaturesRejected) {
  const auto x = matrix({{1}, {std::numeric_limits<double>::quiet_NaN()}});
  EXPECT_THROW(train_logistic(x, Labels{1, 0}, std::vector<double>(2, 1.0), logistic(0.1, 0, 5), 0), DataError);
}

TEST(FairLogisticTest, ZeroEtaMatchesPlainLogistic) {
  const auto ds = make_synthetic(400, 0.5, 3);
  const auto x = Encoder::fit(ds).apply(ds);
  const auto plain = train_logistic(x, ds.labels(), ds.weights(), logistic(0.1, 0.01, 300), 5);
  const Hyperparameters fair(Family::fair_logistic,
                             {{"learning_rate", 0.1}, {"l2_penalty", 0.01}, {"epochs", 300}, {"fairness_weight", 0}});
  const auto model = train_fair_logistic(x, ds.labels(), ds.weights(), ds.groups(0), fair, 5);
  EXPECT_EQ(model.weights, plain.weights);
  EXPECT_EQ(model.intercept, plain.intercept);
}

TEST(FairLogisticTest, CovarianceZeroWhenGroupMarginsMatch) {
  // 50/50 split; the margins of both groups are {1, 3}, so their means agree.
  const auto x = matrix({{1}, {3}, {1}, {3}});
  const Labels y{0, 1, 0, 1};
  const std::vector<double> w(4, 1.0);
  const std::vector<std::uint8_t> g{1, 1, 0, 0};
  const FairLogisticObjective obj(x, y, w, g, 0.0, 5.0);
  const std::vector<double> params{1.0, 0.0};
  EXPECT_EQ(obj.covariance(params), 0.0);
  const std::vector<double> skewed{1.0, 0.0};
  const auto skewed_x = matrix({{1}, {1}, {3}, {3}});
  const FairLogisticObjective obj2(skewed_x, y, w, g, 0.0, 5.0);
  EXPECT_NE(obj2.covariance(skewed), 0.0);
}

TEST(FairLogisticTest, GradientMatchesFiniteDifferences) {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + rng.below(16);
    const std::size_t d = 1 + rng.below(5);
    std::vector<std::vector<double>> rows(n);
    Labels y(n);
    std::vector<std::uint8_t> g(n);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) rows[i].push_back(rng.normal());
      y[i] = rng.bernoulli(0.5);
      g[i] = i % 2;
      w[i] = 0.5 + rng.uniform();
    }
    const auto x = matrix(rows);
    const FairLogisticObjective obj(x, y, w, g, 0.1 * rng.uniform(), 10.0 * rng.uniform());
    std::vector<double> params(d + 1);
    for (auto& p : params) p = rng.normal();
    std::vector<double> grad(d + 1);
    obj.value_and_gradient(params, grad);
    double diff2 = 0;
    double norm2 = 0;
    for (std::size_t k = 0; k <= d; ++k) {
      auto hi = params;
      auto lo = params;
      const double h = 1e-6;
      hi[k] += h;
      lo[k] -= h;
      const double fd = (obj.value(hi) - obj.value(lo)) / (2 * h);
      diff2 += (fd - grad[k]) * (fd - grad[k]);
      norm2 += grad[k] * grad[k] + fd * fd;
    }
    EXPECT_LT(std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-12), 1e-5);
  }
}

double parity_gap(const Model& m, const EncodedMatrix& x, const Dataset& ds) {
  const auto gc = group_confusion(decide(m.predict(x), 0.5), ds.labels(), ds.groups(0));
  return std::fabs(*fairness_metric(MetricId::statistical_parity, gc).raw);
}

TEST(FairLogisticTest, PenaltyReducesParityGap) {
  const auto ds = make_synthetic(2000, 0.5, 11);
  const auto x = Encoder::fit(ds).apply(ds);
  auto hp = [](double eta) {
    return Hyperparameters(Family::fair_logistic, {{"learning_rate", 0.05}, {"epochs", 500}, {"fairness_weight", eta}});
  };
  const auto plain = train_fair_logistic(x, ds.labels(), ds.weights(), ds.groups(0), hp(0), 1);
  const auto fair = train_fair_logistic(x, ds.labels(), ds.weights(), ds.groups(0), hp(10), 1);
  EXPECT_LT(parity_gap(fair, x, ds), parity_gap(plain, x, ds));
}

Hyperparameters forest(double trees, double depth, double frac, bool bootstrap) {
  return Hyperparameters(Family::forest, {{"n_trees", trees},
                                          {"max_depth", depth},
                                          {"feature_subsample_fraction", frac},
                                          {"bootstrap", bootstrap ? 1.0 : 0.0},
                                          {"min_leaf", 1}});
}

TEST(ForestTest, ConstantFavorableLabels) {
  const auto x = matrix({{1, 0}, {2, 1}, {3, 0}});
  const auto model = train_forest(x, Labels{1, 1, 1}, std::vector<double>(3, 1.0), forest(5, 0, 0.5, true), 3);
  for (double s : model.predict(x)) EXPECT_EQ(s, 1.0);
}

TEST(ForestTest, SingleFullTreeFitsTrainingData) {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::vector<double>> rows;
    Labels y;
    for (int i = 0; i < 200; ++i) {
      rows.push_back({rng.normal(), rng.normal(), std::floor(rng.uniform() * 3)});
      y.push_back(rng.bernoulli(0.4));
    }
    const auto x = matrix(rows);
    const auto model = train_forest(x, y, std::vector<double>(200, 1.0), forest(1, 0, 1.0, false), trial);
    EXPECT_EQ(accuracy(decide(model.predict(x), 0.5), y), 1.0);
  }
}

TEST(ForestTest, XorIsFitWithUnlimitedDepth) {
  const auto x = matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const Labels y{0, 1, 1, 0};
  const auto model = train_forest(x, y, std::vector<double>(4, 1.0), forest(1, 0, 1.0, false), 0);
  EXPECT_EQ(accuracy(decide(model.predict(x), 0.5), y), 1.0);
}

TEST(ForestTest, ScoreIsMeanOfLeaves) {
  Model m;
  m.family = Family::forest;
  for (double v : {1.0, 1.0, 1.0, 0.0}) m.trees.push_back(Tree{{TreeNode{-1, 0, -1, -1, v}}});
  const std::vector<double> row{0.3};
  EXPECT_EQ(m.score(row), 0.75);
}

TEST(ForestTest, LeafValuesInUnitInterval) {
  const auto ds = make_synthetic(500, 0.2, 9);
  const auto x = Encoder::fit(ds).apply(ds);
  const auto model = train_forest(x, ds.labels(), ds.weights(), forest(7, 4, 0.5, true), 2);
  for (const auto& t : model.trees) {
    for (const auto& n : t.nodes) {
      EXPECT_GE(n.value, 0.0);
      EXPECT_LE(n.value, 1.0);
    }
  }
}

TEST(LearnersTest, DeterministicAndScoresInRange) {
  const auto ds = make_synthetic(400, 0.4, 13);
  const auto x = Encoder::fit(ds).apply(ds);
  for (Family f : kAllFamilies) {
    const Hyperparameters hp(f);
    const auto a = train(x, ds.labels(), ds.weights(), ds.groups(0), hp, 42);
    const auto b = train(x, ds.labels(), ds.weights(), ds.groups(0), hp, 42);
    const auto sa = a.predict(x);
    EXPECT_EQ(sa, b.predict(x)) << to_string(f);
    EXPECT_EQ(a.weights, b.weights);
    for (double s : sa) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
}

TEST(DecideTest, BoundaryIsInclusive) {
  const std::vector<double> s{0.7, 0.699, 0.0, 1.0};
  EXPECT_EQ(decide(s, 0.7), (std::vector<std::uint8_t>{1, 0, 0, 1}));
  EXPECT_EQ(decide(s, 0.0), (std::vector<std::uint8_t>{1, 1, 1, 1}));
  EXPECT_THROW(decide(s, 1.2), std::invalid_argument);
  EXPECT_THROW(decide(s, -0.1), std::invalid_argument);
}

}  // namespace
}  // namespace fairsearch
