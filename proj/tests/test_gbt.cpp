#include "disrec/gbt.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace disrec;

namespace {

std::vector<std::uint8_t> labels_from(const VectorXd& v, double threshold) {
  std::vector<std::uint8_t> y;
  for (Index i = 0; i < v.size(); ++i) y.push_back(v[i] > threshold ? 1 : 0);
  return y;
}

double train_accuracy(const GbtModel& m, const MatrixXd& X,
                      const std::vector<std::uint8_t>& y) {
  Index correct = 0;
  for (Index i = 0; i < X.rows(); ++i) {
    const bool pred = predict_proba(m, X.row(i).transpose()) >= 0.5;
    if (pred == static_cast<bool>(y[static_cast<std::size_t>(i)])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(X.rows());
}

}  // namespace

TEST_CASE("threshold-separable 1-D data is learned perfectly") {
  MatrixXd X(20, 1);
  for (Index i = 0; i < 20; ++i) X(i, 0) = static_cast<double>(i);
  auto y = labels_from(X.col(0), 9.5);
  GbtModel m = fit_gbt(X, y, {20, 2, 0.3});
  CHECK(train_accuracy(m, X, y) == 1.0);
  REQUIRE(m.importances.size() == 1);
  CHECK(m.importances[0] == 1.0);
}

TEST_CASE("XOR needs depth 2") {
  MatrixXd X(4, 2);
  X << 0, 0, 0, 1, 1, 0, 1, 1;
  std::vector<std::uint8_t> y = {0, 1, 1, 0};

  GbtModel stumps = fit_gbt(X, y, {200, 1, 0.1});
  CHECK(train_accuracy(stumps, X, y) <= 0.75);

  GbtModel deep = fit_gbt(X, y, {50, 2, 0.3});
  CHECK(train_accuracy(deep, X, y) == 1.0);
}

TEST_CASE("duplicated feature shares split mass with the original") {
  Rng rng = make_rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd X(200, 3);
  for (Index i = 0; i < 200; ++i) {
    for (Index j = 0; j < 3; ++j) X(i, j) = gauss(rng);
  }
  auto y = labels_from(
      VectorXd(X.col(0) + 0.7 * X.col(1) + 0.1 * X.col(2)), 0.0);
  GbtModel base = fit_gbt(X, y, {60, 3, 0.1});

  MatrixXd Xdup(200, 4);
  Xdup << X, X.col(0);  // column 3 duplicates column 0
  GbtModel dup = fit_gbt(Xdup, y, {60, 3, 0.1});
  const double combined = dup.importances[0] + dup.importances[3];
  CHECK_THAT(combined, Catch::Matchers::WithinAbs(base.importances[0], 0.05));
}

TEST_CASE("predict_proba") {
  SECTION("zero trees reduce to the base rate") {
    MatrixXd X(4, 1);
    X << 0, 1, 2, 3;
    std::vector<std::uint8_t> y = {0, 0, 1, 1};
    GbtModel m = fit_gbt(X, y, {1, 1, 0.1});
    m.trees.clear();
    CHECK_THAT(predict_proba(m, X.row(0).transpose()),
               Catch::Matchers::WithinAbs(0.5, 1e-12));  // base rate 0.5
  }
  SECTION("monotone data gives non-decreasing probabilities") {
    MatrixXd X(30, 1);
    for (Index i = 0; i < 30; ++i) X(i, 0) = static_cast<double>(i) / 3.0;
    auto y = labels_from(X.col(0), 5.0);
    GbtModel m = fit_gbt(X, y, {40, 2, 0.1});
    double prev = 0.0;
    for (double v = -1.0; v <= 11.0; v += 0.25) {
      VectorXd x(1);
      x << v;
      const double p = predict_proba(m, x);
      CHECK(p >= prev - 1e-12);
      prev = p;
    }
  }
  SECTION("hand-built two-node tree evaluates by manual trace") {
    GbtModel m;
    m.n_features = 2;
    m.base_score = 0.2;
    m.shrinkage = 0.5;
    RegressionTree t;
    t.nodes.resize(3);
    t.nodes[0] = {1, 0.75, 1, 2, 0.0};   // split on feature 1 at 0.75
    t.nodes[1] = {-1, 0.0, -1, -1, -1.5};
    t.nodes[2] = {-1, 0.0, -1, -1, 2.0};
    m.trees.push_back(t);
    VectorXd lo(2), hi(2);
    lo << 9.0, 0.5;
    hi << 9.0, 0.9;
    CHECK_THAT(predict_proba(m, lo),
               Catch::Matchers::WithinAbs(sigmoid(0.2 + 0.5 * -1.5), 1e-15));
    CHECK_THAT(predict_proba(m, hi),
               Catch::Matchers::WithinAbs(sigmoid(0.2 + 0.5 * 2.0), 1e-15));
  }
  SECTION("wrong dimensionality is a shape error") {
    MatrixXd X(4, 2);
    X << 0, 0, 0, 1, 1, 0, 1, 1;
    std::vector<std::uint8_t> y = {0, 1, 1, 0};
    GbtModel m = fit_gbt(X, y, {5, 2, 0.1});
    VectorXd bad(3);
    bad << 1, 2, 3;
    CHECK_THROWS_AS(predict_proba(m, bad), Error);
  }
}

TEST_CASE("single-class labels are rejected") {
  MatrixXd X(4, 1);
  X << 0, 1, 2, 3;
  CHECK_THROWS_WITH(fit_gbt(X, {1, 1, 1, 1}, {10, 2, 0.1}),
                    Catch::Matchers::ContainsSubstring("degenerate labels"));
}

TEST_CASE("importances are nonnegative and sum to 1 when splits exist") {
  Rng rng = make_rng(6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd X(80, 4);
    for (Index i = 0; i < 80; ++i) {
      for (Index j = 0; j < 4; ++j) X(i, j) = gauss(rng);
    }
    auto y = labels_from(VectorXd(X.col(trial % 4)), 0.0);
    GbtModel m = fit_gbt(X, y, {30, 3, 0.1});
    CHECK((m.importances.array() >= 0.0).all());
    CHECK_THAT(m.importances.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("training logistic loss is non-increasing over stages") {
  Rng rng = make_rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd X(100, 3);
  for (Index i = 0; i < 100; ++i) {
    for (Index j = 0; j < 3; ++j) X(i, j) = gauss(rng);
  }
  auto y = labels_from(VectorXd(X.col(0) - X.col(2)), 0.0);
  GbtModel full = fit_gbt(X, y, {80, 2, 0.1});
  double prev = std::numeric_limits<double>::infinity();
  for (Index n : {1, 5, 10, 20, 40, 80}) {
    const double loss = logistic_loss(truncate_trees(full, n), X, y);
    CHECK(loss <= prev + 1e-12);
    prev = loss;
  }
}

TEST_CASE("rank transform preserves decisions (partition invariance)") {
  Rng rng = make_rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd X(60, 2);
  for (Index i = 0; i < 60; ++i) {
    for (Index j = 0; j < 2; ++j) X(i, j) = gauss(rng);
  }
  auto y = labels_from(VectorXd(X.col(0) * 0.8 + X.col(1)), 0.0);

  // per-feature rank transform (strictly increasing on the sample)
  MatrixXd Xr(60, 2);
  for (Index j = 0; j < 2; ++j) {
    std::vector<Index> ord(60);
    std::iota(ord.begin(), ord.end(), Index{0});
    std::sort(ord.begin(), ord.end(),
              [&](Index a, Index b) { return X(a, j) < X(b, j); });
    for (Index r = 0; r < 60; ++r) {
      Xr(ord[static_cast<std::size_t>(r)], j) = std::exp(
          static_cast<double>(r) * 0.1);
    }
  }
  GbtModel raw = fit_gbt(X, y, {40, 3, 0.1});
  GbtModel ranked = fit_gbt(Xr, y, {40, 3, 0.1});
  CHECK(train_accuracy(raw, X, y) == train_accuracy(ranked, Xr, y));
  // identical split structure implies identical importances
  for (Index j = 0; j < 2; ++j) {
    CHECK_THAT(ranked.importances[j],
               Catch::Matchers::WithinAbs(raw.importances[j], 1e-9));
  }
}

TEST_CASE("truncate_trees equals a shorter fit") {
  Rng rng = make_rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd X(50, 2);
  for (Index i = 0; i < 50; ++i) {
    for (Index j = 0; j < 2; ++j) X(i, j) = gauss(rng);
  }
  auto y = labels_from(VectorXd(X.col(0)), 0.0);
  GbtModel long_fit = fit_gbt(X, y, {30, 2, 0.1});
  GbtModel short_fit = fit_gbt(X, y, {12, 2, 0.1});
  GbtModel truncated = truncate_trees(long_fit, 12);
  REQUIRE(truncated.trees.size() == 12);
  for (Index i = 0; i < 50; ++i) {
    CHECK(truncated.decision(X.row(i).transpose()) ==
          short_fit.decision(X.row(i).transpose()));
  }
  CHECK((truncated.importances - short_fit.importances).norm() == 0.0);
}

TEST_CASE("fit_probe_suite") {
  Rng rng = make_rng(10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index n = 200, K = 3;
  FactorMatrix fm;
  fm.n_users = n;
  fm.K = K;
  fm.memberships.resize(n, K);
  for (Index u = 0; u < n; ++u) {
    for (Index j = 0; j < K; ++j) fm.memberships(u, j) = unit(rng) < 0.4;
  }
  fm.factor_labels = {"f0", "f1", "f2"};

  std::vector<Index> tr, va;
  for (Index u = 0; u < n; ++u) (u % 4 == 3 ? va : tr).push_back(u);

  SECTION("representations identical to factors give near-perfect accuracy") {
    MatrixXd X(n, K);
    for (Index u = 0; u < n; ++u) {
      for (Index j = 0; j < K; ++j) {
        X(u, j) = static_cast<double>(fm.memberships(u, j));
      }
    }
    ProbeGrid grid;
    grid.n_trees = {20, 50};
    grid.max_depth = {2};
    grid.shrinkage = {0.1};
    ProbeSuite suite = fit_probe_suite(X, fm, tr, va, grid, 1);
    REQUIRE(suite.probes.size() == static_cast<std::size_t>(K));
    for (double acc : suite.val_balanced_accuracy) CHECK(acc >= 0.99);
  }
  SECTION("random representations stay near chance") {
    MatrixXd X(n, 5);
    Rng rng2 = make_rng(123);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index u = 0; u < n; ++u) {
      for (Index j = 0; j < 5; ++j) X(u, j) = gauss(rng2);
    }
    ProbeGrid grid;
    grid.n_trees = {20};
    grid.max_depth = {2};
    grid.shrinkage = {0.1};
    ProbeSuite suite = fit_probe_suite(X, fm, tr, va, grid, 1);
    for (double acc : suite.val_balanced_accuracy) {
      CHECK(acc > 0.35);
      CHECK(acc < 0.68);
    }
  }
  SECTION("overlapping train/val sets are rejected") {
    MatrixXd X = MatrixXd::Zero(n, 2);
    CHECK_THROWS_AS(fit_probe_suite(X, fm, tr, tr, {}, 1), Error);
  }
}
