#include "disrec/attribution.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>

using namespace disrec;

namespace {

GbtModel fit_toy_probe(Index n, Index m, std::uint64_t seed,
                       Index informative = 0, Index n_trees = 15,
                       Index depth = 2) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd X(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) X(i, j) = gauss(rng);
  }
  std::vector<std::uint8_t> y;
  for (Index i = 0; i < n; ++i) y.push_back(X(i, informative) > 0.0 ? 1 : 0);
  return fit_gbt(X, y, {n_trees, depth, 0.2}, seed);
}

MatrixXd gaussian_background(Index n, Index m, std::uint64_t seed) {
  Rng rng = make_rng(seed, 77);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd B(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) B(i, j) = gauss(rng);
  }
  return B;
}

// Exact Shapley values from the permutation-weighted subset sum, sharing only
// the coalition-value definition (background imputation) with the library.
VectorXd shapley_bruteforce(const GbtModel& probe, const VectorXd& x,
                            const MatrixXd& background) {
  const Index M = probe.n_features;
  const std::uint64_t full = (1ULL << M) - 1ULL;
  std::vector<double> v(static_cast<std::size_t>(full) + 1, 0.0);
  VectorXd mixed(M);
  for (std::uint64_t mask = 0; mask <= full; ++mask) {
    double acc = 0.0;
    for (Index b = 0; b < background.rows(); ++b) {
      for (Index f = 0; f < M; ++f) {
        mixed[f] = (mask >> f) & 1ULL ? x[f] : background(b, f);
      }
      acc += predict_proba(probe, mixed);
    }
    v[mask] = acc / static_cast<double>(background.rows());
  }
  std::vector<double> fact(static_cast<std::size_t>(M) + 1, 1.0);
  for (Index i = 1; i <= M; ++i) {
    fact[static_cast<std::size_t>(i)] =
        fact[static_cast<std::size_t>(i - 1)] * static_cast<double>(i);
  }
  VectorXd phi = VectorXd::Zero(M);
  for (Index f = 0; f < M; ++f) {
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
      if ((mask >> f) & 1ULL) continue;
      const auto s = static_cast<Index>(std::popcount(mask));
      const double w = fact[static_cast<std::size_t>(s)] *
                       fact[static_cast<std::size_t>(M - s - 1)] /
                       fact[static_cast<std::size_t>(M)];
      phi[f] += w * (v[mask | (1ULL << f)] - v[mask]);
    }
  }
  return phi;
}

}  // namespace

TEST_CASE("exhaustive KernelSHAP equals brute-force Shapley") {
  Rng seeds = make_rng(123);
  for (int trial = 0; trial < 8; ++trial) {
    const Index M = 2 + static_cast<Index>(seeds() % 7);  // 2..8
    GbtModel probe = fit_toy_probe(60, M, seeds(), seeds() % M);
    MatrixXd bg = gaussian_background(8, M, seeds());
    VectorXd x = bg.row(0).transpose();
    x.array() += 0.3;
    VectorXd kernel = kernel_shap(probe, x, bg, 0, 1);  // 0 = exhaustive
    VectorXd brute = shapley_bruteforce(probe, x, bg);
    for (Index f = 0; f < M; ++f) {
      REQUIRE_THAT(kernel[f], Catch::Matchers::WithinAbs(brute[f], 1e-6));
    }
  }
}

TEST_CASE("SHAP efficiency axiom") {
  const Index M = 5;
  GbtModel probe = fit_toy_probe(80, M, 42, 1);
  MatrixXd bg = gaussian_background(12, M, 9);
  VectorXd x = VectorXd::Constant(M, 0.4);
  VectorXd phi = kernel_shap(probe, x, bg, 0, 1);

  double expected = 0.0;
  for (Index b = 0; b < bg.rows(); ++b) {
    expected += predict_proba(probe, bg.row(b).transpose());
  }
  expected /= static_cast<double>(bg.rows());
  const double fx = predict_proba(probe, x);
  CHECK_THAT(phi.sum(), Catch::Matchers::WithinAbs(fx - expected, 1e-6));
}

TEST_CASE("SHAP symmetry axiom") {
  // hand-built probe whose trees treat features 0 and 1 identically; with a
  // background and instance whose two columns match, the features are
  // symmetric players of the coalition game
  GbtModel probe;
  probe.n_features = 3;
  probe.base_score = 0.1;
  probe.shrinkage = 1.0;
  for (int f : {0, 1}) {
    RegressionTree t;
    t.nodes.resize(3);
    t.nodes[0] = {f, 0.0, 1, 2, 0.0};
    t.nodes[1] = {-1, 0.0, -1, -1, -0.8};
    t.nodes[2] = {-1, 0.0, -1, -1, 0.8};
    probe.trees.push_back(t);
  }
  {
    RegressionTree t;  // asymmetric part on feature 2
    t.nodes.resize(3);
    t.nodes[0] = {2, 0.5, 1, 2, 0.0};
    t.nodes[1] = {-1, 0.0, -1, -1, 0.3};
    t.nodes[2] = {-1, 0.0, -1, -1, -0.4};
    probe.trees.push_back(t);
  }
  Rng rng = make_rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd bg(10, 3);
  for (Index i = 0; i < 10; ++i) {
    const double a = gauss(rng);
    bg(i, 0) = a;
    bg(i, 1) = a;
    bg(i, 2) = gauss(rng);
  }
  VectorXd x(3);
  x << 0.8, 0.8, -0.2;
  VectorXd phi = kernel_shap(probe, x, bg, 0, 1);
  CHECK_THAT(phi[0], Catch::Matchers::WithinAbs(phi[1], 1e-6));
  CHECK(std::abs(phi[0]) > 1e-3);  // the symmetric features do matter
}

TEST_CASE("sampled KernelSHAP error shrinks with budget") {
  const Index M = 8;
  GbtModel probe = fit_toy_probe(80, M, 7, 2);
  MatrixXd bg = gaussian_background(10, M, 3);
  VectorXd x = VectorXd::Constant(M, 0.25);
  VectorXd exact = shapley_bruteforce(probe, x, bg);

  auto mean_err = [&](Index budget) {
    double e = 0.0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      VectorXd est = kernel_shap(probe, x, bg, budget, seed);
      e += (est - exact).norm();
    }
    return e / 6.0;
  };
  const double coarse = mean_err(40);
  const double fine = mean_err(200);
  CHECK(fine <= coarse + 1e-9);
}

TEST_CASE("lime attributes a single-feature probe to that feature") {
  const Index M = 5;
  GbtModel probe = fit_toy_probe(100, M, 11, 3, 30, 2);
  MatrixXd bg = gaussian_background(50, M, 12);
  VectorXd x = VectorXd::Zero(M);
  x[3] = 0.9;
  VectorXd attr = lime_local(probe, x, bg, 2000, 21);
  const double mass = attr.sum();
  REQUIRE(mass > 0.0);
  CHECK(attr[3] / mass >= 0.9);
}

TEST_CASE("lime on a constant probe is all-zero") {
  GbtModel probe = fit_toy_probe(40, 3, 2, 0);
  probe.trees.clear();  // constant prediction
  MatrixXd bg = gaussian_background(20, 3, 2);
  VectorXd attr = lime_local(probe, VectorXd::Zero(3), bg, 150, 5);
  CHECK(attr.norm() < 1e-9);
}

TEST_CASE("lime is deterministic per seed and validates inputs") {
  GbtModel probe = fit_toy_probe(60, 4, 3, 1);
  MatrixXd bg = gaussian_background(30, 4, 8);
  VectorXd x = VectorXd::Constant(4, 0.1);
  VectorXd a = lime_local(probe, x, bg, 200, 99);
  VectorXd b = lime_local(probe, x, bg, 200, 99);
  CHECK((a - b).norm() == 0.0);
  CHECK_THROWS_AS(lime_local(probe, x, bg, 50, 99), Error);  // < 100 samples

  SECTION("zero-variance background features are tolerated") {
    MatrixXd flat = bg;
    flat.col(2).setConstant(3.0);
    VectorXd attr = lime_local(probe, x, flat, 150, 1);
    CHECK(attr.allFinite());
  }
}

TEST_CASE("build_attribution_matrix shapes and subsampling") {
  Rng rng = make_rng(14);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index n = 50, M = 4;
  MatrixXd reps(n, M);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < M; ++j) reps(i, j) = gauss(rng);
  }
  FactorMatrix fm;
  fm.n_users = n;
  fm.K = 2;
  fm.memberships.resize(n, 2);
  for (Index u = 0; u < n; ++u) {
    fm.memberships(u, 0) = reps(u, 0) > 0.0;
    fm.memberships(u, 1) = reps(u, 0) > 0.0;  // duplicate factor
  }
  fm.factor_labels = {"a", "a_copy"};
  std::vector<Index> tr, va;
  for (Index u = 0; u < n; ++u) (u % 5 == 4 ? va : tr).push_back(u);
  ProbeGrid grid;
  grid.n_trees = {15};
  grid.max_depth = {2};
  grid.shrinkage = {0.1};
  ProbeSuite suite = fit_probe_suite(reps, fm, tr, va, grid, 1);

  AttributionBudget budget;
  budget.shap_coalitions = 0;
  budget.max_background = 20;
  AttributionMatrix S = build_attribution_matrix(
      suite, reps, AttributionMethod::shap, budget, 3);
  REQUIRE(S.M() == M);
  REQUIRE(S.K() == 2);

  // duplicate factors yield near-identical attribution columns
  const double cosine =
      S.S.col(0).dot(S.S.col(1)) / (S.S.col(0).norm() * S.S.col(1).norm());
  CHECK(cosine >= 0.99);

  // a full-set "subsample" equals the exhaustive mean
  AttributionBudget all = budget;
  all.max_users = n;
  AttributionMatrix S2 = build_attribution_matrix(
      suite, reps, AttributionMethod::shap, all, 3);
  CHECK((S.S - S2.S).norm() == 0.0);
}

TEST_CASE("global_score hand cases and bounds") {
  SECTION("identical columns give 0") {
    AttributionMatrix S;
    S.S.resize(3, 3);
    S.S << 1, 2, 4, 1, 2, 4, 1, 2, 4;
    CHECK(global_score(S, AttributionMethod::lime).value == 0.0);
  }
  SECTION("disjoint one-hot columns give 1") {
    AttributionMatrix S;
    S.S = MatrixXd::Zero(4, 3);
    S.S(0, 0) = 2.0;
    S.S(1, 1) = 0.5;
    S.S(2, 2) = 7.0;
    CHECK_THAT(global_score(S, AttributionMethod::shap).value,
               Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("hand-evaluated pair (0.5,0.5) vs (1,0)") {
    AttributionMatrix S;
    S.S.resize(2, 2);
    S.S << 0.5, 1.0, 0.5, 0.0;
    CHECK_THAT(global_score(S, AttributionMethod::lime).value,
               Catch::Matchers::WithinAbs(0.3113, 1e-4));
  }
  SECTION("random matrices stay in [0,1], symmetric, scale-invariant") {
    Rng rng = make_rng(15);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const Index M = 2 + static_cast<Index>(rng() % 6);
      const Index K = 2 + static_cast<Index>(rng() % 5);
      AttributionMatrix S;
      S.S.resize(M, K);
      for (Index i = 0; i < M; ++i) {
        for (Index j = 0; j < K; ++j) S.S(i, j) = unit(rng);
      }
      const double v = global_score(S, AttributionMethod::shap).value;
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      AttributionMatrix scaled = S;
      for (Index j = 0; j < K; ++j) scaled.S.col(j) *= 1.0 + unit(rng) * 9.0;
      REQUIRE_THAT(global_score(scaled, AttributionMethod::shap).value,
                   Catch::Matchers::WithinAbs(v, 1e-12));
      AttributionMatrix swapped = S;
      swapped.S.col(0).swap(swapped.S.col(K - 1));
      REQUIRE_THAT(global_score(swapped, AttributionMethod::shap).value,
                   Catch::Matchers::WithinAbs(v, 1e-12));
    }
  }
  SECTION("zero-mass column becomes uniform and is flagged") {
    AttributionMatrix S;
    S.S = MatrixXd::Zero(2, 2);
    S.S(0, 0) = 1.0;
    auto score = global_score(S, AttributionMethod::lime);
    CHECK(score.zero_mass_column_seen);
    CHECK(score.value > 0.0);
  }
}
