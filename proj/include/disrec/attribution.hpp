#pragma once

#include "disrec/gbt.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace disrec {

/// M x K matrix: column j holds the mean absolute per-dimension attribution
/// of probe j over the evaluated user representations.
struct AttributionMatrix {
  MatrixXd S;
  Index M() const { return S.rows(); }
  Index K() const { return S.cols(); }
};

enum class AttributionMethod { lime, shap };

inline const char* to_string(AttributionMethod m) {
  return m == AttributionMethod::lime ? "lime" : "shap";
}

struct GlobalInterpScore {
  double value = 0.0;
  AttributionMethod method = AttributionMethod::lime;
  Index n_pairs = 0;
  bool zero_mass_column_seen = false;
};

// ---------------------------------------------------------------------------
// LIME
// ---------------------------------------------------------------------------

/// Local surrogate attribution: perturbations drawn per feature from a
/// normal fit to the background, weighted by exp(-d^2 / w^2) with
/// w = 0.75 sqrt(M) on standardized distances, then a weighted ridge fit on
/// standardized features. Returns absolute surrogate coefficients.
inline VectorXd lime_local(const GbtModel& probe,
                           const Eigen::Ref<const VectorXd>& x,
                           const MatrixXd& background, Index n_samples,
                           std::uint64_t seed, double ridge = 1.0) {
  const Index M = probe.n_features;
  if (x.size() != M) throw Error("lime_local: wrong input dimensionality");
  if (background.cols() != M) throw Error("lime_local: wrong background shape");
  if (n_samples < 100) throw Error("lime_local: n_samples must be >= 100");

  VectorXd mean = background.colwise().mean();
  VectorXd stddev(M);
  for (Index f = 0; f < M; ++f) {
    const double var =
        (background.col(f).array() - mean[f]).square().mean();
    stddev[f] = std::sqrt(var);
    if (stddev[f] <= 0.0) {
      // zero-variance feature: perturb within a small epsilon of its scale
      stddev[f] = 1e-3 * std::max(1.0, std::abs(mean[f]));
    }
  }

  Rng rng = make_rng(seed, 0x11ee);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double width = 0.75 * std::sqrt(static_cast<double>(M));

  MatrixXd Z(n_samples, M);   // standardized perturbations
  VectorXd yv(n_samples), w(n_samples);
  const VectorXd x_std = (x - mean).cwiseQuotient(stddev);
  for (Index s = 0; s < n_samples; ++s) {
    VectorXd z(M);
    if (s == 0) {
      z = x;  // the instance itself anchors the surrogate
    } else {
      for (Index f = 0; f < M; ++f) z[f] = mean[f] + stddev[f] * gauss(rng);
    }
    const VectorXd z_std = (z - mean).cwiseQuotient(stddev);
    const double d2 = (z_std - x_std).squaredNorm();
    Z.row(s) = z_std.transpose();
    w[s] = std::exp(-d2 / (width * width));
    yv[s] = predict_proba(probe, z);
  }

  // weighted ridge with unpenalized intercept (absorbed by weighted centering)
  const double wsum = w.sum();
  const VectorXd zc = (Z.transpose() * w) / wsum;
  const double yc = yv.dot(w) / wsum;
  MatrixXd Zc = Z.rowwise() - zc.transpose();
  VectorXd yd = yv.array() - yc;
  MatrixXd A = Zc.transpose() * w.asDiagonal() * Zc +
               ridge * MatrixXd::Identity(M, M);
  VectorXd b = Zc.transpose() * (w.asDiagonal() * yd);
  VectorXd coef = A.ldlt().solve(b);
  return coef.cwiseAbs();
}

// ---------------------------------------------------------------------------
// KernelSHAP
// ---------------------------------------------------------------------------

namespace shap_detail {

inline double binom(Index n, Index k) {
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) {
    r *= static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

// mean prediction over background rows with features in `mask` taken from x
inline double coalition_value(const GbtModel& probe,
                              const Eigen::Ref<const VectorXd>& x,
                              const MatrixXd& background, std::uint64_t mask) {
  const Index M = x.size();
  double acc = 0.0;
  VectorXd mixed(M);
  for (Index b = 0; b < background.rows(); ++b) {
    for (Index f = 0; f < M; ++f) {
      mixed[f] = (mask >> f) & 1ULL ? x[f] : background(b, f);
    }
    acc += predict_proba(probe, mixed);
  }
  return acc / static_cast<double>(background.rows());
}

}  // namespace shap_detail

/// Signed KernelSHAP attributions. Coalitions are exhaustive when the budget
/// covers all 2^M - 2 proper subsets (then the result equals exact Shapley
/// values); otherwise subsets are sampled with Shapley-kernel size weights.
/// The efficiency constraint (attributions sum to f(x) - E[f]) is imposed by
/// eliminating the last coefficient.
inline VectorXd kernel_shap(const GbtModel& probe,
                            const Eigen::Ref<const VectorXd>& x,
                            const MatrixXd& background, Index n_coalitions,
                            std::uint64_t seed) {
  const Index M = probe.n_features;
  if (x.size() != M) throw Error("kernel_shap: wrong input dimensionality");
  if (background.rows() == 0) throw Error("kernel_shap: empty background");
  if (M == 1) {
    VectorXd phi(1);
    phi[0] = shap_detail::coalition_value(probe, x, background, 1ULL) -
             shap_detail::coalition_value(probe, x, background, 0ULL);
    return phi;
  }
  if (M > 62) throw Error("kernel_shap: M too large for mask enumeration");

  const double v_empty =
      shap_detail::coalition_value(probe, x, background, 0ULL);
  const double v_full = shap_detail::coalition_value(
      probe, x, background, (1ULL << M) - 1ULL);
  const double delta = v_full - v_empty;

  std::vector<std::uint64_t> masks;
  std::vector<double> weights;
  const std::uint64_t n_proper = (1ULL << M) - 2;
  const bool exhaustive =
      n_coalitions <= 0 || static_cast<std::uint64_t>(n_coalitions) >= n_proper;
  if (exhaustive) {
    masks.reserve(n_proper);
    for (std::uint64_t mask = 1; mask < (1ULL << M) - 1ULL; ++mask) {
      const auto s = static_cast<Index>(std::popcount(mask));
      masks.push_back(mask);
      weights.push_back(static_cast<double>(M - 1) /
                        (shap_detail::binom(M, s) * static_cast<double>(s) *
                         static_cast<double>(M - s)));
    }
  } else {
    // size-weighted sampling: p(s) proportional to (M-1)/(s(M-s))
    std::vector<double> size_cdf(static_cast<std::size_t>(M - 1));
    double acc = 0.0;
    for (Index s = 1; s < M; ++s) {
      acc += static_cast<double>(M - 1) /
             (static_cast<double>(s) * static_cast<double>(M - s));
      size_cdf[static_cast<std::size_t>(s - 1)] = acc;
    }
    Rng rng = make_rng(seed, 0x5a9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Index> all_features(static_cast<std::size_t>(M));
    std::iota(all_features.begin(), all_features.end(), Index{0});
    for (Index c = 0; c < n_coalitions; ++c) {
      const double target = unit(rng) * acc;
      Index size = M - 1;
      for (Index s = 1; s < M; ++s) {
        if (size_cdf[static_cast<std::size_t>(s - 1)] >= target) {
          size = s;
          break;
        }
      }
      std::shuffle(all_features.begin(), all_features.end(), rng);
      std::uint64_t mask = 0;
      for (Index f = 0; f < size; ++f) {
        mask |= 1ULL << all_features[static_cast<std::size_t>(f)];
      }
      masks.push_back(mask);
      weights.push_back(1.0);  // sampling frequency already carries the kernel
    }
  }

  // regression on z_i - z_M for i < M after eliminating phi_M via the
  // efficiency constraint
  MatrixXd A = MatrixXd::Zero(M - 1, M - 1);
  VectorXd rhs = VectorXd::Zero(M - 1);
  VectorXd row(M - 1);
  for (std::size_t c = 0; c < masks.size(); ++c) {
    const std::uint64_t mask = masks[c];
    const double v = shap_detail::coalition_value(probe, x, background, mask);
    const double z_last = static_cast<double>((mask >> (M - 1)) & 1ULL);
    for (Index f = 0; f < M - 1; ++f) {
      row[f] = static_cast<double>((mask >> f) & 1ULL) - z_last;
    }
    const double target = v - v_empty - z_last * delta;
    A.noalias() += weights[c] * row * row.transpose();
    rhs.noalias() += weights[c] * target * row;
  }
  VectorXd head = A.ldlt().solve(rhs);
  if (!head.allFinite()) {
    head = (A + 1e-8 * MatrixXd::Identity(M - 1, M - 1)).ldlt().solve(rhs);
  }
  VectorXd phi(M);
  phi.head(M - 1) = head;
  phi[M - 1] = delta - head.sum();
  return phi;
}

/// Absolute KernelSHAP attributions (the aggregation input).
inline VectorXd shap_local(const GbtModel& probe,
                           const Eigen::Ref<const VectorXd>& x,
                           const MatrixXd& background, Index n_coalitions,
                           std::uint64_t seed) {
  return kernel_shap(probe, x, background, n_coalitions, seed).cwiseAbs();
}

// ---------------------------------------------------------------------------
// aggregation and the global interpretability score
// ---------------------------------------------------------------------------

struct AttributionBudget {
  Index lime_samples = 200;
  Index shap_coalitions = 256;
  Index max_users = 0;        // 0 = all users
  Index max_background = 100; // background rows for imputation
};

/// Column j = mean absolute local attribution of probe j over all (or a
/// seeded subsample of) user representations.
inline AttributionMatrix build_attribution_matrix(const ProbeSuite& suite,
                                                  const MatrixXd& reps,
                                                  AttributionMethod method,
                                                  const AttributionBudget& budget,
                                                  std::uint64_t seed) {
  if (suite.probes.empty()) throw Error("build_attribution_matrix: empty suite");
  const Index M = suite.probes.front().n_features;
  const auto K = static_cast<Index>(suite.probes.size());

  std::vector<Index> users(static_cast<std::size_t>(reps.rows()));
  std::iota(users.begin(), users.end(), Index{0});
  if (budget.max_users > 0 &&
      budget.max_users < static_cast<Index>(users.size())) {
    Rng rng = make_rng(seed, 0xab5);
    std::shuffle(users.begin(), users.end(), rng);
    users.resize(static_cast<std::size_t>(budget.max_users));
    std::sort(users.begin(), users.end());
  }

  MatrixXd bg = reps;
  if (budget.max_background > 0 && budget.max_background < reps.rows()) {
    std::vector<Index> rows(static_cast<std::size_t>(reps.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});
    Rng rng = make_rng(seed, 0xb4c);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(budget.max_background));
    std::sort(rows.begin(), rows.end());
    bg.resize(budget.max_background, M);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      bg.row(static_cast<Index>(r)) = reps.row(rows[r]);
    }
  }

  AttributionMatrix out;
  out.S = MatrixXd::Zero(M, K);
  for (Index j = 0; j < K; ++j) {
    VectorXd acc = VectorXd::Zero(M);
    for (std::size_t uidx = 0; uidx < users.size(); ++uidx) {
      const Index u = users[uidx];
      const std::uint64_t local_seed =
          substream(seed, (static_cast<std::uint64_t>(j) << 32) ^
                              static_cast<std::uint64_t>(u));
      if (method == AttributionMethod::lime) {
        acc += lime_local(suite.probes[static_cast<std::size_t>(j)],
                          reps.row(u).transpose(), bg, budget.lime_samples,
                          local_seed);
      } else {
        acc += shap_local(suite.probes[static_cast<std::size_t>(j)],
                          reps.row(u).transpose(), bg, budget.shap_coalitions,
                          local_seed);
      }
    }
    out.S.col(j) = acc / static_cast<double>(users.size());
  }
  return out;
}

namespace js_detail {

// base-2 Jensen-Shannon divergence between distributions p and q
inline double js_divergence(const Eigen::Ref<const VectorXd>& p,
                            const Eigen::Ref<const VectorXd>& q) {
  double js = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return js;
}

}  // namespace js_detail

/// L1-normalize each column of S into a distribution and return the mean
/// base-2 JS divergence over all unordered column pairs. Zero-mass columns
/// are treated as uniform and flagged.
inline GlobalInterpScore global_score(const AttributionMatrix& attr,
                                      AttributionMethod method) {
  const Index M = attr.M(), K = attr.K();
  if (K < 2) throw Error("global_score: need at least 2 probes");
  if (!attr.S.allFinite() || (attr.S.array() < 0.0).any()) {
    throw Error("global_score: attributions must be finite and nonnegative");
  }
  GlobalInterpScore score;
  score.method = method;
  MatrixXd P(M, K);
  for (Index j = 0; j < K; ++j) {
    const double mass = attr.S.col(j).sum();
    if (mass > 0.0) {
      P.col(j) = attr.S.col(j) / mass;
    } else {
      P.col(j).setConstant(1.0 / static_cast<double>(M));
      score.zero_mass_column_seen = true;
    }
  }
  double acc = 0.0;
  for (Index a = 0; a < K; ++a) {
    for (Index b = a + 1; b < K; ++b) {
      acc += js_detail::js_divergence(P.col(a), P.col(b));
    }
  }
  score.n_pairs = K * (K - 1) / 2;
  score.value = acc / static_cast<double>(score.n_pairs);
  return score;
}

}  // namespace disrec
