#pragma once

#include "disrec/gbt.hpp"

#include <cmath>
#include <vector>

namespace disrec {

/// M x K matrix of probe feature importances: F(i, j) is the importance of
/// latent dimension i for predicting factor j.
struct ImportanceMatrix {
  MatrixXd F;
  Index M() const { return F.rows(); }
  Index K() const { return F.cols(); }

  void validate() const {
    if (!F.allFinite()) throw Error("ImportanceMatrix: non-finite entries");
    if ((F.array() < 0.0).any()) {
      throw Error("ImportanceMatrix: negative entries");
    }
  }
};

struct DciScores {
  double D = 0.0;
  double C = 0.0;
  VectorXd per_dim_D;     // length M
  VectorXd per_factor_C;  // length K
  VectorXd alpha;         // row-mass weights, sum 1
  VectorXd beta;          // column-mass weights, sum 1
};

namespace dci_detail {

// Entropy of a normalized distribution in base `base`, with 0 log 0 := 0.
inline double entropy(const Eigen::Ref<const VectorXd>& p, double base) {
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h / std::log(base);
}

}  // namespace dci_detail

/// Disentanglement: row-normalize F, per-dimension score 1 - H_K(row),
/// weighted by row mass over total mass. Rows with zero mass score 0 and
/// carry zero weight.
inline double disentanglement(const ImportanceMatrix& imp,
                              DciScores* detail = nullptr) {
  imp.validate();
  const Index M = imp.M(), K = imp.K();
  if (K < 2) throw Error("disentanglement: K must be >= 2 (log base K)");
  const double total = imp.F.sum();
  if (total <= 0.0) throw Error("disentanglement: no importance mass");
  VectorXd per_dim(M), alpha(M);
  for (Index i = 0; i < M; ++i) {
    const double row_mass = imp.F.row(i).sum();
    alpha[i] = row_mass / total;
    if (row_mass > 0.0) {
      VectorXd p = imp.F.row(i).transpose() / row_mass;
      per_dim[i] = 1.0 - dci_detail::entropy(p, static_cast<double>(K));
    } else {
      per_dim[i] = 0.0;
    }
  }
  const double D = alpha.dot(per_dim);
  if (detail != nullptr) {
    detail->D = D;
    detail->per_dim_D = per_dim;
    detail->alpha = alpha;
  }
  return D;
}

/// Completeness: column-normalize F, per-factor score 1 - H_M(column),
/// weighted by column mass over total mass.
inline double completeness(const ImportanceMatrix& imp,
                           DciScores* detail = nullptr) {
  imp.validate();
  const Index M = imp.M(), K = imp.K();
  if (M < 2) throw Error("completeness: M must be >= 2 (log base M)");
  const double total = imp.F.sum();
  if (total <= 0.0) throw Error("completeness: no importance mass");
  VectorXd per_factor(K), beta(K);
  for (Index j = 0; j < K; ++j) {
    const double col_mass = imp.F.col(j).sum();
    beta[j] = col_mass / total;
    if (col_mass > 0.0) {
      VectorXd p = imp.F.col(j) / col_mass;
      per_factor[j] = 1.0 - dci_detail::entropy(p, static_cast<double>(M));
    } else {
      per_factor[j] = 0.0;
    }
  }
  const double C = beta.dot(per_factor);
  if (detail != nullptr) {
    detail->C = C;
    detail->per_factor_C = per_factor;
    detail->beta = beta;
  }
  return C;
}

inline DciScores dci_scores(const ImportanceMatrix& imp) {
  DciScores s;
  disentanglement(imp, &s);
  completeness(imp, &s);
  return s;
}

/// Column j = probe j's importance vector.
inline ImportanceMatrix importance_from_suite(const ProbeSuite& suite) {
  if (suite.probes.empty()) throw Error("importance_from_suite: empty suite");
  const Index M = suite.probes.front().n_features;
  ImportanceMatrix imp;
  imp.F.resize(M, static_cast<Index>(suite.probes.size()));
  for (std::size_t j = 0; j < suite.probes.size(); ++j) {
    if (suite.probes[j].n_features != M) {
      throw Error("importance_from_suite: probes disagree on M");
    }
    imp.F.col(static_cast<Index>(j)) = suite.probes[j].importances;
  }
  return imp;
}

}  // namespace disrec
