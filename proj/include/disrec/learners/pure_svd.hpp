#pragma once

#include "disrec/learners/config.hpp"
#include "disrec/rankeval.hpp"

#include <Eigen/QR>
#include <Eigen/Eigenvalues>

#include <memory>

namespace disrec {

namespace svd_detail {

// dense = sparse * dense, row-major over the CSR layout (fixed order)
inline MatrixXd spmm(const InteractionMatrix& A, const MatrixXd& B) {
  MatrixXd out = MatrixXd::Zero(A.n_users(), B.cols());
  for (Index u = 0; u < A.n_users(); ++u) {
    for (auto i : A.items_of(u)) {
      out.row(u) += B.row(static_cast<Index>(i));
    }
  }
  return out;
}

// dense = sparse^T * dense
inline MatrixXd spmm_t(const InteractionMatrix& A, const MatrixXd& B) {
  MatrixXd out = MatrixXd::Zero(A.n_items(), B.cols());
  for (Index u = 0; u < A.n_users(); ++u) {
    for (auto i : A.items_of(u)) {
      out.row(static_cast<Index>(i)) += B.row(u);
    }
  }
  return out;
}

inline MatrixXd orthonormalize(const MatrixXd& Y) {
  Eigen::HouseholderQR<MatrixXd> qr(Y);
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(Y.rows(), Y.cols());
  return Q;
}

}  // namespace svd_detail

/// Rank-M truncated SVD of the binary train matrix by randomized range
/// finding with power iterations. User representation = U * Sigma rows;
/// item factors V give scores = (U * Sigma) * V^T.
struct PureSvdModel {
  MatrixXd user_factors;  // n_users x M  (U * Sigma)
  MatrixXd item_factors;  // n_items x M  (V)
  VectorXd singular_values;
  std::uint64_t seed = 0;
  std::uint64_t train_hash = 0;

  static PureSvdModel fit(const InteractionMatrix& train,
                          const LearnerConfig& config) {
    const Index M = config.latent_dim;
    if (M > std::min(train.n_users(), train.n_items())) {
      throw Error("fit_pure_svd: latent_dim exceeds matrix rank bound");
    }
    const Index r = std::min(M + config.svd_oversample,
                             std::min(train.n_users(), train.n_items()));
    Rng rng = make_rng(config.seed, 0x5fd);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd omega(train.n_items(), r);
    for (Index i = 0; i < omega.rows(); ++i) {
      for (Index j = 0; j < r; ++j) omega(i, j) = gauss(rng);
    }

    MatrixXd Q = svd_detail::orthonormalize(svd_detail::spmm(train, omega));
    for (Index it = 0; it < config.svd_power_iters; ++it) {
      MatrixXd Z = svd_detail::orthonormalize(svd_detail::spmm_t(train, Q));
      Q = svd_detail::orthonormalize(svd_detail::spmm(train, Z));
    }

    // B = Q^T A is r x n_items; its row space carries the top singular pairs
    MatrixXd B = svd_detail::spmm_t(train, Q).transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(B * B.transpose());
    if (eig.info() != Eigen::Success) {
      throw Error("fit_pure_svd: eigendecomposition failed");
    }
    // eigenvalues ascending; take the top M
    PureSvdModel model;
    model.seed = config.seed;
    model.train_hash = train.content_hash();
    model.singular_values.resize(M);
    MatrixXd Ub(r, M);
    for (Index j = 0; j < M; ++j) {
      const Index src = r - 1 - j;
      const double ev = std::max(eig.eigenvalues()[src], 0.0);
      model.singular_values[j] = std::sqrt(ev);
      Ub.col(j) = eig.eigenvectors().col(src);
    }
    MatrixXd U = Q * Ub;  // n_users x M, orthonormal columns
    model.user_factors = U * model.singular_values.asDiagonal();
    model.item_factors.resize(train.n_items(), M);
    // V = A^T U S^{-1}; zero singular values yield zero columns
    MatrixXd AtU = svd_detail::spmm_t(train, U);
    for (Index j = 0; j < M; ++j) {
      const double s = model.singular_values[j];
      model.item_factors.col(j) =
          s > 1e-12 ? VectorXd(AtU.col(j) / s) : VectorXd::Zero(train.n_items());
    }
    if (!model.user_factors.allFinite() || !model.item_factors.allFinite()) {
      const double residual =
          (svd_detail::spmm(train, model.item_factors) -
           model.user_factors).norm();
      throw Error("fit_pure_svd: non-finite factors (residual " +
                  format_double(residual) + ")");
    }
    return model;
  }

  RepresentationMatrix representation() const {
    RepresentationMatrix rep;
    rep.values = user_factors;
    rep.model_tag = "pure_svd";
    rep.seed = seed;
    return rep;
  }

  /// Encoding of interaction rows. The fitted matrix reproduces the fit
  /// output exactly; other matrices are folded in as z = x V.
  RepresentationMatrix encode(const InteractionMatrix& interactions) const {
    RepresentationMatrix rep;
    rep.values = interactions.content_hash() == train_hash
                     ? user_factors
                     : svd_detail::spmm(interactions, item_factors);
    rep.model_tag = "pure_svd";
    rep.seed = seed;
    return rep;
  }

  ScoreMatrix scorer(const InteractionMatrix& exclude) const {
    auto self = std::make_shared<PureSvdModel>(*this);
    ScoreMatrix s;
    s.n_users = user_factors.rows();
    s.n_items = item_factors.rows();
    s.exclude = &exclude;
    s.score_user = [self](Index u) {
      return VectorXd(self->item_factors * self->user_factors.row(u).transpose());
    };
    return s;
  }
};

}  // namespace disrec
