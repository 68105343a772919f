#pragma once

#include "disrec/learners/config.hpp"
#include "disrec/rankeval.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <vector>

namespace disrec {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Adam update rule, beta1=0.9, beta2=0.999, eps=1e-8, applied to a list of
/// parameter matrices in fixed order.
class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}

  void step(std::vector<MatrixXd*> params, const std::vector<MatrixXd>& grads) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(MatrixXd::Zero(p->rows(), p->cols()));
        v_.emplace_back(MatrixXd::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(0.9, t_);
    const double bc2 = 1.0 - std::pow(0.999, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = 0.9 * m_[i] + 0.1 * grads[i];
      v_[i] = 0.999 * v_[i].array() + 0.001 * grads[i].array().square();
      params[i]->array() -=
          lr_ * (m_[i].array() / bc1) /
          ((v_[i].array() / bc2).sqrt() + 1e-8);
    }
  }

 private:
  double lr_;
  long t_ = 0;
  std::vector<MatrixXd> m_, v_;
};

// ---------------------------------------------------------------------------
// shared batch plumbing
// ---------------------------------------------------------------------------

namespace ae_detail {

/// Dense batch of L2-normalized user rows. Rows are binary before
/// normalization; empty rows stay zero.
inline void fill_normalized_batch(const InteractionMatrix& data,
                                  const std::vector<Index>& users,
                                  MatrixXd& X_raw, MatrixXd& X_norm) {
  const auto B = static_cast<Index>(users.size());
  X_raw.setZero(B, data.n_items());
  X_norm.setZero(B, data.n_items());
  for (Index b = 0; b < B; ++b) {
    auto row = data.items_of(users[static_cast<std::size_t>(b)]);
    for (auto i : row) X_raw(b, static_cast<Index>(i)) = 1.0;
    if (!row.empty()) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(row.size()));
      for (auto i : row) X_norm(b, static_cast<Index>(i)) = inv;
    }
  }
}

inline MatrixXd xavier(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

inline void log_softmax_rows(const MatrixXd& logits, MatrixXd& log_sm,
                             MatrixXd& softmax) {
  log_sm.resizeLike(logits);
  softmax.resizeLike(logits);
  for (Index b = 0; b < logits.rows(); ++b) {
    const double mx = logits.row(b).maxCoeff();
    const double lse =
        std::log((logits.row(b).array() - mx).exp().sum()) + mx;
    log_sm.row(b) = logits.row(b).array() - lse;
    softmax.row(b) = log_sm.row(b).array().exp();
  }
}

}  // namespace ae_detail

// ---------------------------------------------------------------------------
// MultiDAE / MultiVAE / beta-VAE
// ---------------------------------------------------------------------------

/// Encoder-decoder with one tanh hidden layer each side and a multinomial
/// log-likelihood over items:
///   x -> normalize -> dropout -> tanh(W1) -> W2 -> z (or mu, logvar)
///   z -> tanh(W3) -> W4 -> logits -> log-softmax
/// The VAE variants add beta * KL(q(z|x) || N(0, I)); MultiVAE anneals beta
/// linearly to its target, beta-VAE keeps it fixed.
class MultAeModel {
 public:
  struct Grads {
    MatrixXd W1, b1, W2, b2, W3, b3, W4, b4;
  };

  MultAeModel() = default;

  MultAeModel(const LearnerConfig& config, Index n_items) : config_(config) {
    config_.validate();
    variational_ = config.model != ModelKind::multi_dae;
    const Index I = n_items;
    const Index H = config.hidden_dim;
    const Index M = config.latent_dim;
    const Index E = variational_ ? 2 * M : M;
    Rng rng = make_rng(config.seed, 0xae0);
    W1_ = ae_detail::xavier(I, H, rng);
    b1_ = MatrixXd::Zero(1, H);
    W2_ = ae_detail::xavier(H, E, rng);
    b2_ = MatrixXd::Zero(1, E);
    W3_ = ae_detail::xavier(M, H, rng);
    b3_ = MatrixXd::Zero(1, H);
    W4_ = ae_detail::xavier(H, I, rng);
    b4_ = MatrixXd::Zero(1, I);
  }

  bool variational() const { return variational_; }
  const LearnerConfig& config() const { return config_; }
  Index n_items() const { return W1_.rows(); }

  /// Mean loss over the batch and parameter gradients. `eps` supplies the
  /// reparameterization noise (B x M; ignored for the DAE); `keep_mask` is
  /// the inverted-dropout mask on the normalized input (empty = no dropout).
  double loss_and_grad(const MatrixXd& X_raw, const MatrixXd& X_norm,
                       const MatrixXd& eps, const MatrixXd& keep_mask,
                       double beta_eff, Grads* grads) const {
    const Index B = X_raw.rows();
    const Index M = config_.latent_dim;

    MatrixXd Xd = keep_mask.size() > 0
                      ? MatrixXd(X_norm.cwiseProduct(keep_mask))
                      : X_norm;
    MatrixXd H1 = ((Xd * W1_).rowwise() + b1_.row(0)).array().tanh();
    MatrixXd Aenc = (H1 * W2_).rowwise() + b2_.row(0);

    MatrixXd Mu, Lv, Z;
    if (variational_) {
      Mu = Aenc.leftCols(M);
      Lv = Aenc.rightCols(M);
      Z = eps.size() > 0
              ? MatrixXd(Mu.array() + (0.5 * Lv.array()).exp() * eps.array())
              : Mu;
    } else {
      Z = Aenc;
    }
    MatrixXd H2 = ((Z * W3_).rowwise() + b3_.row(0)).array().tanh();
    MatrixXd logits = (H2 * W4_).rowwise() + b4_.row(0);
    MatrixXd log_sm, softmax;
    ae_detail::log_softmax_rows(logits, log_sm, softmax);

    double rec = -(X_raw.array() * log_sm.array()).sum();
    double kl = 0.0;
    if (variational_) {
      kl = 0.5 * (Lv.array().exp() + Mu.array().square() - 1.0 - Lv.array())
                     .sum();
    }
    const double loss = (rec + beta_eff * kl) / static_cast<double>(B);
    if (grads == nullptr) return loss;

    const double invB = 1.0 / static_cast<double>(B);
    VectorXd row_counts = X_raw.rowwise().sum();
    MatrixXd dLogits =
        invB * (softmax.array().colwise() * row_counts.array() -
                X_raw.array());
    grads->W4 = H2.transpose() * dLogits;
    grads->b4 = dLogits.colwise().sum();
    MatrixXd dH2 = dLogits * W4_.transpose();
    MatrixXd dA3 = dH2.array() * (1.0 - H2.array().square());
    grads->W3 = Z.transpose() * dA3;
    grads->b3 = dA3.colwise().sum();
    MatrixXd dZ = dA3 * W3_.transpose();

    MatrixXd dAenc;
    if (variational_) {
      MatrixXd dMu = dZ.array() + (beta_eff * invB) * Mu.array();
      MatrixXd dLv = (beta_eff * invB) * 0.5 * (Lv.array().exp() - 1.0);
      if (eps.size() > 0) {
        dLv.array() +=
            dZ.array() * eps.array() * 0.5 * (0.5 * Lv.array()).exp();
      }
      dAenc.resize(B, 2 * M);
      dAenc << dMu, dLv;
    } else {
      dAenc = dZ;
    }
    grads->W2 = H1.transpose() * dAenc;
    grads->b2 = dAenc.colwise().sum();
    MatrixXd dH1 = dAenc * W2_.transpose();
    MatrixXd dA1 = dH1.array() * (1.0 - H1.array().square());
    grads->W1 = Xd.transpose() * dA1;
    grads->b1 = dA1.colwise().sum();
    return loss;
  }

  /// Deterministic (mean) latent code of each user row; no sampling, no
  /// dropout.
  RepresentationMatrix encode(const InteractionMatrix& interactions) const {
    const Index M = config_.latent_dim;
    RepresentationMatrix rep;
    rep.values.resize(interactions.n_users(), M);
    rep.model_tag = to_string(config_.model);
    rep.seed = config_.seed;
    std::vector<Index> users(static_cast<std::size_t>(interactions.n_users()));
    std::iota(users.begin(), users.end(), Index{0});
    const Index chunk = 1024;
    MatrixXd X_raw, X_norm;
    for (Index start = 0; start < interactions.n_users(); start += chunk) {
      const Index end = std::min(start + chunk, interactions.n_users());
      std::vector<Index> batch(users.begin() + start, users.begin() + end);
      ae_detail::fill_normalized_batch(interactions, batch, X_raw, X_norm);
      MatrixXd H1 = ((X_norm * W1_).rowwise() + b1_.row(0)).array().tanh();
      MatrixXd Aenc = (H1 * W2_).rowwise() + b2_.row(0);
      rep.values.middleRows(start, end - start) =
          variational_ ? Aenc.leftCols(M) : Aenc;
    }
    rep.validate();
    return rep;
  }

  /// Item logits for each user encoded from `input_rows`.
  ScoreMatrix scorer(const InteractionMatrix& input_rows,
                     const InteractionMatrix& exclude) const {
    auto self = std::make_shared<MultAeModel>(*this);
    auto data = std::make_shared<InteractionMatrix>(input_rows);
    ScoreMatrix s;
    s.n_users = input_rows.n_users();
    s.n_items = input_rows.n_items();
    s.exclude = &exclude;
    s.score_user = [self, data](Index u) {
      MatrixXd X_raw, X_norm;
      ae_detail::fill_normalized_batch(*data, {u}, X_raw, X_norm);
      MatrixXd H1 =
          ((X_norm * self->W1_).rowwise() + self->b1_.row(0)).array().tanh();
      MatrixXd Aenc = (H1 * self->W2_).rowwise() + self->b2_.row(0);
      MatrixXd Z = self->variational_
                       ? MatrixXd(Aenc.leftCols(self->config_.latent_dim))
                       : Aenc;
      MatrixXd H2 =
          ((Z * self->W3_).rowwise() + self->b3_.row(0)).array().tanh();
      MatrixXd logits = (H2 * self->W4_).rowwise() + self->b4_.row(0);
      return VectorXd(logits.row(0).transpose());
    };
    return s;
  }

  std::vector<MatrixXd*> params() {
    return {&W1_, &b1_, &W2_, &b2_, &W3_, &b3_, &W4_, &b4_};
  }
  std::vector<const MatrixXd*> params() const {
    return {&W1_, &b1_, &W2_, &b2_, &W3_, &b3_, &W4_, &b4_};
  }
  static std::vector<std::string> param_names() {
    return {"W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4"};
  }

 private:
  LearnerConfig config_;
  bool variational_ = true;
  MatrixXd W1_, b1_, W2_, b2_, W3_, b3_, W4_, b4_;
};

/// Training progress of one autoencoder run.
struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<double> val_ndcg100;  // one entry per evaluation
  Index best_epoch = 0;
  double best_val = -1.0;
  Index epochs_run = 0;
};

namespace ae_detail {

inline double validation_ndcg100(const MultAeModel& model,
                                 const InteractionMatrix& train,
                                 const InteractionMatrix& validation) {
  ScoreMatrix s = model.scorer(train, train);
  return ndcg_at_k(s, validation, 100);
}

}  // namespace ae_detail

/// Minibatch Adam training with early stopping on validation NDCG@100.
/// Evaluates every `eval_every` epochs; `patience` evaluations without
/// improvement stop the run and the best checkpoint is restored.
inline MultAeModel train_mult_ae(const InteractionMatrix& train,
                                 const InteractionMatrix& validation,
                                 const LearnerConfig& config,
                                 TrainLog* log = nullptr) {
  config.validate();
  MultAeModel model(config, train.n_items());
  Adam opt(config.learning_rate);
  Rng rng = make_rng(config.seed, 0xae7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Index> order(static_cast<std::size_t>(train.n_users()));
  std::iota(order.begin(), order.end(), Index{0});

  const auto batches_per_epoch = static_cast<Index>(
      (train.n_users() + config.batch_size - 1) / config.batch_size);
  const double total_anneal_steps =
      std::max(1.0, config.anneal_fraction *
                        static_cast<double>(config.max_epochs) *
                        static_cast<double>(batches_per_epoch));
  long step = 0;

  MultAeModel best = model;
  double best_val = -1.0;
  Index best_epoch = 0;
  Index evals_since_best = 0;
  MatrixXd X_raw, X_norm;
  MultAeModel::Grads grads;

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Index b = 0; b < batches_per_epoch; ++b) {
      const Index start = b * config.batch_size;
      const Index end = std::min(start + config.batch_size, train.n_users());
      std::vector<Index> batch(order.begin() + start, order.begin() + end);
      ae_detail::fill_normalized_batch(train, batch, X_raw, X_norm);

      MatrixXd keep_mask;
      if (config.dropout_keep < 1.0) {
        keep_mask.resize(X_norm.rows(), X_norm.cols());
        const double inv_keep = 1.0 / config.dropout_keep;
        for (Index r = 0; r < keep_mask.rows(); ++r) {
          for (Index c = 0; c < keep_mask.cols(); ++c) {
            keep_mask(r, c) = unit(rng) < config.dropout_keep ? inv_keep : 0.0;
          }
        }
      }
      MatrixXd eps;
      if (model.variational()) {
        eps.resize(X_norm.rows(), config.latent_dim);
        for (Index r = 0; r < eps.rows(); ++r) {
          for (Index c = 0; c < eps.cols(); ++c) eps(r, c) = gauss(rng);
        }
      }
      ++step;
      double beta_eff = 0.0;
      if (config.model == ModelKind::multi_vae) {
        beta_eff = config.beta *
                   std::min(1.0, static_cast<double>(step) / total_anneal_steps);
      } else if (config.model == ModelKind::beta_vae) {
        beta_eff = config.beta;
      }
      const double loss = model.loss_and_grad(X_raw, X_norm, eps, keep_mask,
                                              beta_eff, &grads);
      if (!std::isfinite(loss)) {
        throw Error(std::string(to_string(config.model)) +
                    ": diverged (non-finite loss) at epoch " +
                    std::to_string(epoch));
      }
      epoch_loss += loss;
      std::vector<MatrixXd> gs = {grads.W1, grads.b1, grads.W2, grads.b2,
                                  grads.W3, grads.b3, grads.W4, grads.b4};
      opt.step(model.params(), gs);
    }
    if (log != nullptr) {
      log->epoch_loss.push_back(epoch_loss /
                                static_cast<double>(batches_per_epoch));
      log->epochs_run = epoch;
    }

    if (epoch % config.eval_every == 0 || epoch == config.max_epochs) {
      const double val = ae_detail::validation_ndcg100(model, train, validation);
      if (log != nullptr) log->val_ndcg100.push_back(val);
      if (val > best_val) {
        best_val = val;
        best = model;
        best_epoch = epoch;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best >= config.patience) break;
      }
    }
  }
  if (log != nullptr) {
    log->best_epoch = best_epoch;
    log->best_val = best_val;
  }
  return best_val >= 0.0 ? best : model;
}

}  // namespace disrec
