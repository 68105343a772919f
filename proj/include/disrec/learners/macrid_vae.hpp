#pragma once

#include "disrec/learners/config.hpp"
#include "disrec/learners/mult_ae.hpp"
#include "disrec/rankeval.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <vector>

namespace disrec {

/// Macro-disentangling VAE. macro_k learnable item prototypes soft-assign
/// every item to a concept via temperature-scaled cosine similarity; each
/// concept encodes the concept-gated user row into a d-dim Gaussian
/// posterior, and the decoder mixes per-concept cosine softmaxes over items
/// with the same assignment weights. beta >> 1 penalizes the KL of every
/// concept posterior. The user representation concatenates the concept means
/// (M = macro_k * d).
class MacridVaeModel {
 public:
  struct Grads {
    MatrixXd H, P, W;
  };

  MacridVaeModel() = default;

  MacridVaeModel(const LearnerConfig& config, Index n_items)
      : config_(config) {
    config_.validate();
    kc_ = config.macro_k;
    d_ = config.latent_dim / config.macro_k;
    tau_ = config.macrid_tau;
    Rng rng = make_rng(config.seed, 0x3ac);
    std::normal_distribution<double> gauss(0.0, 0.1);
    H_.resize(n_items, d_);
    P_.resize(kc_, d_);
    W_.resize(n_items, 2 * d_);
    for (Index i = 0; i < H_.rows(); ++i) {
      for (Index j = 0; j < d_; ++j) H_(i, j) = gauss(rng);
    }
    for (Index k = 0; k < kc_; ++k) {
      for (Index j = 0; j < d_; ++j) P_(k, j) = gauss(rng);
    }
    for (Index i = 0; i < W_.rows(); ++i) {
      for (Index j = 0; j < 2 * d_; ++j) W_(i, j) = gauss(rng);
    }
  }

  const LearnerConfig& config() const { return config_; }
  Index n_items() const { return H_.rows(); }
  Index concept_count() const { return kc_; }
  Index concept_dim() const { return d_; }

  /// Rows L2-normalized with an epsilon-guarded norm.
  static MatrixXd normalize_rows(const MatrixXd& m) {
    MatrixXd out(m.rows(), m.cols());
    for (Index r = 0; r < m.rows(); ++r) {
      out.row(r) = m.row(r) / (m.row(r).norm() + 1e-12);
    }
    return out;
  }

  /// Item-to-concept assignment: softmax_k(cos(h_i, p_k) / tau). Rows sum
  /// to 1.
  MatrixXd concept_assignment() const {
    const MatrixXd Hn = normalize_rows(H_);
    const MatrixXd Pn = normalize_rows(P_);
    MatrixXd S = Hn * Pn.transpose() / tau_;
    MatrixXd C(S.rows(), S.cols());
    for (Index i = 0; i < S.rows(); ++i) {
      const double mx = S.row(i).maxCoeff();
      VectorXd e = (S.row(i).array() - mx).exp();
      C.row(i) = e.transpose() / e.sum();
    }
    return C;
  }

  /// Mean loss over the batch; gradients optional. `users` selects rows of
  /// `data`; `eps` is B x (macro_k*d) reparameterization noise (empty =
  /// mean path); `item_kept` is an optional B x I 0/1 input-dropout mask.
  double loss_and_grad(const InteractionMatrix& data,
                       const std::vector<Index>& users, const MatrixXd& eps,
                       const MatrixXd& item_kept, double beta_eff,
                       Grads* grads) const {
    const auto B = static_cast<Index>(users.size());
    const Index I = H_.rows();
    const MatrixXd Hn = normalize_rows(H_);
    const MatrixXd Pn = normalize_rows(P_);
    const MatrixXd C = [&] {
      MatrixXd S = Hn * Pn.transpose() / tau_;
      MatrixXd out(S.rows(), S.cols());
      for (Index i = 0; i < S.rows(); ++i) {
        const double mx = S.row(i).maxCoeff();
        VectorXd e = (S.row(i).array() - mx).exp();
        out.row(i) = e.transpose() / e.sum();
      }
      return out;
    }();

    MatrixXd dHn, dC, dW;
    if (grads != nullptr) {
      dHn = MatrixXd::Zero(I, d_);
      dC = MatrixXd::Zero(I, kc_);
      dW = MatrixXd::Zero(I, 2 * d_);
    }

    double total = 0.0;
    const double invB = 1.0 / static_cast<double>(B);

    for (Index b = 0; b < B; ++b) {
      auto row = data.items_of(users[static_cast<std::size_t>(b)]);
      std::vector<Index> items;
      items.reserve(row.size());
      for (auto i : row) {
        if (item_kept.size() == 0 || item_kept(b, static_cast<Index>(i)) > 0.0) {
          items.push_back(static_cast<Index>(i));
        }
      }
      if (items.empty()) {
        for (auto i : row) items.push_back(static_cast<Index>(i));
      }
      if (items.empty()) continue;

      // forward per concept
      MatrixXd V = MatrixXd::Zero(static_cast<Index>(items.size()), kc_);
      MatrixXd Mu(kc_, d_), Lv(kc_, d_), Zn(kc_, d_), Z(kc_, d_);
      MatrixXd Q(I, kc_);  // per-concept item softmax
      VectorXd p = VectorXd::Zero(I);
      for (Index k = 0; k < kc_; ++k) {
        double nrm2 = 0.0;
        for (std::size_t t = 0; t < items.size(); ++t) {
          const double g = C(items[t], k);
          V(static_cast<Index>(t), k) = g;
          nrm2 += g * g;
        }
        const double nrm = std::sqrt(nrm2) + 1e-12;
        V.col(k) /= nrm;
        VectorXd a = VectorXd::Zero(2 * d_);
        for (std::size_t t = 0; t < items.size(); ++t) {
          a += V(static_cast<Index>(t), k) * W_.row(items[t]).transpose();
        }
        Mu.row(k) = a.head(d_).transpose();
        Lv.row(k) = a.tail(d_).transpose();
        VectorXd z = Mu.row(k).transpose();
        if (eps.size() > 0) {
          z.array() += (0.5 * Lv.row(k).transpose().array()).exp() *
                       eps.row(b).segment(k * d_, d_).transpose().array();
        }
        Z.row(k) = z.transpose();
        VectorXd zn = z / (z.norm() + 1e-12);
        Zn.row(k) = zn.transpose();
        VectorXd logits = Hn * zn / tau_;
        const double mx = logits.maxCoeff();
        VectorXd e = (logits.array() - mx).exp();
        Q.col(k) = e / e.sum();
        p.noalias() += C.col(k).cwiseProduct(Q.col(k));
      }

      double rec = 0.0;
      for (Index i : items) rec -= std::log(std::max(p[i], 1e-300));
      double kl = 0.0;
      if (eps.size() > 0 || beta_eff > 0.0) {
        kl = 0.5 * (Lv.array().exp() + Mu.array().square() - 1.0 -
                    Lv.array())
                       .sum();
      }
      total += rec + beta_eff * kl;
      if (grads == nullptr) continue;

      // backward
      VectorXd dp = VectorXd::Zero(I);
      for (Index i : items) dp[i] = -invB / std::max(p[i], 1e-300);
      for (Index k = 0; k < kc_; ++k) {
        // decoder mix: p = sum_k C_{:,k} .* Q_{:,k}
        VectorXd dq = C.col(k).cwiseProduct(dp);
        for (Index i : items) dC(i, k) += Q(i, k) * dp[i];
        // softmax over items
        const double dot = dq.dot(Q.col(k));
        VectorXd dlogits = Q.col(k).cwiseProduct(dq) - dot * Q.col(k);
        VectorXd dzn = Hn.transpose() * dlogits / tau_;
        dHn.noalias() += (dlogits / tau_) * Zn.row(k);
        // z normalization
        VectorXd zrow = Z.row(k).transpose();
        const double znorm = zrow.norm() + 1e-12;
        VectorXd znr = Zn.row(k).transpose();
        VectorXd dz = (dzn - znr * znr.dot(dzn)) / znorm;
        VectorXd dmu = dz + (beta_eff * invB) * Mu.row(k).transpose();
        VectorXd dlv =
            (beta_eff * invB) * 0.5 *
            (Lv.row(k).transpose().array().exp() - 1.0).matrix();
        if (eps.size() > 0) {
          dlv.array() += dz.array() *
                         eps.row(b).segment(k * d_, d_).transpose().array() *
                         0.5 * (0.5 * Lv.row(k).transpose().array()).exp();
        }
        VectorXd da(2 * d_);
        da << dmu, dlv;
        // encoder: a = sum_t v_t W_row(item_t); v = g / ||g||
        VectorXd dv(static_cast<Index>(items.size()));
        for (std::size_t t = 0; t < items.size(); ++t) {
          dv[static_cast<Index>(t)] = W_.row(items[t]).dot(da);
          dW.row(items[t]) += V(static_cast<Index>(t), k) * da.transpose();
        }
        // recover ||g|| from the normalization above
        double nrm2 = 0.0;
        for (std::size_t t = 0; t < items.size(); ++t) {
          const double g = C(items[t], k);
          nrm2 += g * g;
        }
        const double nrm = std::sqrt(nrm2) + 1e-12;
        const double vdotdv = V.col(k).dot(dv);
        for (std::size_t t = 0; t < items.size(); ++t) {
          const double dg =
              (dv[static_cast<Index>(t)] - V(static_cast<Index>(t), k) * vdotdv) /
              nrm;
          dC(items[t], k) += dg;
        }
      }
    }

    const double loss = total * invB;
    if (grads == nullptr) return loss;

    // assignment softmax over concepts, then cosine Jacobians to H and P
    MatrixXd dS(I, kc_);
    for (Index i = 0; i < I; ++i) {
      const double dot = dC.row(i).dot(C.row(i));
      dS.row(i) = (C.row(i).array() * (dC.row(i).array() - dot)).matrix();
    }
    dHn.noalias() += dS * Pn / tau_;
    MatrixXd dPn = dS.transpose() * Hn / tau_;

    grads->H.resize(H_.rows(), d_);
    for (Index i = 0; i < I; ++i) {
      const double norm = H_.row(i).norm() + 1e-12;
      const VectorXd hn = Hn.row(i).transpose();
      const VectorXd g = dHn.row(i).transpose();
      grads->H.row(i) = ((g - hn * hn.dot(g)) / norm).transpose();
    }
    grads->P.resize(kc_, d_);
    for (Index k = 0; k < kc_; ++k) {
      const double norm = P_.row(k).norm() + 1e-12;
      const VectorXd pn = Pn.row(k).transpose();
      const VectorXd g = dPn.row(k).transpose();
      grads->P.row(k) = ((g - pn * pn.dot(g)) / norm).transpose();
    }
    grads->W = dW;
    return loss;
  }

  /// Concatenated concept means, deterministic.
  RepresentationMatrix encode(const InteractionMatrix& interactions) const {
    RepresentationMatrix rep;
    rep.values.resize(interactions.n_users(), kc_ * d_);
    rep.model_tag = "macrid_vae";
    rep.seed = config_.seed;
    rep.concept_dim = d_;
    const MatrixXd Hn = normalize_rows(H_);
    const MatrixXd C = concept_assignment();
    for (Index u = 0; u < interactions.n_users(); ++u) {
      auto row = interactions.items_of(u);
      for (Index k = 0; k < kc_; ++k) {
        VectorXd g(static_cast<Index>(row.size()));
        for (std::size_t t = 0; t < row.size(); ++t) {
          g[static_cast<Index>(t)] = C(static_cast<Index>(row[t]), k);
        }
        const double nrm = g.norm() + 1e-12;
        VectorXd a = VectorXd::Zero(2 * d_);
        for (std::size_t t = 0; t < row.size(); ++t) {
          a += (g[static_cast<Index>(t)] / nrm) *
               W_.row(static_cast<Index>(row[t])).transpose();
        }
        rep.values.row(u).segment(k * d_, d_) = a.head(d_).transpose();
      }
    }
    rep.validate();
    return rep;
  }

  /// Mixture scores p_i = sum_k C_ik softmax_i(cos(mu_k, h_i)/tau)_i from
  /// the mean path.
  ScoreMatrix scorer(const InteractionMatrix& input_rows,
                     const InteractionMatrix& exclude) const {
    auto self = std::make_shared<MacridVaeModel>(*this);
    auto data = std::make_shared<InteractionMatrix>(input_rows);
    auto Hn = std::make_shared<MatrixXd>(normalize_rows(H_));
    auto C = std::make_shared<MatrixXd>(concept_assignment());
    ScoreMatrix s;
    s.n_users = input_rows.n_users();
    s.n_items = input_rows.n_items();
    s.exclude = &exclude;
    s.score_user = [self, data, Hn, C](Index u) {
      auto row = data->items_of(u);
      VectorXd p = VectorXd::Zero(self->n_items());
      for (Index k = 0; k < self->kc_; ++k) {
        VectorXd g(static_cast<Index>(row.size()));
        for (std::size_t t = 0; t < row.size(); ++t) {
          g[static_cast<Index>(t)] = (*C)(static_cast<Index>(row[t]), k);
        }
        const double nrm = g.norm() + 1e-12;
        VectorXd a = VectorXd::Zero(2 * self->d_);
        for (std::size_t t = 0; t < row.size(); ++t) {
          a += (g[static_cast<Index>(t)] / nrm) *
               self->W_.row(static_cast<Index>(row[t])).transpose();
        }
        VectorXd mu = a.head(self->d_);
        VectorXd zn = mu / (mu.norm() + 1e-12);
        VectorXd logits = (*Hn) * zn / self->tau_;
        const double mx = logits.maxCoeff();
        VectorXd e = (logits.array() - mx).exp();
        p.noalias() += C->col(k).cwiseProduct(VectorXd(e / e.sum()));
      }
      return p;
    };
    return s;
  }

  std::vector<MatrixXd*> params() { return {&H_, &P_, &W_}; }
  std::vector<const MatrixXd*> params() const { return {&H_, &P_, &W_}; }
  static std::vector<std::string> param_names() { return {"H", "P", "W"}; }

 private:
  LearnerConfig config_;
  Index kc_ = 2;
  Index d_ = 1;
  double tau_ = 0.1;
  MatrixXd H_;  // item embeddings, I x d
  MatrixXd P_;  // concept prototypes, macro_k x d
  MatrixXd W_;  // shared per-concept encoder, I x 2d
};

/// Minibatch Adam training with the same early-stopping protocol as the
/// MultiDAE/MultiVAE family.
inline MacridVaeModel train_macrid_vae(const InteractionMatrix& train,
                                       const InteractionMatrix& validation,
                                       const LearnerConfig& config,
                                       TrainLog* log = nullptr) {
  config.validate();
  MacridVaeModel model(config, train.n_items());
  Adam opt(config.learning_rate);
  Rng rng = make_rng(config.seed, 0x3ad);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Index> order(static_cast<std::size_t>(train.n_users()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto batches_per_epoch = static_cast<Index>(
      (train.n_users() + config.batch_size - 1) / config.batch_size);

  MacridVaeModel best = model;
  double best_val = -1.0;
  Index best_epoch = 0;
  Index evals_since_best = 0;
  MacridVaeModel::Grads grads;

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Index b = 0; b < batches_per_epoch; ++b) {
      const Index start = b * config.batch_size;
      const Index end = std::min(start + config.batch_size, train.n_users());
      std::vector<Index> batch(order.begin() + start, order.begin() + end);

      MatrixXd eps(static_cast<Index>(batch.size()), config.latent_dim);
      for (Index r = 0; r < eps.rows(); ++r) {
        for (Index c = 0; c < eps.cols(); ++c) eps(r, c) = gauss(rng);
      }
      MatrixXd item_kept;
      if (config.dropout_keep < 1.0) {
        item_kept.resize(static_cast<Index>(batch.size()), train.n_items());
        item_kept.setOnes();
        for (std::size_t r = 0; r < batch.size(); ++r) {
          for (auto i : train.items_of(batch[r])) {
            if (unit(rng) >= config.dropout_keep) {
              item_kept(static_cast<Index>(r), static_cast<Index>(i)) = 0.0;
            }
          }
        }
      }
      const double loss = model.loss_and_grad(train, batch, eps, item_kept,
                                              config.beta, &grads);
      if (!std::isfinite(loss)) {
        throw Error("macrid_vae: diverged (non-finite loss) at epoch " +
                    std::to_string(epoch));
      }
      epoch_loss += loss;
      std::vector<MatrixXd> gs = {grads.H, grads.P, grads.W};
      opt.step(model.params(), gs);
    }
    if (log != nullptr) {
      log->epoch_loss.push_back(epoch_loss /
                                static_cast<double>(batches_per_epoch));
      log->epochs_run = epoch;
    }
    if (epoch % config.eval_every == 0 || epoch == config.max_epochs) {
      ScoreMatrix s = model.scorer(train, train);
      const double val = ndcg_at_k(s, validation, 100);
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
