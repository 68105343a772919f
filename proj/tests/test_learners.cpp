#include "disrec/learners/learners.hpp"
#include "disrec/synth.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Jacobi>

#include <cmath>
#include <filesystem>

using namespace disrec;

namespace {

InteractionMatrix make_matrix(Index n_users, Index n_items,
                              std::vector<std::pair<std::uint32_t, std::uint32_t>> es) {
  std::vector<std::string> uids, iids;
  for (Index u = 0; u < n_users; ++u) uids.push_back("u" + std::to_string(u));
  for (Index i = 0; i < n_items; ++i) iids.push_back("i" + std::to_string(i));
  return InteractionMatrix(n_users, n_items, std::move(es), uids, iids);
}

// one-sided Jacobi SVD on a small dense matrix: independent singular-value
// oracle
VectorXd jacobi_singular_values(MatrixXd A) {
  const Index n = A.cols();
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double alpha = A.col(p).squaredNorm();
        const double beta = A.col(q).squaredNorm();
        const double gamma = A.col(p).dot(A.col(q));
        off = std::max(off, std::abs(gamma));
        if (std::abs(gamma) < 1e-15) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index r = 0; r < A.rows(); ++r) {
          const double ap = A(r, p), aq = A(r, q);
          A(r, p) = c * ap - s * aq;
          A(r, q) = s * ap + c * aq;
        }
      }
    }
    if (off < 1e-15) break;
  }
  VectorXd sv(n);
  for (Index j = 0; j < n; ++j) sv[j] = A.col(j).norm();
  std::sort(sv.data(), sv.data() + n, std::greater<double>());
  return sv;
}

// central finite differences over all parameters of a loss function
template <typename LossFn>
double max_relative_grad_error(std::vector<MatrixXd*> params,
                               const std::vector<MatrixXd>& analytic,
                               LossFn loss, double h) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    MatrixXd& P = *params[p];
    for (Index r = 0; r < P.rows(); ++r) {
      for (Index c = 0; c < P.cols(); ++c) {
        const double orig = P(r, c);
        P(r, c) = orig + h;
        const double up = loss();
        P(r, c) = orig - h;
        const double down = loss();
        P(r, c) = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[p](r, c);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
    }
  }
  return worst;
}

LearnerConfig toy_ae_config(ModelKind kind, std::uint64_t seed) {
  LearnerConfig c;
  c.model = kind;
  c.latent_dim = 3;
  c.hidden_dim = 5;
  c.batch_size = 128;
  c.max_epochs = 50;
  c.dropout_keep = 1.0;
  c.learning_rate = 5e-3;
  c.seed = seed;
  c.eval_every = 5;
  c.patience = 10;
  if (kind == ModelKind::beta_vae) c.beta = 4.0;
  if (kind == ModelKind::multi_vae) c.beta = 0.2;
  return c;
}

InteractionMatrix toy_interactions() {
  // 3 users x 4 items
  return make_matrix(3, 4, {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 0}, {2, 3}});
}

}  // namespace

// ---------------------------------------------------------------------------
// Top-Popular
// ---------------------------------------------------------------------------

TEST_CASE("top_popular ranks items by train counts for every user") {
  // counts: item0=1, item1=3, item2=2
  auto train = make_matrix(3, 3, {{0, 1}, {1, 1}, {2, 1}, {0, 2}, {1, 2}, {2, 0}});
  auto scores = fit_top_popular(train);
  auto top = scores.top_k(0, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0] == 1);
  CHECK(top[1] == 2);
  CHECK(top[2] == 0);
  // identical vector for every user
  CHECK((scores.scores(0) - scores.scores(2)).norm() == 0.0);

  SECTION("ties break by ascending item index") {
    auto t2 = make_matrix(2, 3, {{0, 2}, {1, 0}});  // items 0 and 2 tie at 1
    auto s2 = fit_top_popular(t2);
    auto top2 = s2.top_k(0, 3);
    CHECK(top2[0] == 0);
    CHECK(top2[1] == 2);
    CHECK(top2[2] == 1);
  }
  SECTION("coverage@k of the popularity ranking is k / n_items") {
    SynthSpec spec;
    spec.n_users = 60;
    spec.n_items = 300;
    spec.K = 3;
    spec.M = 4;
    spec.interactions_per_user = 20;
    spec.seed = 5;
    auto data = generate(spec);
    auto sm = fit_top_popular(data.interactions);
    const double cov = coverage_at_k(sm, data.interactions, 10);
    CHECK_THAT(cov, Catch::Matchers::WithinAbs(10.0 / 300.0, 1e-12));
  }
}

// ---------------------------------------------------------------------------
// PureSVD
// ---------------------------------------------------------------------------

TEST_CASE("pure_svd recovers exact low-rank structure") {
  // rank-1 matrix: users 0..3 all interact with items 0..2
  std::vector<std::pair<std::uint32_t, std::uint32_t>> es;
  for (std::uint32_t u = 0; u < 4; ++u) {
    for (std::uint32_t i = 0; i < 3; ++i) es.push_back({u, i});
  }
  auto m = make_matrix(4, 5, es);
  LearnerConfig c;
  c.model = ModelKind::pure_svd;
  c.latent_dim = 2;
  c.seed = 1;
  auto model = PureSvdModel::fit(m, c);
  // sigma_1 = sqrt(4*3), sigma_2 = 0
  CHECK_THAT(model.singular_values[0],
             Catch::Matchers::WithinAbs(std::sqrt(12.0), 1e-8));
  CHECK_THAT(model.singular_values[1], Catch::Matchers::WithinAbs(0.0, 1e-8));

  // reconstruction error of the rank-1 part is ~0
  MatrixXd recon = model.user_factors * model.item_factors.transpose();
  for (Index u = 0; u < 4; ++u) {
    for (Index i = 0; i < 5; ++i) {
      const double truth = i < 3 ? 1.0 : 0.0;
      CHECK_THAT(recon(u, i), Catch::Matchers::WithinAbs(truth, 1e-8));
    }
  }
}

TEST_CASE("pure_svd singular values match a Jacobi oracle on a 4x4") {
  auto m = make_matrix(4, 4, {{0, 0}, {0, 1}, {0, 3}, {1, 1}, {1, 2},
                              {2, 0}, {2, 2}, {2, 3}, {3, 1}, {3, 3}});
  MatrixXd dense = MatrixXd::Zero(4, 4);
  for (Index u = 0; u < 4; ++u) {
    for (auto i : m.items_of(u)) dense(u, static_cast<Index>(i)) = 1.0;
  }
  VectorXd oracle = jacobi_singular_values(dense);
  LearnerConfig c;
  c.model = ModelKind::pure_svd;
  c.latent_dim = 4;
  c.svd_oversample = 0;
  c.seed = 3;
  auto model = PureSvdModel::fit(m, c);
  for (Index j = 0; j < 4; ++j) {
    CHECK_THAT(model.singular_values[j],
               Catch::Matchers::WithinAbs(oracle[j], 1e-8));
  }
}

TEST_CASE("pure_svd encode reproduces the fit and folds in new users") {
  SynthSpec spec;
  spec.n_users = 40;
  spec.n_items = 30;
  spec.K = 3;
  spec.M = 4;
  spec.interactions_per_user = 8;
  spec.seed = 9;
  auto data = generate(spec);
  LearnerConfig c;
  c.model = ModelKind::pure_svd;
  c.latent_dim = 4;
  c.seed = 2;
  auto model = PureSvdModel::fit(data.interactions, c);
  auto rep = model.encode(data.interactions);
  CHECK((rep.values - model.user_factors).norm() == 0.0);

  // folding in a different matrix stays finite and deterministic
  auto split = split_per_user(data.interactions, {}, 4);
  auto rep2 = model.encode(split.train);
  CHECK(rep2.values.allFinite());
  auto rep3 = model.encode(split.train);
  CHECK((rep2.values - rep3.values).norm() == 0.0);

  CHECK_THROWS_AS(
      PureSvdModel::fit(make_matrix(2, 2, {{0, 0}, {1, 1}}),
                        [] {
                          LearnerConfig bad;
                          bad.model = ModelKind::pure_svd;
                          bad.latent_dim = 5;
                          return bad;
                        }()),
      Error);
}

// ---------------------------------------------------------------------------
// gradient checks (the analytic-backprop oracle)
// ---------------------------------------------------------------------------

TEST_CASE("multi_dae gradients match central finite differences") {
  auto data = toy_interactions();
  auto config = toy_ae_config(ModelKind::multi_dae, 7);
  MultAeModel model(config, data.n_items());
  MatrixXd X_raw, X_norm;
  ae_detail::fill_normalized_batch(data, {0, 1, 2}, X_raw, X_norm);
  MatrixXd eps, mask;
  MultAeModel::Grads grads;
  model.loss_and_grad(X_raw, X_norm, eps, mask, 0.0, &grads);
  std::vector<MatrixXd> gs = {grads.W1, grads.b1, grads.W2, grads.b2,
                              grads.W3, grads.b3, grads.W4, grads.b4};
  const double err = max_relative_grad_error(
      model.params(), gs,
      [&] { return model.loss_and_grad(X_raw, X_norm, eps, mask, 0.0, nullptr); },
      1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("multi_vae ELBO gradients match central finite differences") {
  auto data = toy_interactions();
  auto config = toy_ae_config(ModelKind::multi_vae, 8);
  MultAeModel model(config, data.n_items());
  MatrixXd X_raw, X_norm;
  ae_detail::fill_normalized_batch(data, {0, 1, 2}, X_raw, X_norm);
  Rng rng = make_rng(4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd eps(3, config.latent_dim);
  for (Index r = 0; r < 3; ++r) {
    for (Index c = 0; c < config.latent_dim; ++c) eps(r, c) = gauss(rng);
  }
  MatrixXd mask;
  const double beta = 0.7;
  MultAeModel::Grads grads;
  model.loss_and_grad(X_raw, X_norm, eps, mask, beta, &grads);
  std::vector<MatrixXd> gs = {grads.W1, grads.b1, grads.W2, grads.b2,
                              grads.W3, grads.b3, grads.W4, grads.b4};
  const double err = max_relative_grad_error(
      model.params(), gs,
      [&] {
        return model.loss_and_grad(X_raw, X_norm, eps, mask, beta, nullptr);
      },
      1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("beta_vae gradient check and KL behavior") {
  auto data = toy_interactions();
  auto config = toy_ae_config(ModelKind::beta_vae, 9);
  MultAeModel model(config, data.n_items());
  MatrixXd X_raw, X_norm;
  ae_detail::fill_normalized_batch(data, {0, 1, 2}, X_raw, X_norm);
  Rng rng = make_rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd eps(3, config.latent_dim);
  for (Index r = 0; r < 3; ++r) {
    for (Index c = 0; c < config.latent_dim; ++c) eps(r, c) = gauss(rng);
  }
  MatrixXd mask;
  MultAeModel::Grads grads;
  model.loss_and_grad(X_raw, X_norm, eps, mask, 20.0, &grads);
  std::vector<MatrixXd> gs = {grads.W1, grads.b1, grads.W2, grads.b2,
                              grads.W3, grads.b3, grads.W4, grads.b4};
  const double err = max_relative_grad_error(
      model.params(), gs,
      [&] {
        return model.loss_and_grad(X_raw, X_norm, eps, mask, 20.0, nullptr);
      },
      1e-5);
  CHECK(err < 1e-4);

  SECTION("beta <= 1 is rejected for beta_vae") {
    LearnerConfig bad = config;
    bad.beta = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }
}

TEST_CASE("KL closed form sanity") {
  // KL(N(mu, sigma^2) || N(0,1)) = 0.5 (mu^2 + sigma^2 - 1 - ln sigma^2)
  auto kl = [](double mu, double sigma) {
    return 0.5 * (mu * mu + sigma * sigma - 1.0 - 2.0 * std::log(sigma));
  };
  CHECK(kl(0.0, 1.0) == 0.0);
  CHECK_THAT(kl(1.0, 1.0), Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("macrid_vae gradients match central finite differences") {
  auto data = toy_interactions();
  LearnerConfig config;
  config.model = ModelKind::macrid_vae;
  config.latent_dim = 4;
  config.macro_k = 2;
  config.seed = 11;
  config.macrid_tau = 0.3;
  MacridVaeModel model(config, data.n_items());
  Rng rng = make_rng(6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd eps(2, config.latent_dim);
  for (Index r = 0; r < 2; ++r) {
    for (Index c = 0; c < config.latent_dim; ++c) eps(r, c) = gauss(rng);
  }
  std::vector<Index> batch = {0, 2};
  MatrixXd no_mask;
  const double beta = 5.0;
  MacridVaeModel::Grads grads;
  model.loss_and_grad(data, batch, eps, no_mask, beta, &grads);
  std::vector<MatrixXd> gs = {grads.H, grads.P, grads.W};
  const double err = max_relative_grad_error(
      model.params(), gs,
      [&] {
        return model.loss_and_grad(data, batch, eps, no_mask, beta, nullptr);
      },
      1e-5);
  CHECK(err < 1e-3);
}

TEST_CASE("macrid_vae concept assignments are softmax rows") {
  LearnerConfig config;
  config.model = ModelKind::macrid_vae;
  config.latent_dim = 6;
  config.macro_k = 3;
  config.seed = 2;
  MacridVaeModel model(config, 20);
  MatrixXd C = model.concept_assignment();
  REQUIRE(C.rows() == 20);
  REQUIRE(C.cols() == 3);
  for (Index i = 0; i < 20; ++i) {
    CHECK_THAT(C.row(i).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK((C.row(i).array() > 0.0).all());
  }
  SECTION("macro_k must divide latent_dim") {
    LearnerConfig bad = config;
    bad.latent_dim = 7;
    CHECK_THROWS_AS(bad.validate(), Error);
  }
}

// ---------------------------------------------------------------------------
// training behavior
// ---------------------------------------------------------------------------

TEST_CASE("multi_dae training loss decreases on a toy problem") {
  SynthSpec spec;
  spec.n_users = 60;
  spec.n_items = 40;
  spec.K = 3;
  spec.M = 4;
  spec.interactions_per_user = 10;
  spec.seed = 3;
  auto data = generate(spec);
  auto split = split_per_user(data.interactions, {}, 3);
  auto config = toy_ae_config(ModelKind::multi_dae, 4);
  config.hidden_dim = 16;
  config.max_epochs = 50;
  config.eval_every = 50;
  TrainLog log;
  train_mult_ae(split.train, split.validation, config, &log);
  REQUIRE(log.epoch_loss.size() >= 50);
  const double first5 = std::accumulate(log.epoch_loss.begin(),
                                        log.epoch_loss.begin() + 5, 0.0);
  const double last5 = std::accumulate(log.epoch_loss.end() - 5,
                                       log.epoch_loss.end(), 0.0);
  CHECK(last5 < first5);
}

TEST_CASE("zero-dropout identity-capacity DAE memorizes disjoint users") {
  // 2 users with disjoint items
  auto train = make_matrix(2, 6, {{0, 0}, {0, 1}, {0, 2}, {1, 3}, {1, 4}, {1, 5}});
  LearnerConfig config;
  config.model = ModelKind::multi_dae;
  config.latent_dim = 6;
  config.hidden_dim = 12;
  config.dropout_keep = 1.0;
  config.batch_size = 128;
  config.max_epochs = 400;
  config.eval_every = 400;  // effectively disable early stopping
  config.patience = 1;
  config.learning_rate = 0.02;
  config.seed = 5;
  auto model = train_mult_ae(train, train, config);
  ScoreMatrix s = model.scorer(train, /*exclude=*/train);
  // score own items above the other user's items (check raw ranking without
  // exclusion by scoring directly)
  for (Index u = 0; u < 2; ++u) {
    VectorXd sc = s.scores(u);
    double own_min = std::numeric_limits<double>::infinity();
    double other_max = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < 6; ++i) {
      const bool own = (u == 0 && i < 3) || (u == 1 && i >= 3);
      if (own) {
        own_min = std::min(own_min, sc[i]);
      } else {
        other_max = std::max(other_max, sc[i]);
      }
    }
    CHECK(own_min > other_max);
  }
}

TEST_CASE("stronger beta bottleneck shrinks the KL term") {
  SynthSpec spec;
  spec.n_users = 50;
  spec.n_items = 30;
  spec.K = 3;
  spec.M = 4;
  spec.interactions_per_user = 8;
  spec.seed = 6;
  auto data = generate(spec);
  auto split = split_per_user(data.interactions, {}, 6);

  auto kl_at_convergence = [&](double beta) {
    LearnerConfig config = toy_ae_config(ModelKind::beta_vae, 7);
    config.beta = beta;
    config.hidden_dim = 12;
    config.max_epochs = 60;
    config.eval_every = 60;
    auto model = train_mult_ae(split.train, split.validation, config);
    // mean KL of the deterministic posterior over all users
    RepresentationMatrix mu = model.encode(split.train);
    // recompute logvar through the encoder by a forward pass
    MatrixXd X_raw, X_norm;
    std::vector<Index> all;
    for (Index u = 0; u < split.train.n_users(); ++u) all.push_back(u);
    ae_detail::fill_normalized_batch(split.train, all, X_raw, X_norm);
    MatrixXd eps, mask;
    MultAeModel::Grads grads;
    // KL component = loss(beta=1) - loss(beta=0) on the mean path
    const double with_kl =
        model.loss_and_grad(X_raw, X_norm, eps, mask, 1.0, nullptr);
    const double without =
        model.loss_and_grad(X_raw, X_norm, eps, mask, 0.0, nullptr);
    return with_kl - without;
  };
  const double kl_tight = kl_at_convergence(20.0);
  const double kl_loose = kl_at_convergence(1.001);
  CHECK(kl_tight < kl_loose);
}

TEST_CASE("early stopping restores the best checkpoint") {
  SynthSpec spec;
  spec.n_users = 40;
  spec.n_items = 30;
  spec.K = 3;
  spec.M = 4;
  spec.interactions_per_user = 8;
  spec.seed = 8;
  auto data = generate(spec);
  auto split = split_per_user(data.interactions, {}, 8);
  LearnerConfig config = toy_ae_config(ModelKind::multi_dae, 3);
  config.hidden_dim = 8;
  config.max_epochs = 60;
  config.eval_every = 5;
  config.patience = 3;
  TrainLog log;
  auto model = train_mult_ae(split.train, split.validation, config, &log);
  const double final_val =
      ndcg_at_k(model.scorer(split.train, split.train), split.validation, 100);
  CHECK_THAT(final_val, Catch::Matchers::WithinAbs(log.best_val, 1e-12));
  for (double v : log.val_ndcg100) CHECK(final_val >= v - 1e-12);
}

TEST_CASE("encoding is deterministic and bitwise repeatable") {
  SynthSpec spec;
  spec.n_users = 30;
  spec.n_items = 25;
  spec.K = 3;
  spec.M = 4;
  spec.interactions_per_user = 8;
  spec.seed = 12;
  auto data = generate(spec);
  auto split = split_per_user(data.interactions, {}, 12);
  for (ModelKind kind : {ModelKind::multi_dae, ModelKind::multi_vae,
                         ModelKind::macrid_vae}) {
    LearnerConfig config = toy_ae_config(kind, 13);
    config.hidden_dim = 8;
    config.max_epochs = 10;
    config.eval_every = 5;
    if (kind == ModelKind::macrid_vae) {
      config.latent_dim = 4;
      config.macro_k = 2;
    }
    auto m1 = fit_learner(split.train, split.validation, config);
    auto m2 = fit_learner(split.train, split.validation, config);
    auto r1 = m1.encode(split.train);
    auto r2 = m2.encode(split.train);
    REQUIRE((r1.values - r2.values).norm() == 0.0);
    auto r3 = m1.encode(split.train);
    REQUIRE((r1.values - r3.values).norm() == 0.0);
  }
}

TEST_CASE("vae encoding of an all-zeros row is the bias pathway, finite") {
  auto train = make_matrix(2, 4, {{0, 0}, {0, 1}, {1, 2}, {1, 3}});
  auto config = toy_ae_config(ModelKind::multi_vae, 3);
  config.hidden_dim = 6;
  MultAeModel model(config, 4);
  auto empty = make_matrix(2, 4, {{0, 0}});  // user 1 has no interactions
  auto rep = model.encode(empty);
  CHECK(rep.values.allFinite());
  // user 1's code equals tanh(b1) W2 + b2 restricted to the mean block
  MatrixXd h = MatrixXd::Zero(1, config.hidden_dim);
  auto params = model.params();
  h = ((h * *params[0]).rowwise() + params[1]->row(0)).array().tanh();
  MatrixXd a = (h * *params[2]).rowwise() + params[3]->row(0);
  CHECK((rep.values.row(1) - a.leftCols(config.latent_dim).row(0)).norm() <
        1e-12);
}

TEST_CASE("macrid_vae separates orthogonal item groups") {
  // two groups of items with disjoint user bases
  std::vector<std::pair<std::uint32_t, std::uint32_t>> es;
  for (std::uint32_t u = 0; u < 30; ++u) {
    for (std::uint32_t r = 0; r < 6; ++r) {
      const std::uint32_t item = u < 15 ? r : 10 + r;
      es.push_back({u, item});
    }
  }
  auto train = make_matrix(30, 20, es);
  LearnerConfig config;
  config.model = ModelKind::macrid_vae;
  config.latent_dim = 4;
  config.macro_k = 2;
  config.batch_size = 128;
  config.max_epochs = 150;
  config.eval_every = 150;
  config.patience = 5;
  config.learning_rate = 0.01;
  config.dropout_keep = 1.0;
  config.seed = 21;
  auto model = train_macrid_vae(train, train, config);
  MatrixXd C = model.concept_assignment();
  // argmax purity over the two trained item blocks
  Index correct = 0, total = 0;
  Index block0_concept = -1;
  for (Index i = 0; i < 20; ++i) {
    const bool in_block0 = i < 6;
    const bool in_block1 = i >= 10 && i < 16;
    if (!in_block0 && !in_block1) continue;
    Index argmax = C(i, 0) >= C(i, 1) ? 0 : 1;
    if (in_block0) {
      if (block0_concept < 0) block0_concept = argmax;
      correct += argmax == block0_concept;
    } else {
      correct += argmax == 1 - block0_concept;
    }
    ++total;
  }
  const double purity = static_cast<double>(correct) / static_cast<double>(total);
  CHECK(purity >= 0.9);
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("checkpoints round-trip every model kind") {
  SynthSpec spec;
  spec.n_users = 30;
  spec.n_items = 24;
  spec.K = 3;
  spec.M = 4;
  spec.interactions_per_user = 8;
  spec.seed = 17;
  auto data = generate(spec);
  auto split = split_per_user(data.interactions, {}, 17);
  namespace fs = std::filesystem;

  for (ModelKind kind :
       {ModelKind::top_popular, ModelKind::pure_svd, ModelKind::multi_dae,
        ModelKind::multi_vae, ModelKind::beta_vae, ModelKind::macrid_vae}) {
    LearnerConfig config = toy_ae_config(
        kind == ModelKind::top_popular || kind == ModelKind::pure_svd
            ? ModelKind::multi_dae
            : kind,
        19);
    config.model = kind;
    config.hidden_dim = 8;
    config.max_epochs = 6;
    config.eval_every = 3;
    if (kind == ModelKind::beta_vae) config.beta = 4.0;
    if (kind == ModelKind::macrid_vae) {
      config.latent_dim = 4;
      config.macro_k = 2;
    }
    auto model = fit_learner(split.train, split.validation, config);
    const auto path = (fs::temp_directory_path() /
                       ("dr_ckpt_" + std::string(to_string(kind)) + ".bin"))
                          .string();
    save_checkpoint(model, config, path);
    LearnerConfig back_config;
    auto back = load_checkpoint(path, &back_config);
    CHECK(back.kind() == kind);
    ScoreMatrix s1 = model.scorer(split.train, split.train);
    ScoreMatrix s2 = back.scorer(split.train, split.train);
    REQUIRE((s1.scores(0) - s2.scores(0)).norm() == 0.0);
    if (model.has_representation()) {
      REQUIRE((model.encode(split.train).values -
               back.encode(split.train).values)
                  .norm() == 0.0);
    }
  }
}
