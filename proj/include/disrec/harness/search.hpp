#pragma once

#include "disrec/harness/pool.hpp"
#include "disrec/learners/learners.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

namespace disrec {

enum class SearchStrategy { random, tpe };

/// Hyperparameter ranges of the tuning protocol. The objective is fixed to
/// validation NDCG@100.
struct SearchSpace {
  double lr_log_min = -10.0;  // learning rate ~ exp(U[-10, -2])
  double lr_log_max = -2.0;
  Index latent_min = 2;
  Index latent_max = 20;
  std::vector<Index> batch_sizes = {128, 256, 512, 1024};
  double beta_vae_log_min = std::log(1.1);   // beta-VAE: beta > 1
  double beta_vae_log_max = std::log(32.0);
  double macrid_beta_log_min = std::log(5.0);  // MacridVAE: beta >> 1
  double macrid_beta_log_max = std::log(50.0);
  double vae_anneal_min = 0.1;  // MultiVAE anneal target
  double vae_anneal_max = 1.0;
  Index macro_k_min = 2;
  Index macro_k_max = 7;
  Index n_trials = 50;
  Index max_epochs = 500;
  SearchStrategy strategy = SearchStrategy::random;

  LearnerConfig sample(ModelKind model, Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    LearnerConfig c;
    c.model = model;
    c.max_epochs = max_epochs;
    c.learning_rate =
        std::exp(lr_log_min + unit(rng) * (lr_log_max - lr_log_min));
    c.batch_size = batch_sizes[static_cast<std::size_t>(
        std::min<double>(static_cast<double>(batch_sizes.size()) - 1.0,
                         std::floor(unit(rng) *
                                    static_cast<double>(batch_sizes.size()))))];
    auto uniform_int = [&](Index lo, Index hi) {
      return lo + static_cast<Index>(std::min<double>(
                      static_cast<double>(hi - lo),
                      std::floor(unit(rng) * static_cast<double>(hi - lo + 1))));
    };
    if (model == ModelKind::macrid_vae) {
      c.macro_k = uniform_int(macro_k_min, macro_k_max);
      const Index d_max = std::max<Index>(1, latent_max / c.macro_k);
      const Index d = uniform_int(1, d_max);
      c.latent_dim = std::max<Index>(c.macro_k * d, 2);
      c.beta = std::exp(macrid_beta_log_min +
                        unit(rng) * (macrid_beta_log_max - macrid_beta_log_min));
    } else {
      c.latent_dim = uniform_int(latent_min, latent_max);
      if (model == ModelKind::beta_vae) {
        c.beta = std::exp(beta_vae_log_min +
                          unit(rng) * (beta_vae_log_max - beta_vae_log_min));
      } else if (model == ModelKind::multi_vae) {
        c.beta = vae_anneal_min + unit(rng) * (vae_anneal_max - vae_anneal_min);
      }
    }
    return c;
  }
};

struct Trial {
  Index index = 0;
  LearnerConfig config;
  double objective = -1.0;  // validation NDCG@100; -1 = failed
  std::string error;
};

struct TuneResult {
  LearnerConfig best;
  double best_objective = -1.0;
  std::vector<Trial> trials;
};

namespace search_detail {

inline double trial_objective(const InteractionMatrix& train,
                              const InteractionMatrix& validation,
                              const LearnerConfig& config) {
  TrainLog log;
  FittedModel model = fit_learner(train, validation, config, &log);
  if (log.best_val >= 0.0) return log.best_val;  // early-stopped best
  ScoreMatrix s = model.scorer(train, train);
  return ndcg_at_k(s, validation, 100);
}

// numeric coordinates of a config for the Parzen estimators
inline std::vector<double> tpe_coords(const LearnerConfig& c) {
  return {std::log(c.learning_rate), static_cast<double>(c.latent_dim),
          c.beta > 0.0 ? std::log(c.beta) : 0.0};
}

inline double kde_log_density(const std::vector<std::vector<double>>& points,
                              const std::vector<double>& x) {
  if (points.empty()) return 0.0;
  const std::size_t dims = x.size();
  double acc = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    double mean = 0.0;
    for (const auto& p : points) mean += p[d];
    mean /= static_cast<double>(points.size());
    double var = 0.0;
    for (const auto& p : points) var += (p[d] - mean) * (p[d] - mean);
    var /= static_cast<double>(points.size());
    const double bw = std::max(
        1.06 * std::sqrt(var) *
            std::pow(static_cast<double>(points.size()), -0.2),
        1e-2);
    double dens = 0.0;
    for (const auto& p : points) {
      const double z = (x[d] - p[d]) / bw;
      dens += std::exp(-0.5 * z * z) / bw;
    }
    acc += std::log(std::max(dens / static_cast<double>(points.size()), 1e-300));
  }
  return acc;
}

}  // namespace search_detail

/// Run n_trials training runs and return the configuration with the best
/// validation NDCG@100 (ties keep the earliest trial). Trial parameters are
/// all drawn up front from per-trial substreams, so results do not depend on
/// scheduling. Strategy `tpe` replaces the random draw with a lightweight
/// Parzen-estimator proposal after 10 startup trials.
inline TuneResult tune(const InteractionMatrix& train,
                       const InteractionMatrix& validation, ModelKind model,
                       const SearchSpace& space, std::uint64_t seed,
                       Index workers = 1) {
  if (validation.nnz() == 0) throw Error("tune: empty validation split");
  TuneResult result;
  result.trials.resize(static_cast<std::size_t>(space.n_trials));

  if (model == ModelKind::top_popular) {
    // nothing to tune
    Trial t;
    t.config.model = model;
    t.config.seed = seed;
    t.objective = search_detail::trial_objective(train, validation, t.config);
    result.trials = {t};
    result.best = t.config;
    result.best_objective = t.objective;
    return result;
  }

  const Index n_startup =
      space.strategy == SearchStrategy::tpe ? std::min<Index>(10, space.n_trials)
                                            : space.n_trials;

  // pre-sample the random trials
  for (Index i = 0; i < space.n_trials; ++i) {
    Rng rng = make_rng(seed, 0x70e + static_cast<std::uint64_t>(i));
    auto& trial = result.trials[static_cast<std::size_t>(i)];
    trial.index = i;
    trial.config = space.sample(model, rng);
    trial.config.seed = seed;
  }

  auto run_block = [&](Index begin, Index end) {
    ThreadPool pool(static_cast<std::size_t>(std::max<Index>(workers, 1)));
    for (Index i = begin; i < end; ++i) {
      auto* trial = &result.trials[static_cast<std::size_t>(i)];
      pool.submit([trial, &train, &validation] {
        try {
          trial->objective =
              search_detail::trial_objective(train, validation, trial->config);
        } catch (const std::exception& e) {
          trial->objective = -1.0;
          trial->error = e.what();
        }
      });
    }
    pool.wait();
  };

  run_block(0, n_startup);

  if (space.strategy == SearchStrategy::tpe) {
    for (Index i = n_startup; i < space.n_trials; ++i) {
      // split completed trials into good/bad by the top quartile
      std::vector<const Trial*> done;
      for (Index j = 0; j < i; ++j) {
        const auto& t = result.trials[static_cast<std::size_t>(j)];
        if (t.objective >= 0.0) done.push_back(&t);
      }
      auto& trial = result.trials[static_cast<std::size_t>(i)];
      if (done.size() >= 4) {
        std::vector<const Trial*> sorted = done;
        std::sort(sorted.begin(), sorted.end(),
                  [](const Trial* a, const Trial* b) {
                    return a->objective > b->objective;
                  });
        const std::size_t n_good =
            std::max<std::size_t>(1, sorted.size() / 4);
        std::vector<std::vector<double>> good, bad;
        for (std::size_t j = 0; j < sorted.size(); ++j) {
          (j < n_good ? good : bad)
              .push_back(search_detail::tpe_coords(sorted[j]->config));
        }
        // propose candidates from fresh substreams; keep the best ratio
        Rng rng = make_rng(seed, 0x79e + static_cast<std::uint64_t>(i));
        double best_score = -std::numeric_limits<double>::infinity();
        LearnerConfig best_cfg = trial.config;
        for (int cand = 0; cand < 24; ++cand) {
          LearnerConfig c = space.sample(model, rng);
          c.seed = seed;
          const auto x = search_detail::tpe_coords(c);
          const double score = search_detail::kde_log_density(good, x) -
                               search_detail::kde_log_density(bad, x);
          if (score > best_score) {
            best_score = score;
            best_cfg = c;
          }
        }
        trial.config = best_cfg;
      }
      run_block(i, i + 1);
    }
  }

  Index n_failed = 0;
  for (const auto& t : result.trials) {
    if (t.objective < 0.0) ++n_failed;
    if (t.objective > result.best_objective) {
      result.best_objective = t.objective;
      result.best = t.config;
    }
  }
  if (n_failed == static_cast<Index>(result.trials.size())) {
    std::string msg = "tune: all trials failed;";
    for (const auto& t : result.trials) {
      msg += " [trial " + std::to_string(t.index) + ": " + t.error + "]";
    }
    throw Error(msg);
  }
  return result;
}

inline nlohmann::json tune_result_to_json(const TuneResult& r) {
  nlohmann::json j;
  j["best"] = r.best.to_json();
  j["best_objective"] = r.best_objective;
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) {
    nlohmann::json tj;
    tj["index"] = t.index;
    tj["config"] = t.config.to_json();
    tj["objective"] = t.objective;
    if (!t.error.empty()) tj["error"] = t.error;
    trials.push_back(tj);
  }
  j["trials"] = trials;
  return j;
}

}  // namespace disrec
