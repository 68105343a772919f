#pragma once

#include "disrec/common.hpp"

#include <json.hpp>

#include <string>

namespace disrec {

enum class ModelKind {
  top_popular,
  pure_svd,
  multi_dae,
  multi_vae,
  beta_vae,
  macrid_vae,
};

inline const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::top_popular: return "top_popular";
    case ModelKind::pure_svd: return "pure_svd";
    case ModelKind::multi_dae: return "multi_dae";
    case ModelKind::multi_vae: return "multi_vae";
    case ModelKind::beta_vae: return "beta_vae";
    case ModelKind::macrid_vae: return "macrid_vae";
  }
  throw Error("unknown model kind");
}

inline ModelKind model_from_string(const std::string& s) {
  if (s == "top_popular") return ModelKind::top_popular;
  if (s == "pure_svd") return ModelKind::pure_svd;
  if (s == "multi_dae") return ModelKind::multi_dae;
  if (s == "multi_vae") return ModelKind::multi_vae;
  if (s == "beta_vae") return ModelKind::beta_vae;
  if (s == "macrid_vae") return ModelKind::macrid_vae;
  throw Error("unknown model name: " + s);
}

/// Whether the model produces a user representation (Top-Popular does not,
/// so it carries no disentanglement or interpretability scores).
inline bool has_representation(ModelKind m) {
  return m != ModelKind::top_popular;
}

struct LearnerConfig {
  ModelKind model = ModelKind::multi_vae;
  Index latent_dim = 8;        // paper tuning range [2, 20]
  double learning_rate = 1e-3;
  Index batch_size = 256;      // one of {128, 256, 512, 1024}
  Index max_epochs = 200;      // paper cap: 500
  double beta = 0.2;           // beta-VAE: > 1; MacridVAE: >> 1; MultiVAE: anneal target
  Index macro_k = 7;           // MacridVAE prototype count
  double dropout_keep = 0.5;
  std::uint64_t seed = 0;
  Index patience = 10;         // early-stopping evaluations
  Index eval_every = 5;        // epochs between early-stopping evaluations
  Index hidden_dim = 600;      // encoder/decoder hidden width
  double anneal_fraction = 0.2;  // MultiVAE: fraction of max_epochs to reach beta
  double macrid_tau = 0.3;       // temperature for cosine softmaxes
  Index svd_oversample = 7;
  Index svd_power_iters = 7;

  void validate() const {
    if (latent_dim < 2 || latent_dim > 20) {
      throw Error("LearnerConfig: latent_dim must be in [2,20]");
    }
    if (batch_size != 128 && batch_size != 256 && batch_size != 512 &&
        batch_size != 1024) {
      throw Error("LearnerConfig: batch_size must be one of 128/256/512/1024");
    }
    if (max_epochs < 1 || max_epochs > 500) {
      throw Error("LearnerConfig: max_epochs must be in [1,500]");
    }
    if (dropout_keep <= 0.0 || dropout_keep > 1.0) {
      throw Error("LearnerConfig: dropout_keep must be in (0,1]");
    }
    if (model == ModelKind::beta_vae && beta <= 1.0) {
      throw Error("LearnerConfig: beta_vae requires beta > 1");
    }
    if (model == ModelKind::macrid_vae) {
      if (macro_k < 2) throw Error("LearnerConfig: macro_k must be >= 2");
      if (latent_dim % macro_k != 0) {
        throw Error("LearnerConfig: latent_dim must be divisible by macro_k");
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model"] = to_string(model);
    j["latent_dim"] = latent_dim;
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["max_epochs"] = max_epochs;
    j["beta"] = beta;
    j["macro_k"] = macro_k;
    j["dropout_keep"] = dropout_keep;
    j["seed"] = seed;
    j["patience"] = patience;
    j["eval_every"] = eval_every;
    j["hidden_dim"] = hidden_dim;
    j["anneal_fraction"] = anneal_fraction;
    j["macrid_tau"] = macrid_tau;
    j["svd_oversample"] = svd_oversample;
    j["svd_power_iters"] = svd_power_iters;
    return j;
  }

  static LearnerConfig from_json(const nlohmann::json& j) {
    LearnerConfig c;
    c.model = model_from_string(j.at("model").get<std::string>());
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.beta = j.value("beta", c.beta);
    c.macro_k = j.value("macro_k", c.macro_k);
    c.dropout_keep = j.value("dropout_keep", c.dropout_keep);
    c.seed = j.value("seed", c.seed);
    c.patience = j.value("patience", c.patience);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.anneal_fraction = j.value("anneal_fraction", c.anneal_fraction);
    c.macrid_tau = j.value("macrid_tau", c.macrid_tau);
    c.svd_oversample = j.value("svd_oversample", c.svd_oversample);
    c.svd_power_iters = j.value("svd_power_iters", c.svd_power_iters);
    return c;
  }
};

/// Dense user x M latent representations plus provenance. For MacridVAE,
/// M = macro_k * concept_dim and concept_dim records the block layout.
struct RepresentationMatrix {
  MatrixXd values;  // n_users x M
  std::string model_tag;
  std::uint64_t seed = 0;
  Index concept_dim = 0;  // 0 = unstructured latent space

  Index n_users() const { return values.rows(); }
  Index M() const { return values.cols(); }

  void validate() const {
    if (!values.allFinite()) {
      throw Error("RepresentationMatrix: non-finite values");
    }
    if (M() < 2) throw Error("RepresentationMatrix: M must be >= 2");
  }
};

}  // namespace disrec
