#pragma once

#include "disrec/harness/run_matrix.hpp"

#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace disrec {

/// Flat `key = value` configuration file with `#` comments. Values are
/// scalars or comma-separated lists; dotted keys express nesting, e.g.
///
///   datasets = ml1m
///   dataset.ml1m.snapshot = data/ml1m.snap
///   dataset.ml1m.factors  = data/ml1m_factors.csv
///   models = pure_svd, multi_vae
///   seeds = 1, 2, 3, 4, 5
///   config.multi_vae.latent_dim = 8
///   probe.n_trees = 50, 100
///   attr.max_users = 500
///   workers = 4
///   out_dir = runs
class RunConfigFile {
 public:
  static RunConfigFile parse(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("run config: cannot open " + path);
    RunConfigFile cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw Error("run config: line " + std::to_string(lineno) +
                    ": expected key = value");
      }
      cfg.values_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = values_.find(key);
    return it != values_.end() ? it->second : fallback;
  }

  std::string require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error("run config: missing key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v;
    if (!parse_number(it->second, v)) {
      throw Error("run config: key '" + key + "' is not a number");
    }
    return v;
  }

  Index get_index(const std::string& key, Index fallback) const {
    return static_cast<Index>(
        get_double(key, static_cast<double>(fallback)));
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = values_.find(key);
    if (it == values_.end()) return out;
    for (const auto& part : split(it->second, ',')) {
      const std::string p = trim(part);
      if (!p.empty()) out.push_back(p);
    }
    return out;
  }

  std::vector<Index> get_index_list(const std::string& key) const {
    std::vector<Index> out;
    for (const auto& s : get_list(key)) {
      double v;
      if (!parse_number(s, v)) {
        throw Error("run config: key '" + key + "' has non-numeric entry '" +
                    s + "'");
      }
      out.push_back(static_cast<Index>(v));
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) {
      double v;
      if (!parse_number(s, v)) {
        throw Error("run config: key '" + key + "' has non-numeric entry '" +
                    s + "'");
      }
      out.push_back(v);
    }
    return out;
  }

  const std::map<std::string, std::string>& raw() const { return values_; }

  /// Learner overrides under config.<model>.<field>.
  LearnerConfig learner_config(ModelKind model) const {
    LearnerConfig c;
    c.model = model;
    const std::string prefix = "config." + std::string(to_string(model)) + ".";
    c.latent_dim = get_index(prefix + "latent_dim", c.latent_dim);
    c.learning_rate = get_double(prefix + "learning_rate", c.learning_rate);
    c.batch_size = get_index(prefix + "batch_size", c.batch_size);
    c.max_epochs = get_index(prefix + "max_epochs", c.max_epochs);
    c.beta = get_double(prefix + "beta", c.beta);
    c.macro_k = get_index(prefix + "macro_k", c.macro_k);
    c.dropout_keep = get_double(prefix + "dropout_keep", c.dropout_keep);
    c.patience = get_index(prefix + "patience", c.patience);
    c.eval_every = get_index(prefix + "eval_every", c.eval_every);
    c.hidden_dim = get_index(prefix + "hidden_dim", c.hidden_dim);
    c.anneal_fraction = get_double(prefix + "anneal_fraction", c.anneal_fraction);
    c.macrid_tau = get_double(prefix + "macrid_tau", c.macrid_tau);
    return c;
  }

  PipelineSettings pipeline_settings() const {
    PipelineSettings s;
    if (has("probe.n_trees")) s.probe_grid.n_trees = get_index_list("probe.n_trees");
    if (has("probe.max_depth")) {
      s.probe_grid.max_depth = get_index_list("probe.max_depth");
    }
    if (has("probe.shrinkage")) {
      s.probe_grid.shrinkage = get_double_list("probe.shrinkage");
    }
    s.attribution.lime_samples =
        get_index("attr.lime_samples", s.attribution.lime_samples);
    s.attribution.shap_coalitions =
        get_index("attr.shap_coalitions", s.attribution.shap_coalitions);
    s.attribution.max_users = get_index("attr.max_users", s.attribution.max_users);
    s.attribution.max_background =
        get_index("attr.max_background", s.attribution.max_background);
    s.probe_train_fraction =
        get_double("probe.train_fraction", s.probe_train_fraction);
    if (has("cutoffs")) s.cutoffs = get_index_list("cutoffs");
    s.diagnostics_dir = get("diagnostics_dir", "");
    return s;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace disrec
