#pragma once

#include "disrec/attribution.hpp"
#include "disrec/dci.hpp"
#include "disrec/harness/pool.hpp"
#include "disrec/harness/search.hpp"
#include "disrec/learners/learners.hpp"
#include "disrec/rankeval.hpp"
#include "disrec/stats.hpp"
#include "disrec/synth.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace disrec {

/// One (model, dataset, seed) evaluation outcome. Top-Popular's
/// disentanglement and interpretability fields stay null.
struct RunRecord {
  std::string model;
  std::string dataset;
  std::uint64_t seed = 0;
  LearnerConfig config;
  EvalResult effectiveness;
  std::optional<double> D;
  std::optional<double> C;
  std::optional<double> lime_global;
  std::optional<double> shap_global;
  std::vector<double> probe_val_accuracy;
  std::vector<Index> zero_importance_probes;  // probes that never split
  double wall_clock_sec = 0.0;
  std::string provenance_hash;
  std::string error;  // nonempty when the run failed

  bool failed() const { return !error.empty(); }
};

inline nlohmann::json run_record_to_json(const RunRecord& r) {
  nlohmann::json j;
  j["schema"] = "disrec.run_record.v1";
  j["model"] = r.model;
  j["dataset"] = r.dataset;
  j["seed"] = r.seed;
  j["config"] = r.config.to_json();
  nlohmann::json eff;
  for (const auto& [metric, by_k] : r.effectiveness.scores) {
    for (const auto& [k, v] : by_k) {
      eff[metric + "@" + std::to_string(k)] = v;
    }
  }
  j["effectiveness"] = eff;
  j["n_users_evaluated"] = r.effectiveness.n_users_evaluated;
  j["disentanglement"] = r.D.has_value() ? nlohmann::json(*r.D)
                                         : nlohmann::json(nullptr);
  j["completeness"] = r.C.has_value() ? nlohmann::json(*r.C)
                                      : nlohmann::json(nullptr);
  j["lime_global"] = r.lime_global.has_value() ? nlohmann::json(*r.lime_global)
                                               : nlohmann::json(nullptr);
  j["shap_global"] = r.shap_global.has_value() ? nlohmann::json(*r.shap_global)
                                               : nlohmann::json(nullptr);
  j["probe_val_balanced_accuracy"] = r.probe_val_accuracy;
  j["zero_importance_probes"] = r.zero_importance_probes;
  j["wall_clock_sec"] = r.wall_clock_sec;
  j["provenance"] = r.provenance_hash;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.model = j.at("model").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = LearnerConfig::from_json(j.at("config"));
  for (const auto& [key, value] : j.at("effectiveness").items()) {
    const auto at = key.find('@');
    if (at == std::string::npos) continue;
    r.effectiveness.scores[key.substr(0, at)]
                          [std::stol(key.substr(at + 1))] =
        value.get<double>();
  }
  r.effectiveness.n_users_evaluated = j.value("n_users_evaluated", Index{0});
  if (!j.at("disentanglement").is_null()) {
    r.D = j.at("disentanglement").get<double>();
  }
  if (!j.at("completeness").is_null()) r.C = j.at("completeness").get<double>();
  if (!j.at("lime_global").is_null()) {
    r.lime_global = j.at("lime_global").get<double>();
  }
  if (!j.at("shap_global").is_null()) {
    r.shap_global = j.at("shap_global").get<double>();
  }
  r.probe_val_accuracy =
      j.value("probe_val_balanced_accuracy", std::vector<double>{});
  r.zero_importance_probes =
      j.value("zero_importance_probes", std::vector<Index>{});
  r.wall_clock_sec = j.value("wall_clock_sec", 0.0);
  r.provenance_hash = j.value("provenance", std::string{});
  r.error = j.value("error", std::string{});
  return r;
}

/// One dataset of the evaluation matrix: the full preprocessed matrix plus
/// its ground-truth factors.
struct DatasetBundle {
  std::string name;
  InteractionMatrix matrix;
  FactorMatrix factors;
};

struct PipelineSettings {
  std::vector<Index> cutoffs = {10, 50, 100};
  ProbeGrid probe_grid;
  AttributionBudget attribution;
  double probe_train_fraction = 0.75;  // user-level split for the probes
  bool compute_attributions = true;
  std::string diagnostics_dir;  // when set: probe dumps, F/S CSVs, DCI breakdown
};

/// Deterministic user-level partition for probe fitting/tuning.
inline void probe_user_split(Index n_users, double train_fraction,
                             std::uint64_t seed, std::vector<Index>* train,
                             std::vector<Index>* val) {
  std::vector<Index> users(static_cast<std::size_t>(n_users));
  std::iota(users.begin(), users.end(), Index{0});
  Rng rng = make_rng(seed, 0x9b5);
  std::shuffle(users.begin(), users.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(n_users)));
  train->assign(users.begin(), users.begin() + static_cast<Index>(n_train));
  val->assign(users.begin() + static_cast<Index>(n_train), users.end());
  std::sort(train->begin(), train->end());
  std::sort(val->begin(), val->end());
}

namespace diag_detail {

inline void write_matrix_csv(const MatrixXd& m, const std::string& path,
                             const std::vector<std::string>& col_labels) {
  std::ofstream out(path);
  if (!out) throw Error("diagnostics: cannot open " + path);
  for (std::size_t j = 0; j < col_labels.size(); ++j) {
    out << (j ? "," : "") << col_labels[j];
  }
  out << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      out << (j ? "," : "") << format_double(m(i, j));
    }
    out << "\n";
  }
}

/// Audit exports for one record: probe tree dumps, the importance matrix F,
/// per-dimension/per-factor DCI breakdowns, and the attribution matrices.
inline void write_diagnostics(const std::string& dir, const std::string& stem,
                              const ProbeSuite& suite,
                              const ImportanceMatrix& F, const DciScores& dci,
                              const std::vector<std::string>& factor_labels,
                              const AttributionMatrix* lime_S,
                              const AttributionMatrix* shap_S) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir) / stem;
  nlohmann::json probes = nlohmann::json::array();
  for (std::size_t j = 0; j < suite.probes.size(); ++j) {
    nlohmann::json p = probe_to_json(suite.probes[j]);
    p["factor"] = factor_labels[j];
    p["val_balanced_accuracy"] = suite.val_balanced_accuracy[j];
    probes.push_back(p);
  }
  {
    std::ofstream out(base.string() + "__probes.json");
    out << probes.dump(2) << "\n";
  }
  write_matrix_csv(F.F, base.string() + "__importance.csv", factor_labels);
  {
    std::ofstream out(base.string() + "__dci.csv");
    out << "kind,index,label,score,weight\n";
    for (Index i = 0; i < dci.per_dim_D.size(); ++i) {
      out << "dimension," << i << ",z" << i << ","
          << format_double(dci.per_dim_D[i]) << ","
          << format_double(dci.alpha[i]) << "\n";
    }
    for (Index j = 0; j < dci.per_factor_C.size(); ++j) {
      out << "factor," << j << "," << factor_labels[static_cast<std::size_t>(j)]
          << "," << format_double(dci.per_factor_C[j]) << ","
          << format_double(dci.beta[j]) << "\n";
    }
  }
  if (lime_S != nullptr) {
    write_matrix_csv(lime_S->S, base.string() + "__lime_S.csv", factor_labels);
  }
  if (shap_S != nullptr) {
    write_matrix_csv(shap_S->S, base.string() + "__shap_S.csv", factor_labels);
  }
}

}  // namespace diag_detail

/// The full single-record pipeline: re-split with the seed, train, evaluate
/// effectiveness on test, fit probes, compute DCI and the attribution
/// globals.
inline RunRecord evaluate_single(const DatasetBundle& dataset, ModelKind model,
                                 LearnerConfig config, std::uint64_t seed,
                                 const PipelineSettings& settings = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.model = to_string(model);
  record.dataset = dataset.name;
  record.seed = seed;
  config.model = model;
  config.seed = seed;
  record.config = config;

  SplitTriple split = split_per_user(dataset.matrix, {}, seed);
  FittedModel fitted = fit_learner(split.train, split.validation, config);
  ScoreMatrix scores = fitted.scorer(split.train, split.train);
  record.effectiveness =
      evaluate_ranking(scores, split.test, settings.cutoffs);

  if (fitted.has_representation()) {
    RepresentationMatrix rep = fitted.encode(split.train);
    std::vector<Index> probe_train, probe_val;
    probe_user_split(rep.n_users(), settings.probe_train_fraction, seed,
                     &probe_train, &probe_val);
    FactorMatrix usable = drop_degenerate(dataset.factors);
    ProbeSuite suite =
        fit_probe_suite(rep.values, usable, probe_train, probe_val,
                        settings.probe_grid, seed);
    record.probe_val_accuracy = suite.val_balanced_accuracy;
    ImportanceMatrix F = importance_from_suite(suite);
    for (Index j = 0; j < F.K(); ++j) {
      if (F.F.col(j).sum() <= 0.0) record.zero_importance_probes.push_back(j);
    }
    DciScores dci;
    if (F.F.sum() > 0.0) {
      record.D = disentanglement(F, &dci);
      record.C = completeness(F, &dci);
    }
    AttributionMatrix lime_S, shap_S;
    if (settings.compute_attributions) {
      lime_S = build_attribution_matrix(suite, rep.values,
                                        AttributionMethod::lime,
                                        settings.attribution, seed);
      shap_S = build_attribution_matrix(suite, rep.values,
                                        AttributionMethod::shap,
                                        settings.attribution, seed);
      record.lime_global =
          global_score(lime_S, AttributionMethod::lime).value;
      record.shap_global =
          global_score(shap_S, AttributionMethod::shap).value;
    }
    if (!settings.diagnostics_dir.empty()) {
      diag_detail::write_diagnostics(
          settings.diagnostics_dir,
          dataset.name + "__" + to_string(model) + "__s" + std::to_string(seed),
          suite, F, dci, usable.factor_labels,
          settings.compute_attributions ? &lime_S : nullptr,
          settings.compute_attributions ? &shap_S : nullptr);
    }
  }
  record.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return record;
}

// ---------------------------------------------------------------------------
// matrix execution with resumability
// ---------------------------------------------------------------------------

inline std::string record_filename(const std::string& dataset,
                                   const std::string& model,
                                   std::uint64_t seed) {
  return dataset + "__" + model + "__s" + std::to_string(seed) + ".json";
}

inline std::string pipeline_provenance(const DatasetBundle& dataset,
                                       const LearnerConfig& config,
                                       std::uint64_t seed) {
  std::uint64_t h = dataset.matrix.content_hash();
  std::string factors_blob;
  for (Index u = 0; u < dataset.factors.n_users; ++u) {
    for (Index c = 0; c < dataset.factors.K; ++c) {
      factors_blob.push_back(dataset.factors.memberships(u, c) ? '1' : '0');
    }
  }
  h = fnv1a(factors_blob, h);
  h = fnv1a(config.to_json().dump(), h);
  h = fnv1a(&seed, sizeof(seed), h);
  return hex64(h);
}

inline void write_record_atomic(const RunRecord& record,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto path =
      out_dir / record_filename(record.dataset, record.model, record.seed);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("write_record_atomic: cannot open " + tmp);
    out << run_record_to_json(record).dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

struct MatrixJob {
  std::vector<const DatasetBundle*> datasets;
  std::vector<ModelKind> models;
  std::vector<std::uint64_t> seeds;
  // config per (dataset, model); fall back to per-model, then defaults
  std::map<std::string, LearnerConfig> configs;  // key: dataset/model or model
  PipelineSettings settings;
  std::string out_dir = "runs";
  Index workers = 1;
};

inline LearnerConfig job_config(const MatrixJob& job, const std::string& dataset,
                                ModelKind model) {
  const std::string model_name = to_string(model);
  auto it = job.configs.find(dataset + "/" + model_name);
  if (it != job.configs.end()) return it->second;
  it = job.configs.find(model_name);
  if (it != job.configs.end()) return it->second;
  LearnerConfig c;
  c.model = model;
  return c;
}

/// Run every (dataset, model, seed) cell, skipping records already on disk
/// with a matching provenance hash. Individual failures are recorded and the
/// matrix continues.
inline std::vector<RunRecord> run_matrix(const MatrixJob& job) {
  struct Cell {
    const DatasetBundle* dataset;
    ModelKind model;
    std::uint64_t seed;
    LearnerConfig config;
  };
  std::vector<Cell> cells;
  for (const auto* ds : job.datasets) {
    for (ModelKind model : job.models) {
      for (std::uint64_t seed : job.seeds) {
        cells.push_back({ds, model, seed, job_config(job, ds->name, model)});
      }
    }
  }
  std::vector<RunRecord> records(cells.size());
  ThreadPool pool(static_cast<std::size_t>(std::max<Index>(job.workers, 1)));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    pool.submit([&job, &cells, &records, c] {
      const Cell& cell = cells[c];
      const std::string prov =
          pipeline_provenance(*cell.dataset, cell.config, cell.seed);
      const auto path = std::filesystem::path(job.out_dir) /
                        record_filename(cell.dataset->name,
                                        to_string(cell.model), cell.seed);
      if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        try {
          RunRecord existing = run_record_from_json(nlohmann::json::parse(in));
          if (existing.provenance_hash == prov && !existing.failed()) {
            records[c] = std::move(existing);
            return;
          }
        } catch (const std::exception&) {
          // unreadable record: recompute
        }
      }
      RunRecord record;
      try {
        record = evaluate_single(*cell.dataset, cell.model, cell.config,
                                 cell.seed, job.settings);
      } catch (const std::exception& e) {
        record.model = to_string(cell.model);
        record.dataset = cell.dataset->name;
        record.seed = cell.seed;
        record.config = cell.config;
        record.error = e.what();
      }
      record.provenance_hash = prov;
      write_record_atomic(record, job.out_dir);
      records[c] = std::move(record);
    });
  }
  pool.wait();
  return records;
}

inline std::vector<RunRecord> load_records(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    records.push_back(run_record_from_json(nlohmann::json::parse(in)));
  }
  return records;
}

}  // namespace disrec
