// Command-line driver for the disrec toolkit: dataset preparation, model
// training/tuning, evaluation matrices, and correlation reports.

#include "disrec/disrec.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace disrec;

namespace {

DatasetBundle load_bundle(const std::string& name, const std::string& snapshot,
                          const std::string& factors_csv) {
  DatasetBundle ds;
  ds.name = name;
  ds.matrix = read_snapshot(snapshot);
  ds.factors = read_factors_csv(factors_csv);
  if (ds.factors.n_users != ds.matrix.n_users()) {
    throw Error("dataset '" + name + "': factor rows (" +
                std::to_string(ds.factors.n_users) +
                ") do not match snapshot users (" +
                std::to_string(ds.matrix.n_users()) + ")");
  }
  return ds;
}

int cmd_ingest(const std::string& input, const std::string& format,
               double threshold, const std::string& comparison, Index min_ipu,
               Index min_ipi, const std::string& out) {
  const FileFormat fmt = format == "csv" ? FileFormat::csv : FileFormat::tsv;
  const RatingComparison cmp = comparison == "gt"
                                   ? RatingComparison::greater
                                   : RatingComparison::greater_equal;
  auto rows = ingest(input, fmt);
  std::cout << "parsed " << rows.size() << " rows\n";
  rows = binarize(rows, threshold, cmp);
  std::cout << "kept " << rows.size() << " after binarization (threshold "
            << threshold << ", " << comparison << ")\n";
  InteractionMatrix m = build_matrix(rows);
  if (min_ipu > 0 || min_ipi > 0) {
    m = kcore_filter(m, std::max<Index>(min_ipu, 1), std::max<Index>(min_ipi, 1));
  }
  std::cout << "matrix: " << m.n_users() << " users x " << m.n_items()
            << " items, " << m.nnz() << " interactions\n";
  SnapshotProvenance prov;
  prov.source = input;
  prov.threshold = threshold;
  prov.comparison = comparison;
  prov.min_ipu = min_ipu;
  prov.min_ipi = min_ipi;
  write_snapshot(m, out, prov);
  std::cout << "wrote " << out << " (+ .json sidecar)\n";
  return 0;
}

int cmd_factors(const std::string& snapshot, const std::string& tags_path,
                const std::string& genome_path, const std::string& shelves_path,
                const std::string& shelf_map_path, Index top_n, Index clusters,
                double relevance_threshold, double fraction,
                bool tagged_denominator, std::uint64_t seed,
                const std::string& out) {
  InteractionMatrix m = read_snapshot(snapshot);
  FactorMatrix fm;
  nlohmann::json prov;
  prov["snapshot"] = snapshot;
  prov["fraction"] = fraction;
  prov["seed"] = seed;
  if (!shelves_path.empty()) {
    TagTable shelves = read_tag_file(shelves_path, m, false);
    ShelfMap map = read_shelf_map(shelf_map_path);
    fm = shelf_factors(shelves, map, m, fraction);
    prov["mode"] = "shelves";
    prov["shelf_map"] = shelf_map_path;
  } else {
    const bool genome = !genome_path.empty();
    TagTable tags = read_tag_file(genome ? genome_path : tags_path, m, genome);
    bool warned = false;
    tags = top_tags(tags, top_n, &warned);
    if (warned) {
      std::cerr << "warning: fewer than " << top_n
                << " distinct tags; keeping all\n";
    }
    std::set<std::string> distinct;
    for (const auto& row : tags) distinct.insert(row.tag_id);
    const Index k = std::min<Index>(clusters, static_cast<Index>(distinct.size()));
    if (k < clusters) {
      std::cerr << "warning: only " << distinct.size()
                << " tags; clustering into " << k << " groups\n";
    }
    TagClusterModel model = kmeans_tags(tags, m.n_items(), k, seed);
    auto item_clusters =
        assign_items(model, tags, m.n_items(), genome ? relevance_threshold : 0.0);
    fm = assign_users(m, item_clusters, fraction, {}, tagged_denominator);
    prov["mode"] = genome ? "genome" : "tags";
    prov["top_tags"] = top_n;
    prov["clusters"] = k;
    prov["relevance_threshold"] = genome ? relevance_threshold : 0.0;
    prov["tagged_denominator_only"] = tagged_denominator;
  }
  const Index before = fm.K;
  fm = drop_degenerate(fm);
  std::cout << "factors: " << fm.K << " non-degenerate of " << before << "\n";
  prov["K"] = fm.K;
  write_factors_csv(fm, out, prov);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_synth(Index users, Index items, Index K, Index M, double noise,
              const std::string& mixing, Index items_per_factor,
              Index interactions_per_user, std::uint64_t seed,
              const std::string& out_dir) {
  SynthSpec spec;
  spec.n_users = users;
  spec.n_items = items;
  spec.K = K;
  spec.M = M;
  spec.noise_sigma = noise;
  spec.items_per_factor = items_per_factor;
  spec.interactions_per_user = interactions_per_user;
  spec.seed = seed;
  if (mixing == "rotation") {
    spec.mixing = random_rotation(M, seed);
  } else if (mixing != "identity") {
    throw Error("synth: mixing must be identity or rotation");
  }
  SynthData data = generate(spec);
  fs::create_directories(out_dir);
  SnapshotProvenance prov;
  prov.source = "synth(seed=" + std::to_string(seed) + ")";
  nlohmann::json extra;
  extra["K"] = K;
  extra["M"] = M;
  extra["noise_sigma"] = noise;
  extra["mixing"] = mixing;
  prov.extra = extra;
  const auto snap = (fs::path(out_dir) / "snapshot.bin").string();
  write_snapshot(data.interactions, snap, prov);
  nlohmann::json fprov;
  fprov["mode"] = "synth";
  fprov["seed"] = seed;
  write_factors_csv(data.factors, (fs::path(out_dir) / "factors.csv").string(),
                    fprov);
  write_representation_csv(
      data.representation, (fs::path(out_dir) / "representation.csv").string());
  std::cout << "wrote snapshot.bin, factors.csv, representation.csv under "
            << out_dir << "\n";
  return 0;
}

int cmd_tune(const std::string& snapshot, const std::string& model_name,
             Index trials, const std::string& strategy, Index max_epochs,
             std::uint64_t seed, Index workers, const std::string& out) {
  InteractionMatrix m = read_snapshot(snapshot);
  SplitTriple split = split_per_user(m, {}, seed);
  SearchSpace space;
  space.n_trials = trials;
  space.max_epochs = max_epochs;
  space.strategy =
      strategy == "tpe" ? SearchStrategy::tpe : SearchStrategy::random;
  TuneResult result = tune(split.train, split.validation,
                           model_from_string(model_name), space, seed, workers);
  std::cout << "best validation ndcg@100 = " << result.best_objective << "\n";
  std::ofstream f(out);
  if (!f) throw Error("tune: cannot open " + out);
  f << result.best.to_json().dump(2) << "\n";
  std::ofstream log(out + ".trials.json");
  log << tune_result_to_json(result).dump(2) << "\n";
  std::cout << "wrote " << out << " and " << out << ".trials.json\n";
  return 0;
}

LearnerConfig config_for(const std::string& model_name,
                         const std::string& config_path, std::uint64_t seed) {
  LearnerConfig config;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw Error("cannot open config " + config_path);
    config = LearnerConfig::from_json(nlohmann::json::parse(in));
  }
  config.model = model_from_string(model_name);
  config.seed = seed;
  return config;
}

int cmd_train(const std::string& snapshot, const std::string& model_name,
              const std::string& config_path, std::uint64_t seed,
              const std::string& out_dir) {
  InteractionMatrix m = read_snapshot(snapshot);
  SplitTriple split = split_per_user(m, {}, seed);
  LearnerConfig config = config_for(model_name, config_path, seed);
  TrainLog log;
  FittedModel model = fit_learner(split.train, split.validation, config, &log);
  fs::create_directories(out_dir);
  const auto ckpt = (fs::path(out_dir) / (model_name + ".ckpt")).string();
  save_checkpoint(model, config, ckpt);
  std::cout << "wrote " << ckpt << "\n";
  if (model.has_representation()) {
    RepresentationMatrix rep = model.encode(split.train);
    const auto reps =
        (fs::path(out_dir) / (model_name + "_representation.csv")).string();
    write_representation_csv(rep, reps);
    std::cout << "wrote " << reps << "\n";
  }
  if (!log.val_ndcg100.empty()) {
    std::cout << "best validation ndcg@100 = " << log.best_val << " at epoch "
              << log.best_epoch << "\n";
  }
  return 0;
}

int cmd_evaluate_single(const std::string& snapshot, const std::string& factors,
                        const std::string& model_name,
                        const std::string& config_path, std::uint64_t seed,
                        const std::string& out_dir,
                        const std::string& diagnostics_dir) {
  DatasetBundle ds = load_bundle(fs::path(snapshot).stem().string(), snapshot,
                                 factors);
  LearnerConfig config = config_for(model_name, config_path, seed);
  PipelineSettings settings;
  settings.diagnostics_dir = diagnostics_dir;
  RunRecord record = evaluate_single(ds, config.model, config, seed, settings);
  record.provenance_hash = pipeline_provenance(ds, record.config, seed);
  write_record_atomic(record, out_dir);
  std::cout << "wrote "
            << (fs::path(out_dir) /
                record_filename(record.dataset, record.model, seed))
                   .string()
            << "\n";
  return 0;
}

int cmd_evaluate_matrix(const std::string& run_config_path,
                        std::uint64_t seed_override, Index workers_override,
                        const std::string& out_dir_override) {
  RunConfigFile cfg = RunConfigFile::parse(run_config_path);
  std::vector<DatasetBundle> bundles;
  for (const auto& name : cfg.get_list("datasets")) {
    bundles.push_back(load_bundle(name,
                                  cfg.require("dataset." + name + ".snapshot"),
                                  cfg.require("dataset." + name + ".factors")));
  }
  MatrixJob job;
  for (const auto& b : bundles) job.datasets.push_back(&b);
  for (const auto& m : cfg.get_list("models")) {
    job.models.push_back(model_from_string(m));
  }
  for (Index s : cfg.get_index_list("seeds")) {
    job.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (job.seeds.empty() && seed_override > 0) {
    job.seeds.push_back(seed_override);
  }
  if (job.datasets.empty() || job.models.empty() || job.seeds.empty()) {
    throw Error("run config: datasets, models and seeds are all required");
  }
  for (ModelKind m : job.models) {
    job.configs[to_string(m)] = cfg.learner_config(m);
  }
  job.settings = cfg.pipeline_settings();
  job.out_dir = !out_dir_override.empty() ? out_dir_override
                                          : cfg.get("out_dir", "runs");
  job.workers = workers_override > 0 ? workers_override
                                     : cfg.get_index("workers", 1);
  auto records = run_matrix(job);
  Index failed = 0;
  for (const auto& r : records) {
    if (r.failed()) {
      ++failed;
      std::cerr << "failed: " << r.dataset << "/" << r.model << "/s" << r.seed
                << ": " << r.error << "\n";
    }
  }
  std::cout << records.size() - failed << "/" << records.size()
            << " records complete under " << job.out_dir << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_correlate(const std::string& records_dir, const std::string& grouping,
                  const std::string& out_dir) {
  auto records = load_records(records_dir);
  if (records.empty()) throw Error("correlate: no records in " + records_dir);
  fs::create_directories(out_dir);
  auto emit = [&](Grouping g, const std::string& tag) {
    auto grids = correlation_grids(records, g);
    std::string csv;
    for (const auto& [context, cells] : grids) {
      const std::string c = grid_csv(context, cells);
      csv += csv.empty() ? c : c.substr(c.find('\n') + 1);
    }
    std::ofstream out(fs::path(out_dir) / ("rmcorr_" + tag + ".csv"));
    out << csv;
    std::cout << "wrote rmcorr_" << tag << ".csv (" << grids.size()
              << " grids)\n";
  };
  // grouping by model yields per-dataset grids and vice versa
  if (grouping == "by_model" || grouping == "both") {
    emit(Grouping::by_model, "by_dataset");
  }
  if (grouping == "by_dataset" || grouping == "both") {
    emit(Grouping::by_dataset, "by_model");
  }
  return 0;
}

int cmd_report(const std::string& records_dir, const std::string& out_dir) {
  auto records = load_records(records_dir);
  auto bundle = report(records);
  write_report(bundle, out_dir);
  std::cout << "wrote " << bundle.csv.size() + bundle.markdown.size()
            << " report files under " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recommender representation disentanglement and "
               "interpretability toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  Index workers = 0;
  std::string out_dir;
  app.add_option("--seed", seed, "global random seed")->capture_default_str();
  app.add_option("--workers", workers, "worker threads (0 = config/default)");
  app.add_option("--out-dir", out_dir, "output directory override");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "parse, binarize and k-core "
                                                  "filter an interaction log");
  std::string in_path, in_format = "tsv", comparison = "ge", snap_out;
  double threshold = 1.0;
  Index min_ipu = 0, min_ipi = 0;
  ingest_cmd->add_option("--input", in_path)->required();
  ingest_cmd->add_option("--format", in_format)
      ->check(CLI::IsMember({"tsv", "csv"}));
  ingest_cmd->add_option("--threshold", threshold)->capture_default_str();
  ingest_cmd->add_option("--comparison", comparison)
      ->check(CLI::IsMember({"ge", "gt"}));
  ingest_cmd->add_option("--min-ipu", min_ipu)->capture_default_str();
  ingest_cmd->add_option("--min-ipi", min_ipi)->capture_default_str();
  ingest_cmd->add_option("--out", snap_out)->required();

  // factors
  auto* factors_cmd =
      app.add_subcommand("factors", "derive ground-truth user factors");
  std::string fsnap, tags_path, genome_path, shelves_path, shelf_map_path,
      factors_out;
  Index top_n = 100, clusters = 20;
  double relevance_threshold = 0.4, fraction = 0.5;
  bool tagged_denominator = false;
  factors_cmd->add_option("--snapshot", fsnap)->required();
  factors_cmd->add_option("--tags", tags_path, "plain tag TSV (item, tag)");
  factors_cmd->add_option("--genome", genome_path,
                          "relevance TSV (item, tag, relevance)");
  factors_cmd->add_option("--shelves", shelves_path, "shelf TSV (item, shelf)");
  factors_cmd->add_option("--shelf-map", shelf_map_path,
                          "TSV (raw_shelf, canonical_or_DROP)");
  factors_cmd->add_option("--top-tags", top_n)->capture_default_str();
  factors_cmd->add_option("--clusters", clusters)->capture_default_str();
  factors_cmd->add_option("--relevance-threshold", relevance_threshold)
      ->capture_default_str();
  factors_cmd->add_option("--fraction", fraction)->capture_default_str();
  factors_cmd->add_flag("--tagged-denominator", tagged_denominator,
                        "count only cluster-tagged items in the user "
                        "membership denominator");
  factors_cmd->add_option("--out", factors_out)->required();

  // synth
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic dataset with known "
                                  "factors");
  Index s_users = 1000, s_items = 500, s_K = 6, s_M = 6, s_ipf = 0, s_ipu = 30;
  double s_noise = 0.05;
  std::string s_mixing = "identity", s_out = "synth_out";
  synth_cmd->add_option("--users", s_users)->capture_default_str();
  synth_cmd->add_option("--items", s_items)->capture_default_str();
  synth_cmd->add_option("--factors", s_K)->capture_default_str();
  synth_cmd->add_option("--dims", s_M)->capture_default_str();
  synth_cmd->add_option("--noise", s_noise)->capture_default_str();
  synth_cmd->add_option("--mixing", s_mixing)
      ->check(CLI::IsMember({"identity", "rotation"}));
  synth_cmd->add_option("--items-per-factor", s_ipf)->capture_default_str();
  synth_cmd->add_option("--interactions-per-user", s_ipu)
      ->capture_default_str();
  synth_cmd->add_option("--out", s_out, "output directory")
      ->capture_default_str();

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "hyperparameter search");
  std::string t_snap, t_model, t_strategy = "random", t_out = "best_config.json";
  Index t_trials = 50, t_max_epochs = 500;
  tune_cmd->add_option("--snapshot", t_snap)->required();
  tune_cmd->add_option("--model", t_model)->required();
  tune_cmd->add_option("--trials", t_trials)->capture_default_str();
  tune_cmd->add_option("--strategy", t_strategy)
      ->check(CLI::IsMember({"random", "tpe"}));
  tune_cmd->add_option("--max-epochs", t_max_epochs)->capture_default_str();
  tune_cmd->add_option("--out", t_out)->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model");
  std::string tr_snap, tr_model, tr_config;
  train_cmd->add_option("--snapshot", tr_snap)->required();
  train_cmd->add_option("--model", tr_model)->required();
  train_cmd->add_option("--config", tr_config, "LearnerConfig JSON");

  // evaluate
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "run the evaluation pipeline (single record or matrix)");
  std::string e_snap, e_factors, e_model, e_config, e_run_config;
  eval_cmd->add_option("--run-config", e_run_config,
                       "declarative matrix configuration file");
  eval_cmd->add_option("--snapshot", e_snap);
  eval_cmd->add_option("--factors", e_factors);
  eval_cmd->add_option("--model", e_model);
  eval_cmd->add_option("--config", e_config, "LearnerConfig JSON");

  // correlate
  auto* corr_cmd =
      app.add_subcommand("correlate", "rmcorr grids over run records");
  std::string c_records, c_grouping = "both";
  corr_cmd->add_option("--records", c_records)->required();
  corr_cmd->add_option("--grouping", c_grouping)
      ->check(CLI::IsMember({"by_model", "by_dataset", "both"}));

  // report
  auto* report_cmd =
      app.add_subcommand("report", "tables and grids from run records");
  std::string r_records;
  report_cmd->add_option("--records", r_records)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) {
      return cmd_ingest(in_path, in_format, threshold, comparison, min_ipu,
                        min_ipi, snap_out);
    }
    if (*factors_cmd) {
      if (tags_path.empty() && genome_path.empty() && shelves_path.empty()) {
        throw Error("factors: one of --tags, --genome, --shelves is required");
      }
      if (!shelves_path.empty() && shelf_map_path.empty()) {
        throw Error("factors: --shelves requires --shelf-map");
      }
      return cmd_factors(fsnap, tags_path, genome_path, shelves_path,
                         shelf_map_path, top_n, clusters, relevance_threshold,
                         fraction, tagged_denominator, seed, factors_out);
    }
    if (*synth_cmd) {
      return cmd_synth(s_users, s_items, s_K, s_M, s_noise, s_mixing, s_ipf,
                       s_ipu, seed, out_dir.empty() ? s_out : out_dir);
    }
    if (*tune_cmd) {
      return cmd_tune(t_snap, t_model, t_trials, t_strategy, t_max_epochs, seed,
                      std::max<Index>(workers, 1), t_out);
    }
    if (*train_cmd) {
      return cmd_train(tr_snap, tr_model, tr_config, seed,
                       out_dir.empty() ? "train_out" : out_dir);
    }
    if (*eval_cmd) {
      if (!e_run_config.empty()) {
        return cmd_evaluate_matrix(e_run_config, seed, workers, out_dir);
      }
      if (e_snap.empty() || e_factors.empty() || e_model.empty()) {
        throw Error(
            "evaluate: need --run-config, or --snapshot --factors --model");
      }
      return cmd_evaluate_single(e_snap, e_factors, e_model, e_config, seed,
                                 out_dir.empty() ? "runs" : out_dir);
    }
    if (*corr_cmd) {
      return cmd_correlate(c_records, c_grouping,
                           out_dir.empty() ? "correlations" : out_dir);
    }
    if (*report_cmd) {
      return cmd_report(r_records, out_dir.empty() ? "report" : out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
