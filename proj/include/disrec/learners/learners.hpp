#pragma once

#include "disrec/dataio.hpp"
#include "disrec/learners/config.hpp"
#include "disrec/learners/macrid_vae.hpp"
#include "disrec/learners/mult_ae.hpp"
#include "disrec/learners/pure_svd.hpp"
#include "disrec/learners/top_popular.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <variant>

namespace disrec {

/// A fitted learner of any kind behind one value-semantic wrapper.
class FittedModel {
 public:
  FittedModel() = default;
  explicit FittedModel(TopPopularModel m) : model_(std::move(m)) {}
  explicit FittedModel(PureSvdModel m) : model_(std::move(m)) {}
  explicit FittedModel(MultAeModel m) : model_(std::move(m)) {}
  explicit FittedModel(MacridVaeModel m) : model_(std::move(m)) {}

  bool fitted() const { return !std::holds_alternative<std::monostate>(model_); }

  ModelKind kind() const {
    if (std::holds_alternative<TopPopularModel>(model_)) {
      return ModelKind::top_popular;
    }
    if (std::holds_alternative<PureSvdModel>(model_)) return ModelKind::pure_svd;
    if (const auto* ae = std::get_if<MultAeModel>(&model_)) {
      return ae->config().model;
    }
    if (std::holds_alternative<MacridVaeModel>(model_)) {
      return ModelKind::macrid_vae;
    }
    throw Error("FittedModel: unfitted model");
  }

  bool has_representation() const {
    return disrec::has_representation(kind());
  }

  /// Deterministic user representations from the given interaction rows.
  RepresentationMatrix encode(const InteractionMatrix& interactions) const {
    if (const auto* svd = std::get_if<PureSvdModel>(&model_)) {
      return svd->encode(interactions);
    }
    if (const auto* ae = std::get_if<MultAeModel>(&model_)) {
      return ae->encode(interactions);
    }
    if (const auto* mac = std::get_if<MacridVaeModel>(&model_)) {
      return mac->encode(interactions);
    }
    if (std::holds_alternative<TopPopularModel>(model_)) {
      throw Error("encode_users: top_popular has no representation");
    }
    throw Error("encode_users: unfitted model");
  }

  ScoreMatrix scorer(const InteractionMatrix& input_rows,
                     const InteractionMatrix& exclude) const {
    if (const auto* tp = std::get_if<TopPopularModel>(&model_)) {
      return tp->scorer(exclude);
    }
    if (const auto* svd = std::get_if<PureSvdModel>(&model_)) {
      return svd->scorer(exclude);
    }
    if (const auto* ae = std::get_if<MultAeModel>(&model_)) {
      return ae->scorer(input_rows, exclude);
    }
    if (const auto* mac = std::get_if<MacridVaeModel>(&model_)) {
      return mac->scorer(input_rows, exclude);
    }
    throw Error("scorer: unfitted model");
  }

  const std::variant<std::monostate, TopPopularModel, PureSvdModel, MultAeModel,
                     MacridVaeModel>&
  raw() const {
    return model_;
  }

 private:
  std::variant<std::monostate, TopPopularModel, PureSvdModel, MultAeModel,
               MacridVaeModel>
      model_;
};

/// Train any model kind on (train, validation) with the interface the
/// harness uses.
inline FittedModel fit_learner(const InteractionMatrix& train,
                               const InteractionMatrix& validation,
                               const LearnerConfig& config,
                               TrainLog* log = nullptr) {
  switch (config.model) {
    case ModelKind::top_popular:
      return FittedModel(TopPopularModel::fit(train));
    case ModelKind::pure_svd:
      return FittedModel(PureSvdModel::fit(train, config));
    case ModelKind::multi_dae:
    case ModelKind::multi_vae:
    case ModelKind::beta_vae:
      return FittedModel(train_mult_ae(train, validation, config, log));
    case ModelKind::macrid_vae:
      return FittedModel(train_macrid_vae(train, validation, config, log));
  }
  throw Error("fit_learner: unknown model kind");
}

// ---------------------------------------------------------------------------
// checkpoints: "DRCKPT01" magic, JSON config blob, then named f64 tensors
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'D', 'R', 'C', 'K',
                                             'P', 'T', '0', '1'};

namespace ckpt_detail {

inline void write_string(std::ofstream& out, const std::string& s) {
  detail::write_le<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::ifstream& in) {
  const auto n = detail::read_le<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error("checkpoint: truncated string");
  return s;
}

inline void write_tensor(std::ofstream& out, const std::string& name,
                         const MatrixXd& m) {
  write_string(out, name);
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      detail::write_le<std::uint64_t>(out, bits);
    }
  }
}

inline std::pair<std::string, MatrixXd> read_tensor(std::ifstream& in) {
  std::string name = read_string(in);
  const auto rows = static_cast<Index>(detail::read_le<std::uint64_t>(in));
  const auto cols = static_cast<Index>(detail::read_le<std::uint64_t>(in));
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const std::uint64_t bits = detail::read_le<std::uint64_t>(in);
      double v;
      std::memcpy(&v, &bits, sizeof(v));
      m(r, c) = v;
    }
  }
  return {std::move(name), std::move(m)};
}

}  // namespace ckpt_detail

inline void save_checkpoint(const FittedModel& model, const LearnerConfig& config,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_checkpoint: cannot open " + path);
  out.write(kCheckpointMagic, 8);
  ckpt_detail::write_string(out, config.to_json().dump());

  std::vector<std::pair<std::string, const MatrixXd*>> tensors;
  MatrixXd aux;  // column-matrix view of vector-shaped tensors
  if (const auto* tp = std::get_if<TopPopularModel>(&model.raw())) {
    aux = tp->item_scores;
    tensors.emplace_back("item_scores", &aux);
  } else if (const auto* svd = std::get_if<PureSvdModel>(&model.raw())) {
    tensors.emplace_back("user_factors", &svd->user_factors);
    tensors.emplace_back("item_factors", &svd->item_factors);
    aux = svd->singular_values;
    tensors.emplace_back("singular_values", &aux);
  } else if (const auto* ae = std::get_if<MultAeModel>(&model.raw())) {
    auto names = MultAeModel::param_names();
    auto params = ae->params();
    for (std::size_t i = 0; i < names.size(); ++i) {
      tensors.emplace_back(names[i], params[i]);
    }
  } else if (const auto* mac = std::get_if<MacridVaeModel>(&model.raw())) {
    auto names = MacridVaeModel::param_names();
    auto params = mac->params();
    for (std::size_t i = 0; i < names.size(); ++i) {
      tensors.emplace_back(names[i], params[i]);
    }
  } else {
    throw Error("save_checkpoint: unfitted model");
  }
  detail::write_le<std::uint64_t>(out, tensors.size());
  for (const auto& [name, tensor] : tensors) {
    ckpt_detail::write_tensor(out, name, *tensor);
  }
  // extra scalars for exact reconstruction
  nlohmann::json extra;
  if (const auto* svd = std::get_if<PureSvdModel>(&model.raw())) {
    extra["train_hash"] = svd->train_hash;
    extra["seed"] = svd->seed;
  }
  ckpt_detail::write_string(out, extra.dump());
}

inline FittedModel load_checkpoint(const std::string& path,
                                   LearnerConfig* config_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kCheckpointMagic)) {
    throw Error("load_checkpoint: bad magic in " + path);
  }
  const LearnerConfig config =
      LearnerConfig::from_json(nlohmann::json::parse(ckpt_detail::read_string(in)));
  if (config_out != nullptr) *config_out = config;
  const auto n_tensors = detail::read_le<std::uint64_t>(in);
  std::map<std::string, MatrixXd> tensors;
  for (std::uint64_t t = 0; t < n_tensors; ++t) {
    auto [name, tensor] = ckpt_detail::read_tensor(in);
    tensors.emplace(std::move(name), std::move(tensor));
  }
  nlohmann::json extra = nlohmann::json::parse(ckpt_detail::read_string(in));

  switch (config.model) {
    case ModelKind::top_popular: {
      TopPopularModel m;
      m.item_scores = tensors.at("item_scores").col(0);
      return FittedModel(std::move(m));
    }
    case ModelKind::pure_svd: {
      PureSvdModel m;
      m.user_factors = tensors.at("user_factors");
      m.item_factors = tensors.at("item_factors");
      m.singular_values = tensors.at("singular_values").col(0);
      m.train_hash = extra.value("train_hash", std::uint64_t{0});
      m.seed = extra.value("seed", std::uint64_t{0});
      return FittedModel(std::move(m));
    }
    case ModelKind::multi_dae:
    case ModelKind::multi_vae:
    case ModelKind::beta_vae: {
      MultAeModel m(config, tensors.at("W1").rows());
      auto names = MultAeModel::param_names();
      auto params = m.params();
      for (std::size_t i = 0; i < names.size(); ++i) {
        *params[i] = tensors.at(names[i]);
      }
      return FittedModel(std::move(m));
    }
    case ModelKind::macrid_vae: {
      MacridVaeModel m(config, tensors.at("H").rows());
      auto names = MacridVaeModel::param_names();
      auto params = m.params();
      for (std::size_t i = 0; i < names.size(); ++i) {
        *params[i] = tensors.at(names[i]);
      }
      return FittedModel(std::move(m));
    }
  }
  throw Error("load_checkpoint: unknown model kind");
}

inline void write_representation_csv(const RepresentationMatrix& rep,
                                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_representation_csv: cannot open " + path);
  for (Index j = 0; j < rep.M(); ++j) {
    out << (j ? "," : "") << "z" << j;
  }
  out << "\n";
  for (Index u = 0; u < rep.n_users(); ++u) {
    for (Index j = 0; j < rep.M(); ++j) {
      out << (j ? "," : "") << format_double(rep.values(u, j));
    }
    out << "\n";
  }
}

}  // namespace disrec
