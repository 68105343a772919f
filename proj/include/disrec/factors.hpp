#pragma once

#include "disrec/interactions.hpp"
#include "disrec/kmeans.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace disrec {

/// Item tag/category rows. relevance is 1.0 for plain tags and in [0,1] for
/// genome-style relevance scores.
struct TagRow {
  std::uint32_t item_index;
  std::string tag_id;
  double relevance = 1.0;
};

using TagTable = std::vector<TagRow>;

struct TagClusterModel {
  Index k = 0;
  MatrixXd centroids;                                // k x n_items
  std::map<std::string, Index> tag_assignment;       // tag -> cluster
  std::vector<std::string> kept_tags;
  std::uint64_t seed = 0;
};

/// Binary user x K ground-truth factor memberships.
struct FactorMatrix {
  Index n_users = 0;
  Index K = 0;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> memberships;
  std::vector<std::string> factor_labels;

  double positive_rate(Index j) const {
    double s = 0.0;
    for (Index u = 0; u < n_users; ++u) s += memberships(u, j);
    return s / static_cast<double>(n_users);
  }
};

/// Keep rows of the n most popular tags (popularity = distinct item count,
/// ties by lexicographic tag id). Fewer than n distinct tags keeps all and
/// sets *warned.
inline TagTable top_tags(const TagTable& tags, Index n, bool* warned = nullptr) {
  if (n < 1) throw Error("top_tags: n must be >= 1");
  std::map<std::string, std::set<std::uint32_t>> items_per_tag;
  for (const auto& row : tags) items_per_tag[row.tag_id].insert(row.item_index);
  if (warned != nullptr) {
    *warned = static_cast<Index>(items_per_tag.size()) < n;
  }
  std::vector<std::pair<std::string, Index>> ranked;
  ranked.reserve(items_per_tag.size());
  for (const auto& [tag, items] : items_per_tag) {
    ranked.emplace_back(tag, static_cast<Index>(items.size()));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<Index>(ranked.size()) > n) ranked.resize(static_cast<std::size_t>(n));
  std::set<std::string> kept;
  for (const auto& [tag, cnt] : ranked) kept.insert(tag);
  TagTable out;
  for (const auto& row : tags) {
    if (kept.count(row.tag_id)) out.push_back(row);
  }
  return out;
}

/// Cluster tags with k-means, each tag represented as its relevance-weighted
/// indicator vector over items (optionally L2-normalized).
inline TagClusterModel kmeans_tags(const TagTable& tags, Index n_items, Index k,
                                   std::uint64_t seed, Index max_iter = 300,
                                   bool l2_normalize = false) {
  std::vector<std::string> tag_names;
  std::map<std::string, Index> tag_idx;
  for (const auto& row : tags) {
    if (tag_idx.try_emplace(row.tag_id, static_cast<Index>(tag_names.size()))
            .second) {
      tag_names.push_back(row.tag_id);
    }
  }
  if (static_cast<Index>(tag_names.size()) < k) {
    throw Error("kmeans_tags: need at least k distinct tags (" +
                std::to_string(tag_names.size()) + " < " + std::to_string(k) +
                ")");
  }
  MatrixXd vectors = MatrixXd::Zero(static_cast<Index>(tag_names.size()), n_items);
  for (const auto& row : tags) {
    if (row.relevance < 0.0 || row.relevance > 1.0 ||
        !std::isfinite(row.relevance)) {
      throw Error("kmeans_tags: relevance out of [0,1] for tag '" +
                  row.tag_id + "'");
    }
    vectors(tag_idx.at(row.tag_id), row.item_index) = row.relevance;
  }
  if (l2_normalize) {
    for (Index t = 0; t < vectors.rows(); ++t) {
      const double norm = vectors.row(t).norm();
      if (norm > 0.0) vectors.row(t) /= norm;
    }
  }
  KMeansResult km = kmeans(vectors, k, seed, max_iter);
  TagClusterModel model;
  model.k = k;
  model.centroids = km.centroids;
  model.kept_tags = tag_names;
  model.seed = seed;
  for (std::size_t t = 0; t < tag_names.size(); ++t) {
    model.tag_assignment[tag_names[t]] = km.assignments[t];
  }
  return model;
}

/// Binary item x k cluster membership. An item joins cluster c when it has a
/// kept tag in c and, in genome mode (threshold > 0), the mean relevance of
/// its tags in c exceeds the threshold.
inline Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> assign_items(
    const TagClusterModel& model, const TagTable& tags, Index n_items,
    double relevance_threshold) {
  if (relevance_threshold < 0.0 || relevance_threshold > 1.0) {
    throw Error("assign_items: relevance_threshold must be in [0,1]");
  }
  MatrixXd rel_sum = MatrixXd::Zero(n_items, model.k);
  MatrixXd rel_cnt = MatrixXd::Zero(n_items, model.k);
  for (const auto& row : tags) {
    auto it = model.tag_assignment.find(row.tag_id);
    if (it == model.tag_assignment.end()) continue;  // not a kept tag
    rel_sum(row.item_index, it->second) += row.relevance;
    rel_cnt(row.item_index, it->second) += 1.0;
  }
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> out(n_items,
                                                                  model.k);
  out.setZero();
  for (Index i = 0; i < n_items; ++i) {
    for (Index c = 0; c < model.k; ++c) {
      if (rel_cnt(i, c) <= 0.0) continue;
      if (relevance_threshold == 0.0 ||
          rel_sum(i, c) / rel_cnt(i, c) > relevance_threshold) {
        out(i, c) = 1;
      }
    }
  }
  return out;
}

/// User u joins factor c when at least `fraction` of the items u interacted
/// with belong to cluster c. Uses the full pre-split interaction set. When
/// tagged_denominator_only is set, only items with at least one cluster
/// membership count toward the denominator.
inline FactorMatrix assign_users(
    const InteractionMatrix& interactions,
    const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>&
        item_clusters,
    double fraction, std::vector<std::string> labels = {},
    bool tagged_denominator_only = false) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw Error("assign_users: fraction must be in (0,1]");
  }
  const Index k = item_clusters.cols();
  FactorMatrix fm;
  fm.n_users = interactions.n_users();
  fm.K = k;
  fm.memberships.resize(fm.n_users, k);
  fm.memberships.setZero();
  for (Index u = 0; u < interactions.n_users(); ++u) {
    auto row = interactions.items_of(u);
    if (row.empty()) {
      throw Error("assign_users: user '" + interactions.user_id(u) +
                  "' has no interactions");
    }
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    Index denom = 0;
    for (auto i : row) {
      bool tagged = false;
      for (Index c = 0; c < k; ++c) {
        if (item_clusters(static_cast<Index>(i), c)) {
          ++counts[static_cast<std::size_t>(c)];
          tagged = true;
        }
      }
      if (!tagged_denominator_only || tagged) ++denom;
    }
    if (denom == 0) continue;
    for (Index c = 0; c < k; ++c) {
      const double share = static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                           static_cast<double>(denom);
      if (share >= fraction) fm.memberships(u, c) = 1;
    }
  }
  if (labels.empty()) {
    for (Index c = 0; c < k; ++c) labels.push_back("c" + std::to_string(c));
  }
  if (static_cast<Index>(labels.size()) != k) {
    throw Error("assign_users: label count mismatch");
  }
  fm.factor_labels = std::move(labels);
  return fm;
}

/// Raw shelf name -> canonical name, or DROP.
using ShelfMap = std::map<std::string, std::string>;

inline ShelfMap read_shelf_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_shelf_map: cannot open " + path);
  ShelfMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 2) {
      throw Error("read_shelf_map: line " + std::to_string(lineno) +
                  ": expected 2 tab-separated columns");
    }
    out[trim(cols[0])] = trim(cols[1]);
  }
  return out;
}

/// Merge/drop raw shelves via the mapping, then apply the assign_users rule
/// over canonical shelves. Every shelf in `shelves` must be mapped.
inline FactorMatrix shelf_factors(const TagTable& shelves,
                                  const ShelfMap& shelf_map,
                                  const InteractionMatrix& interactions,
                                  double fraction) {
  std::set<std::string> unmapped;
  std::map<std::string, Index> canon_idx;
  std::vector<std::string> canon_names;
  for (const auto& row : shelves) {
    auto it = shelf_map.find(row.tag_id);
    if (it == shelf_map.end()) {
      unmapped.insert(row.tag_id);
      continue;
    }
    if (it->second == "DROP") continue;
    if (canon_idx.try_emplace(it->second, static_cast<Index>(canon_names.size()))
            .second) {
      canon_names.push_back(it->second);
    }
  }
  if (!unmapped.empty()) {
    std::string msg = "shelf_factors: unmapped shelf names:";
    for (const auto& s : unmapped) msg += " '" + s + "'";
    throw Error(msg);
  }
  // stable canonical order: sort by name, remap indices
  std::vector<std::string> sorted_names = canon_names;
  std::sort(sorted_names.begin(), sorted_names.end());
  std::map<std::string, Index> sorted_idx;
  for (std::size_t c = 0; c < sorted_names.size(); ++c) {
    sorted_idx[sorted_names[c]] = static_cast<Index>(c);
  }
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> item_shelves(
      interactions.n_items(), static_cast<Index>(sorted_names.size()));
  item_shelves.setZero();
  for (const auto& row : shelves) {
    const auto& canon = shelf_map.at(row.tag_id);
    if (canon == "DROP") continue;
    item_shelves(static_cast<Index>(row.item_index), sorted_idx.at(canon)) = 1;
  }
  return assign_users(interactions, item_shelves, fraction, sorted_names);
}

/// Remove all-0 / all-1 factor columns; fewer than 2 factors left is an
/// error (the probe classifiers need both classes in every factor).
inline FactorMatrix drop_degenerate(const FactorMatrix& factors) {
  std::vector<Index> keep;
  for (Index c = 0; c < factors.K; ++c) {
    Index pos = 0;
    for (Index u = 0; u < factors.n_users; ++u) pos += factors.memberships(u, c);
    if (pos > 0 && pos < factors.n_users) keep.push_back(c);
  }
  if (static_cast<Index>(keep.size()) < 2) {
    throw Error("drop_degenerate: insufficient factors (" +
                std::to_string(keep.size()) + " non-degenerate, need >= 2)");
  }
  FactorMatrix out;
  out.n_users = factors.n_users;
  out.K = static_cast<Index>(keep.size());
  out.memberships.resize(out.n_users, out.K);
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.memberships.col(static_cast<Index>(c)) =
        factors.memberships.col(keep[c]);
    out.factor_labels.push_back(factors.factor_labels[static_cast<std::size_t>(keep[c])]);
  }
  return out;
}

// --- persistence -----------------------------------------------------------

inline void write_factors_csv(const FactorMatrix& fm, const std::string& path,
                              const nlohmann::json& provenance = {}) {
  std::ofstream out(path);
  if (!out) throw Error("write_factors_csv: cannot open " + path);
  for (Index c = 0; c < fm.K; ++c) {
    out << (c ? "," : "") << fm.factor_labels[static_cast<std::size_t>(c)];
  }
  out << "\n";
  for (Index u = 0; u < fm.n_users; ++u) {
    for (Index c = 0; c < fm.K; ++c) {
      out << (c ? "," : "") << static_cast<int>(fm.memberships(u, c));
    }
    out << "\n";
  }
  if (!provenance.is_null()) {
    std::ofstream side(path + ".json");
    side << provenance.dump(2) << "\n";
  }
}

inline FactorMatrix read_factors_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_factors_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("read_factors_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  FactorMatrix fm;
  auto labels = split(line, ',');
  fm.K = static_cast<Index>(labels.size());
  fm.factor_labels.assign(labels.begin(), labels.end());
  std::vector<std::vector<std::uint8_t>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, ',');
    if (static_cast<Index>(cols.size()) != fm.K) {
      throw Error("read_factors_csv: line " + std::to_string(lineno) +
                  ": wrong column count");
    }
    std::vector<std::uint8_t> row;
    for (const auto& c : cols) {
      const std::string t = trim(c);
      if (t != "0" && t != "1") {
        throw Error("read_factors_csv: line " + std::to_string(lineno) +
                    ": entries must be 0/1");
      }
      row.push_back(t == "1" ? 1 : 0);
    }
    rows.push_back(std::move(row));
  }
  fm.n_users = static_cast<Index>(rows.size());
  fm.memberships.resize(fm.n_users, fm.K);
  for (Index u = 0; u < fm.n_users; ++u) {
    for (Index c = 0; c < fm.K; ++c) {
      fm.memberships(u, c) = rows[static_cast<std::size_t>(u)][static_cast<std::size_t>(c)];
    }
  }
  return fm;
}

inline TagTable read_tag_file(const std::string& path,
                              const InteractionMatrix& m, bool with_relevance) {
  std::ifstream in(path);
  if (!in) throw Error("read_tag_file: cannot open " + path);
  std::unordered_map<std::string, std::uint32_t> item_idx;
  for (Index i = 0; i < m.n_items(); ++i) {
    item_idx[m.item_id(i)] = static_cast<std::uint32_t>(i);
  }
  TagTable out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() < 2 || (with_relevance && cols.size() < 3)) {
      throw Error("read_tag_file: line " + std::to_string(lineno) +
                  ": too few columns");
    }
    auto it = item_idx.find(trim(cols[0]));
    if (it == item_idx.end()) continue;  // item filtered out upstream
    TagRow row;
    row.item_index = it->second;
    row.tag_id = trim(cols[1]);
    if (with_relevance) {
      double rel;
      if (!parse_number(cols[2], rel)) {
        if (lineno == 1) continue;  // header
        throw Error("read_tag_file: line " + std::to_string(lineno) +
                    ": non-numeric relevance");
      }
      row.relevance = rel;
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace disrec
