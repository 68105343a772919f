#pragma once

#include "disrec/interactions.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

namespace disrec {

enum class FileFormat { tsv, csv };

enum class RatingComparison { greater_equal, greater };

/// Parse a TSV/CSV interaction log with columns
/// (user, item[, rating[, timestamp]]). A header row is auto-detected by a
/// non-numeric third column on the first line. Malformed rows raise an Error
/// naming the line number.
inline std::vector<RawInteraction> ingest(const std::string& path,
                                          FileFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("ingest: cannot open file: " + path);
  const char delim = format == FileFormat::tsv ? '\t' : ',';

  std::vector<RawInteraction> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, delim);
    if (cols.size() < 2) {
      throw Error("ingest: line " + std::to_string(lineno) +
                  ": expected at least 2 columns, got " +
                  std::to_string(cols.size()));
    }
    RawInteraction r;
    r.user_id = trim(cols[0]);
    r.item_id = trim(cols[1]);
    if (cols.size() >= 3 && !trim(cols[2]).empty()) {
      double rating;
      if (!parse_number(cols[2], rating)) {
        if (lineno == 1) continue;  // header row: non-numeric third column
        throw Error("ingest: line " + std::to_string(lineno) +
                    ": non-numeric rating '" + trim(cols[2]) + "'");
      }
      if (!std::isfinite(rating) || rating < 0.0) {
        throw Error("ingest: line " + std::to_string(lineno) +
                    ": rating must be finite and >= 0");
      }
      r.rating = rating;
    }
    if (cols.size() >= 4 && !trim(cols[3]).empty()) {
      double ts;
      if (parse_number(cols[3], ts)) {
        r.timestamp = static_cast<std::int64_t>(ts);
      }
    }
    if (r.user_id.empty() || r.item_id.empty()) {
      throw Error("ingest: line " + std::to_string(lineno) +
                  ": empty user or item id");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Keep rows whose rating passes the threshold and set their rating to 1.
inline std::vector<RawInteraction> binarize(
    const std::vector<RawInteraction>& rows, double threshold,
    RatingComparison cmp = RatingComparison::greater_equal) {
  if (threshold < 0.0) throw Error("binarize: threshold must be >= 0");
  std::vector<RawInteraction> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const bool keep = cmp == RatingComparison::greater_equal
                          ? r.rating >= threshold
                          : r.rating > threshold;
    if (keep) {
      RawInteraction kept = r;
      kept.rating = 1.0;
      out.push_back(std::move(kept));
    }
  }
  return out;
}

/// Index raw rows into a binary matrix. Vocabularies are ordered by first
/// appearance; duplicate (user, item) pairs keep the first occurrence.
inline InteractionMatrix build_matrix(const std::vector<RawInteraction>& rows) {
  std::unordered_map<std::string, std::uint32_t> umap, imap;
  std::vector<std::string> user_ids, item_ids;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  entries.reserve(rows.size());
  for (const auto& r : rows) {
    auto [uit, unew] = umap.try_emplace(
        r.user_id, static_cast<std::uint32_t>(user_ids.size()));
    if (unew) user_ids.push_back(r.user_id);
    auto [iit, inew] = imap.try_emplace(
        r.item_id, static_cast<std::uint32_t>(item_ids.size()));
    if (inew) item_ids.push_back(r.item_id);
    entries.emplace_back(uit->second, iit->second);
  }
  const auto n_users = static_cast<Index>(user_ids.size());
  const auto n_items = static_cast<Index>(item_ids.size());
  return InteractionMatrix(n_users, n_items, std::move(entries),
                           std::move(user_ids), std::move(item_ids));
}

/// Iteratively drop users with < min_ipu and items with < min_ipi
/// interactions until a fixed point, then reindex vocabularies densely.
inline InteractionMatrix kcore_filter(const InteractionMatrix& m,
                                      Index min_ipu, Index min_ipi) {
  if (min_ipu < 1 || min_ipi < 1) {
    throw Error("kcore_filter: min_ipu and min_ipi must be >= 1");
  }
  std::vector<char> keep_u(static_cast<std::size_t>(m.n_users()), 1);
  std::vector<char> keep_i(static_cast<std::size_t>(m.n_items()), 1);
  std::vector<Index> udeg(static_cast<std::size_t>(m.n_users()), 0);
  std::vector<Index> ideg(static_cast<std::size_t>(m.n_items()), 0);

  bool changed = true;
  while (changed) {
    changed = false;
    std::fill(udeg.begin(), udeg.end(), 0);
    std::fill(ideg.begin(), ideg.end(), 0);
    for (Index u = 0; u < m.n_users(); ++u) {
      if (!keep_u[static_cast<std::size_t>(u)]) continue;
      for (auto i : m.items_of(u)) {
        if (!keep_i[i]) continue;
        ++udeg[static_cast<std::size_t>(u)];
        ++ideg[i];
      }
    }
    for (Index u = 0; u < m.n_users(); ++u) {
      auto uu = static_cast<std::size_t>(u);
      if (keep_u[uu] && udeg[uu] < min_ipu) {
        keep_u[uu] = 0;
        changed = true;
      }
    }
    for (Index i = 0; i < m.n_items(); ++i) {
      auto ii = static_cast<std::size_t>(i);
      if (keep_i[ii] && ideg[ii] < min_ipi) {
        keep_i[ii] = 0;
        changed = true;
      }
    }
  }

  std::vector<std::uint32_t> umapping(static_cast<std::size_t>(m.n_users()));
  std::vector<std::uint32_t> imapping(static_cast<std::size_t>(m.n_items()));
  std::vector<std::string> user_ids, item_ids;
  for (Index u = 0; u < m.n_users(); ++u) {
    if (keep_u[static_cast<std::size_t>(u)]) {
      umapping[static_cast<std::size_t>(u)] =
          static_cast<std::uint32_t>(user_ids.size());
      user_ids.push_back(m.user_id(u));
    }
  }
  for (Index i = 0; i < m.n_items(); ++i) {
    if (keep_i[static_cast<std::size_t>(i)]) {
      imapping[static_cast<std::size_t>(i)] =
          static_cast<std::uint32_t>(item_ids.size());
      item_ids.push_back(m.item_id(i));
    }
  }
  if (user_ids.empty() || item_ids.empty()) {
    throw Error("kcore_filter: empty after filtering (min_ipu=" +
                std::to_string(min_ipu) + ", min_ipi=" +
                std::to_string(min_ipi) + ")");
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  for (Index u = 0; u < m.n_users(); ++u) {
    if (!keep_u[static_cast<std::size_t>(u)]) continue;
    for (auto i : m.items_of(u)) {
      if (!keep_i[i]) continue;
      entries.emplace_back(umapping[static_cast<std::size_t>(u)], imapping[i]);
    }
  }
  const auto n_users = static_cast<Index>(user_ids.size());
  const auto n_items = static_cast<Index>(item_ids.size());
  return InteractionMatrix(n_users, n_items, std::move(entries),
                           std::move(user_ids), std::move(item_ids));
}

struct SplitRatio {
  double train = 3.0;
  double validation = 1.0;
  double test = 1.0;
};

/// Shuffle each user's interactions with a per-user substream of `seed` and
/// partition them. Validation and test each receive floor(n * r / sum);
/// the remainder goes to train.
inline SplitTriple split_per_user(const InteractionMatrix& m,
                                  const SplitRatio& ratio,
                                  std::uint64_t seed) {
  if (ratio.train <= 0.0 || ratio.validation <= 0.0 || ratio.test <= 0.0) {
    throw Error("split_per_user: ratio components must be positive");
  }
  const double total = ratio.train + ratio.validation + ratio.test;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> tr, va, te;
  tr.reserve(m.nnz());
  for (Index u = 0; u < m.n_users(); ++u) {
    auto row = m.items_of(u);
    const auto n = static_cast<std::size_t>(row.size());
    if (n < 3) {
      throw Error("split_per_user: user '" + m.user_id(u) + "' has " +
                  std::to_string(n) + " interactions, fewer than 3 parts");
    }
    std::vector<std::uint32_t> shuffled(row.begin(), row.end());
    Rng urng = make_rng(seed, static_cast<std::uint64_t>(u) + 1);
    std::shuffle(shuffled.begin(), shuffled.end(), urng);
    const auto n_val = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * ratio.validation / total));
    const auto n_test = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * ratio.test / total));
    const std::size_t n_train = n - n_val - n_test;
    const auto uu = static_cast<std::uint32_t>(u);
    for (std::size_t j = 0; j < n; ++j) {
      if (j < n_train) {
        tr.emplace_back(uu, shuffled[j]);
      } else if (j < n_train + n_val) {
        va.emplace_back(uu, shuffled[j]);
      } else {
        te.emplace_back(uu, shuffled[j]);
      }
    }
  }
  SplitTriple out;
  out.train = InteractionMatrix(m.n_users(), m.n_items(), std::move(tr),
                                m.user_ids(), m.item_ids());
  out.validation = InteractionMatrix(m.n_users(), m.n_items(), std::move(va),
                                     m.user_ids(), m.item_ids());
  out.test = InteractionMatrix(m.n_users(), m.n_items(), std::move(te),
                               m.user_ids(), m.item_ids());
  out.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot format: "DRSNAP01" magic, then little-endian u64 n_users, u64
// n_items, u64 nnz, then nnz (u32 user, u32 item) pairs sorted by (user,
// item). Vocabularies and preprocessing provenance live in a JSON sidecar at
// <path>.json.
// ---------------------------------------------------------------------------

inline constexpr char kSnapshotMagic[8] = {'D', 'R', 'S', 'N',
                                           'A', 'P', '0', '1'};

struct SnapshotProvenance {
  std::string source;
  double threshold = 1.0;
  std::string comparison = "ge";  // "ge" or "gt"
  Index min_ipu = 0;              // 0 = no k-core applied
  Index min_ipi = 0;
  nlohmann::json extra;
};

namespace detail {
template <typename T>
void write_le(std::ofstream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw Error("snapshot: truncated file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(buf[i]) << (8 * i);
  }
  return v;
}
}  // namespace detail

inline void write_snapshot(const InteractionMatrix& m, const std::string& path,
                           const SnapshotProvenance& prov = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_snapshot: cannot open " + path);
  out.write(kSnapshotMagic, 8);
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.n_users()));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.n_items()));
  detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.nnz()));
  for (Index u = 0; u < m.n_users(); ++u) {
    for (auto i : m.items_of(u)) {
      detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(u));
      detail::write_le<std::uint32_t>(out, i);
    }
  }
  if (!out) throw Error("write_snapshot: write failed for " + path);

  nlohmann::json sidecar;
  sidecar["format"] = "DRSNAP01";
  sidecar["n_users"] = m.n_users();
  sidecar["n_items"] = m.n_items();
  sidecar["user_ids"] = m.user_ids();
  sidecar["item_ids"] = m.item_ids();
  nlohmann::json p;
  p["source"] = prov.source;
  p["threshold"] = prov.threshold;
  p["comparison"] = prov.comparison;
  p["min_ipu"] = prov.min_ipu;
  p["min_ipi"] = prov.min_ipi;
  if (!prov.extra.is_null()) p["extra"] = prov.extra;
  sidecar["provenance"] = p;
  std::ofstream side(path + ".json");
  if (!side) throw Error("write_snapshot: cannot open " + path + ".json");
  side << sidecar.dump(2) << "\n";
}

inline InteractionMatrix read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_snapshot: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kSnapshotMagic)) {
    throw Error("read_snapshot: bad magic in " + path);
  }
  const auto n_users = static_cast<Index>(detail::read_le<std::uint64_t>(in));
  const auto n_items = static_cast<Index>(detail::read_le<std::uint64_t>(in));
  const auto nnz = detail::read_le<std::uint64_t>(in);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  entries.reserve(nnz);
  for (std::uint64_t k = 0; k < nnz; ++k) {
    auto u = detail::read_le<std::uint32_t>(in);
    auto i = detail::read_le<std::uint32_t>(in);
    entries.emplace_back(u, i);
  }

  std::vector<std::string> user_ids, item_ids;
  std::ifstream side(path + ".json");
  if (side) {
    nlohmann::json sidecar = nlohmann::json::parse(side);
    user_ids = sidecar.at("user_ids").get<std::vector<std::string>>();
    item_ids = sidecar.at("item_ids").get<std::vector<std::string>>();
  } else {
    user_ids.resize(static_cast<std::size_t>(n_users));
    item_ids.resize(static_cast<std::size_t>(n_items));
    for (Index u = 0; u < n_users; ++u) user_ids[u] = "u" + std::to_string(u);
    for (Index i = 0; i < n_items; ++i) item_ids[i] = "i" + std::to_string(i);
  }
  return InteractionMatrix(n_users, n_items, std::move(entries),
                           std::move(user_ids), std::move(item_ids));
}

}  // namespace disrec
