#pragma once

#include "disrec/common.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace disrec {

/// One parsed interaction log row. rating defaults to 1 when the column is
/// absent; timestamp is accepted and ignored downstream.
struct RawInteraction {
  std::string user_id;
  std::string item_id;
  double rating = 1.0;
  std::optional<std::int64_t> timestamp;
};

/// Binary user x item interaction matrix in user-major CSR layout.
/// Immutable after construction; per-user item lists are sorted and
/// duplicate-free.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;

  // entries may arrive unsorted and with duplicates; the first occurrence of
  // a (user, item) pair wins (duplicates carry no information once binary).
  InteractionMatrix(Index n_users, Index n_items,
                    std::vector<std::pair<std::uint32_t, std::uint32_t>> entries,
                    std::vector<std::string> user_ids,
                    std::vector<std::string> item_ids)
      : n_users_(n_users), n_items_(n_items),
        user_ids_(std::move(user_ids)), item_ids_(std::move(item_ids)) {
    if (static_cast<Index>(user_ids_.size()) != n_users ||
        static_cast<Index>(item_ids_.size()) != n_items) {
      throw Error("InteractionMatrix: vocabulary size mismatch");
    }
    std::sort(entries.begin(), entries.end());
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
    offsets_.assign(static_cast<std::size_t>(n_users) + 1, 0);
    items_.reserve(entries.size());
    for (const auto& [u, i] : entries) {
      if (u >= n_users || i >= n_items) {
        throw Error("InteractionMatrix: index out of range");
      }
      ++offsets_[u + 1];
    }
    for (std::size_t u = 0; u < static_cast<std::size_t>(n_users); ++u) {
      offsets_[u + 1] += offsets_[u];
    }
    items_.resize(entries.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [u, i] : entries) items_[cursor[u]++] = i;
  }

  Index n_users() const { return n_users_; }
  Index n_items() const { return n_items_; }
  std::size_t nnz() const { return items_.size(); }

  std::span<const std::uint32_t> items_of(Index u) const {
    return {items_.data() + offsets_[static_cast<std::size_t>(u)],
            items_.data() + offsets_[static_cast<std::size_t>(u) + 1]};
  }

  Index degree(Index u) const {
    return static_cast<Index>(offsets_[static_cast<std::size_t>(u) + 1] -
                              offsets_[static_cast<std::size_t>(u)]);
  }

  bool has(Index u, std::uint32_t item) const {
    auto row = items_of(u);
    return std::binary_search(row.begin(), row.end(), item);
  }

  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const std::string& user_id(Index u) const {
    return user_ids_[static_cast<std::size_t>(u)];
  }
  const std::string& item_id(Index i) const {
    return item_ids_[static_cast<std::size_t>(i)];
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(nnz());
    for (Index u = 0; u < n_users_; ++u) {
      for (auto i : items_of(u)) {
        out.emplace_back(static_cast<std::uint32_t>(u), i);
      }
    }
    return out;
  }

  // Item interaction counts, used by the popularity baseline.
  std::vector<Index> item_counts() const {
    std::vector<Index> counts(static_cast<std::size_t>(n_items_), 0);
    for (auto i : items_) ++counts[i];
    return counts;
  }

  std::uint64_t content_hash() const {
    std::uint64_t h = fnv1a(&n_users_, sizeof(n_users_));
    h = fnv1a(&n_items_, sizeof(n_items_), h);
    if (!items_.empty()) {
      h = fnv1a(items_.data(), items_.size() * sizeof(std::uint32_t), h);
    }
    h = fnv1a(offsets_.data(), offsets_.size() * sizeof(std::size_t), h);
    for (const auto& s : user_ids_) h = fnv1a(s, h);
    for (const auto& s : item_ids_) h = fnv1a(s, h);
    return h;
  }

 private:
  Index n_users_ = 0;
  Index n_items_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> items_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
};

/// Per-user random split of one matrix into train/validation/test.
/// The three entry sets are pairwise disjoint and union to the source.
struct SplitTriple {
  InteractionMatrix train;
  InteractionMatrix validation;
  InteractionMatrix test;
  std::uint64_t seed = 0;
};

}  // namespace disrec
