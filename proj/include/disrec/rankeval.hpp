#pragma once

#include "disrec/interactions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_set>
#include <vector>

namespace disrec {

/// Lazily materializable per-user item scores with an exclusion mask of
/// training items. Rankings never contain excluded items; score ties break
/// by ascending item index.
struct ScoreMatrix {
  Index n_users = 0;
  Index n_items = 0;
  std::function<VectorXd(Index)> score_user;    // dense scores, all finite
  const InteractionMatrix* exclude = nullptr;   // usually the train split

  VectorXd scores(Index u) const {
    VectorXd s = score_user(u);
    if (s.size() != n_items) throw Error("ScoreMatrix: bad score length");
    if (!s.allFinite()) throw Error("ScoreMatrix: non-finite scores");
    return s;
  }

  /// Indices of the top-k non-excluded items for user u.
  std::vector<std::uint32_t> top_k(Index u, Index k) const {
    const VectorXd s = scores(u);
    std::vector<std::uint32_t> idx;
    idx.reserve(static_cast<std::size_t>(n_items));
    if (exclude != nullptr) {
      auto row = exclude->items_of(u);
      std::size_t p = 0;
      for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(n_items); ++i) {
        if (p < row.size() && row[p] == i) {
          ++p;
          continue;
        }
        idx.push_back(i);
      }
    } else {
      for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(n_items); ++i) {
        idx.push_back(i);
      }
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k),
                                          idx.size());
    auto cmp = [&s](std::uint32_t a, std::uint32_t b) {
      if (s[a] != s[b]) return s[a] > s[b];
      return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<Index>(kk),
                      idx.end(), cmp);
    idx.resize(kk);
    return idx;
  }
};

/// Per-metric, per-cutoff scores. Users with empty held-out sets are
/// excluded from the means and counted in n_users_skipped.
struct EvalResult {
  std::vector<Index> cutoffs;
  std::map<std::string, std::map<Index, double>> scores;  // metric -> k -> v
  Index n_users_evaluated = 0;
  Index n_users_skipped = 0;

  double at(const std::string& metric, Index k) const {
    return scores.at(metric).at(k);
  }
};

namespace detail {
inline double dcg_binary(const std::vector<std::uint32_t>& ranking,
                         std::span<const std::uint32_t> relevant) {
  double dcg = 0.0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranking[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  return dcg;
}

inline double ideal_dcg(Index k, Index n_relevant) {
  const Index n = std::min(k, n_relevant);
  double idcg = 0.0;
  for (Index r = 0; r < n; ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return idcg;
}
}  // namespace detail

inline double ndcg_at_k(const ScoreMatrix& scores,
                        const InteractionMatrix& heldout, Index k) {
  if (k < 1) throw Error("ndcg_at_k: k must be >= 1");
  double sum = 0.0;
  Index n = 0;
  for (Index u = 0; u < heldout.n_users(); ++u) {
    auto rel = heldout.items_of(u);
    if (rel.empty()) continue;
    auto ranking = scores.top_k(u, k);
    const double dcg = detail::dcg_binary(ranking, rel);
    const double idcg = detail::ideal_dcg(k, static_cast<Index>(rel.size()));
    sum += dcg / idcg;
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

inline double recall_at_k(const ScoreMatrix& scores,
                          const InteractionMatrix& heldout, Index k) {
  if (k < 1) throw Error("recall_at_k: k must be >= 1");
  double sum = 0.0;
  Index n = 0;
  for (Index u = 0; u < heldout.n_users(); ++u) {
    auto rel = heldout.items_of(u);
    if (rel.empty()) continue;
    auto ranking = scores.top_k(u, k);
    Index hits = 0;
    for (auto i : ranking) {
      if (std::binary_search(rel.begin(), rel.end(), i)) ++hits;
    }
    sum += static_cast<double>(hits) /
           static_cast<double>(std::min<Index>(k, static_cast<Index>(rel.size())));
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

inline double mrr_at_k(const ScoreMatrix& scores,
                       const InteractionMatrix& heldout, Index k) {
  if (k < 1) throw Error("mrr_at_k: k must be >= 1");
  double sum = 0.0;
  Index n = 0;
  for (Index u = 0; u < heldout.n_users(); ++u) {
    auto rel = heldout.items_of(u);
    if (rel.empty()) continue;
    auto ranking = scores.top_k(u, k);
    double rr = 0.0;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      if (std::binary_search(rel.begin(), rel.end(), ranking[r])) {
        rr = 1.0 / (static_cast<double>(r) + 1.0);
        break;
      }
    }
    sum += rr;
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

/// Fraction of the catalog appearing in any evaluated user's top-k list.
inline double coverage_at_k(const ScoreMatrix& scores,
                            const InteractionMatrix& heldout, Index k) {
  if (k < 1) throw Error("coverage_at_k: k must be >= 1");
  std::vector<char> seen(static_cast<std::size_t>(scores.n_items), 0);
  for (Index u = 0; u < heldout.n_users(); ++u) {
    if (heldout.items_of(u).empty()) continue;
    for (auto i : scores.top_k(u, k)) seen[i] = 1;
  }
  const auto covered = std::count(seen.begin(), seen.end(), 1);
  return static_cast<double>(covered) / static_cast<double>(scores.n_items);
}

/// All four metrics at every cutoff with one scoring pass per user. The
/// top-k list at a smaller cutoff is a prefix of the list at a larger one,
/// so the results equal the single-metric operations exactly.
inline EvalResult evaluate_ranking(const ScoreMatrix& scores,
                                   const InteractionMatrix& heldout,
                                   const std::vector<Index>& cutoffs = {10, 50,
                                                                        100}) {
  EvalResult res;
  res.cutoffs = cutoffs;
  const Index max_k = *std::max_element(cutoffs.begin(), cutoffs.end());
  std::map<Index, double> ndcg, recall, mrr;
  std::vector<std::vector<char>> seen(
      cutoffs.size(), std::vector<char>(static_cast<std::size_t>(scores.n_items), 0));
  for (Index k : cutoffs) ndcg[k] = recall[k] = mrr[k] = 0.0;

  for (Index u = 0; u < heldout.n_users(); ++u) {
    auto rel = heldout.items_of(u);
    if (rel.empty()) {
      ++res.n_users_skipped;
      continue;
    }
    ++res.n_users_evaluated;
    auto ranking = scores.top_k(u, max_k);
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      const Index k = cutoffs[c];
      const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k),
                                            ranking.size());
      double dcg = 0.0, rr = 0.0;
      Index hits = 0;
      for (std::size_t r = 0; r < kk; ++r) {
        seen[c][ranking[r]] = 1;
        if (std::binary_search(rel.begin(), rel.end(), ranking[r])) {
          dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
          if (rr == 0.0) rr = 1.0 / (static_cast<double>(r) + 1.0);
          ++hits;
        }
      }
      ndcg[k] += dcg / detail::ideal_dcg(k, static_cast<Index>(rel.size()));
      recall[k] += static_cast<double>(hits) /
                   static_cast<double>(
                       std::min<Index>(k, static_cast<Index>(rel.size())));
      mrr[k] += rr;
    }
  }
  const double n = std::max<double>(1.0, static_cast<double>(res.n_users_evaluated));
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    const Index k = cutoffs[c];
    res.scores["ndcg"][k] = res.n_users_evaluated ? ndcg[k] / n : 0.0;
    res.scores["recall"][k] = res.n_users_evaluated ? recall[k] / n : 0.0;
    res.scores["mrr"][k] = res.n_users_evaluated ? mrr[k] / n : 0.0;
    const auto covered = std::count(seen[c].begin(), seen[c].end(), 1);
    res.scores["coverage"][k] =
        static_cast<double>(covered) / static_cast<double>(scores.n_items);
  }
  return res;
}

}  // namespace disrec
