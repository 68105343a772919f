#pragma once

#include "disrec/learners/config.hpp"
#include "disrec/rankeval.hpp"

#include <memory>

namespace disrec {

/// Non-personalised baseline: every user gets the item interaction counts of
/// the train split as scores. No user representation exists for this model.
struct TopPopularModel {
  VectorXd item_scores;

  static TopPopularModel fit(const InteractionMatrix& train) {
    if (train.nnz() == 0) throw Error("fit_top_popular: empty train matrix");
    TopPopularModel m;
    m.item_scores.resize(train.n_items());
    auto counts = train.item_counts();
    for (Index i = 0; i < train.n_items(); ++i) {
      m.item_scores[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]);
    }
    return m;
  }

  ScoreMatrix scorer(const InteractionMatrix& exclude) const {
    ScoreMatrix s;
    s.n_users = exclude.n_users();
    s.n_items = exclude.n_items();
    s.exclude = &exclude;
    VectorXd scores = item_scores;
    s.score_user = [scores](Index) { return scores; };
    return s;
  }
};

inline ScoreMatrix fit_top_popular(const InteractionMatrix& train) {
  auto model = std::make_shared<TopPopularModel>(TopPopularModel::fit(train));
  ScoreMatrix s;
  s.n_users = train.n_users();
  s.n_items = train.n_items();
  s.exclude = nullptr;
  s.score_user = [model](Index) { return model->item_scores; };
  return s;
}

}  // namespace disrec
