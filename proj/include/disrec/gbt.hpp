#pragma once

#include "disrec/common.hpp"
#include "disrec/factors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace disrec {

struct GbtHyper {
  Index n_trees = 100;
  Index max_depth = 3;
  double shrinkage = 0.1;
};

/// One regression tree stored as a flat node array. leaf nodes have
/// feature == -1 and carry the additive score in `value`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const VectorXd>& x) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      n = x[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(n)].value;
  }
};

/// Gradient-boosted trees for binary labels with logistic loss.
/// Feature importances are the per-feature totals of squared-error reduction
/// over every split, normalized to sum 1 (all-zero when no split exists).
struct GbtModel {
  std::vector<RegressionTree> trees;
  double base_score = 0.0;  // initial log-odds
  double shrinkage = 0.1;
  Index max_depth = 3;
  Index n_features = 0;
  VectorXd importances;                 // length n_features
  std::vector<VectorXd> tree_gains;     // per-tree raw reduction per feature

  double decision(const Eigen::Ref<const VectorXd>& x) const {
    if (x.size() != n_features) {
      throw Error("GbtModel: expected " + std::to_string(n_features) +
                  " features, got " + std::to_string(x.size()));
    }
    double f = base_score;
    for (const auto& t : trees) f += shrinkage * t.predict(x);
    return f;
  }
};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline double predict_proba(const GbtModel& model,
                            const Eigen::Ref<const VectorXd>& x) {
  return sigmoid(model.decision(x));
}

namespace gbt_detail {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // SSE reduction, n-weighted
};

// Exhaustive best split over midpoints of sorted distinct values.
// `order` holds, per feature, all sample indices sorted by that feature;
// `in_node` filters it to the current node. Zero-gain splits of impure
// nodes are allowed (a balanced XOR node has no positive-gain first split);
// pure nodes stop. Ties in gain keep the first candidate in (feature,
// sorted-position) order, so decisions depend only on the induced partition
// and survive monotone feature transforms.
inline SplitChoice best_split(const MatrixXd& X, const VectorXd& grad,
                              const std::vector<std::vector<int>>& order,
                              const std::vector<char>& in_node, Index n_node,
                              double sum_node, double sumsq_node) {
  SplitChoice best;
  if (n_node < 2) return best;
  const double parent_term =
      sum_node * sum_node / static_cast<double>(n_node);
  if (sumsq_node - parent_term <= 1e-12) return best;  // pure node
  double best_gain = -1.0;
  for (int f = 0; f < X.cols(); ++f) {
    double left_sum = 0.0;
    Index left_n = 0;
    int prev = -1;
    for (int idx : order[static_cast<std::size_t>(f)]) {
      if (!in_node[static_cast<std::size_t>(idx)]) continue;
      if (prev >= 0 && X(prev, f) < X(idx, f)) {
        const Index right_n = n_node - left_n;
        const double right_sum = sum_node - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                            right_sum * right_sum / static_cast<double>(right_n) -
                            parent_term;
        if (gain > best_gain + 1e-12) {
          best.found = true;
          best.feature = f;
          best.threshold = 0.5 * (X(prev, f) + X(idx, f));
          best.gain = std::max(gain, 0.0);
          best_gain = gain;
        }
      }
      left_sum += grad[idx];
      ++left_n;
      prev = idx;
    }
  }
  return best;
}

}  // namespace gbt_detail

/// Stagewise logistic-loss boosting: trees fit to residuals y - p with
/// variance-reduction splits and Newton leaf values. Deterministic; the seed
/// is recorded for provenance only.
inline GbtModel fit_gbt(const MatrixXd& X, const std::vector<std::uint8_t>& y,
                        const GbtHyper& hyper, std::uint64_t seed = 0) {
  (void)seed;
  const Index n = X.rows();
  const Index m = X.cols();
  if (n == 0 || m == 0) throw Error("fit_gbt: empty input");
  if (static_cast<Index>(y.size()) != n) throw Error("fit_gbt: label size mismatch");
  const auto n_pos = static_cast<Index>(
      std::count(y.begin(), y.end(), std::uint8_t{1}));
  if (n_pos == 0 || n_pos == n) {
    throw Error("fit_gbt: degenerate labels (single class)");
  }
  if (hyper.n_trees < 1 || hyper.max_depth < 1 || hyper.shrinkage <= 0.0) {
    throw Error("fit_gbt: invalid hyperparameters");
  }

  GbtModel model;
  model.shrinkage = hyper.shrinkage;
  model.max_depth = hyper.max_depth;
  model.n_features = m;
  const double p0 = static_cast<double>(n_pos) / static_cast<double>(n);
  model.base_score = std::log(p0 / (1.0 - p0));

  // global pre-sort per feature, reused by every tree
  std::vector<std::vector<int>> order(static_cast<std::size_t>(m));
  for (int f = 0; f < m; ++f) {
    auto& ord = order[static_cast<std::size_t>(f)];
    ord.resize(static_cast<std::size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&X, f](int a, int b) {
      return X(a, f) < X(b, f);
    });
  }

  VectorXd score = VectorXd::Constant(n, model.base_score);
  VectorXd grad(n), hess(n);

  struct NodeTask {
    int node;
    std::vector<int> samples;
    Index depth;
  };

  for (Index t = 0; t < hyper.n_trees; ++t) {
    for (Index i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      grad[i] = static_cast<double>(y[static_cast<std::size_t>(i)]) - p;
      hess[i] = std::max(p * (1.0 - p), 1e-12);
    }

    RegressionTree tree;
    VectorXd gains = VectorXd::Zero(m);
    std::vector<NodeTask> stack;
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(all), 0});
    std::vector<char> in_node(static_cast<std::size_t>(n), 0);

    while (!stack.empty()) {
      NodeTask task = std::move(stack.back());
      stack.pop_back();
      auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
      double gsum = 0.0, hsum = 0.0, gsumsq = 0.0;
      for (int i : task.samples) {
        gsum += grad[i];
        gsumsq += grad[i] * grad[i];
        hsum += hess[i];
      }
      gbt_detail::SplitChoice split;
      if (task.depth < hyper.max_depth &&
          static_cast<Index>(task.samples.size()) >= 2) {
        for (int i : task.samples) in_node[static_cast<std::size_t>(i)] = 1;
        split = gbt_detail::best_split(X, grad, order, in_node,
                                       static_cast<Index>(task.samples.size()),
                                       gsum, gsumsq);
        for (int i : task.samples) in_node[static_cast<std::size_t>(i)] = 0;
      }
      if (!split.found) {
        node.feature = -1;
        node.value = gsum / hsum;  // Newton step for logistic loss
        continue;
      }
      gains[split.feature] += split.gain;
      std::vector<int> left, right;
      for (int i : task.samples) {
        (X(i, split.feature) <= split.threshold ? left : right).push_back(i);
      }
      const int left_id = static_cast<int>(tree.nodes.size());
      const int right_id = left_id + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& parent = tree.nodes[static_cast<std::size_t>(task.node)];
      parent.feature = split.feature;
      parent.threshold = split.threshold;
      parent.left = left_id;
      parent.right = right_id;
      stack.push_back({right_id, std::move(right), task.depth + 1});
      stack.push_back({left_id, std::move(left), task.depth + 1});
    }

    for (Index i = 0; i < n; ++i) {
      score[i] += hyper.shrinkage *
                  tree.predict(X.row(i).transpose());
    }
    model.tree_gains.push_back(gains);
    model.trees.push_back(std::move(tree));
  }

  VectorXd total = VectorXd::Zero(m);
  for (const auto& g : model.tree_gains) total += g;
  const double mass = total.sum();
  model.importances = mass > 0.0 ? VectorXd(total / mass)
                                 : VectorXd(VectorXd::Zero(m));
  return model;
}

/// Drop trailing trees; importances are recomputed from the kept prefix.
/// Boosting is prefix-stable, so this equals a fresh fit with fewer trees.
inline GbtModel truncate_trees(const GbtModel& model, Index n_trees) {
  if (n_trees >= static_cast<Index>(model.trees.size())) return model;
  GbtModel out = model;
  out.trees.resize(static_cast<std::size_t>(n_trees));
  out.tree_gains.resize(static_cast<std::size_t>(n_trees));
  VectorXd total = VectorXd::Zero(model.n_features);
  for (const auto& g : out.tree_gains) total += g;
  const double mass = total.sum();
  out.importances = mass > 0.0 ? VectorXd(total / mass)
                               : VectorXd(VectorXd::Zero(model.n_features));
  return out;
}

inline double balanced_accuracy(const GbtModel& model, const MatrixXd& X,
                                const std::vector<std::uint8_t>& y) {
  Index tp = 0, tn = 0, np = 0, nn = 0;
  for (Index i = 0; i < X.rows(); ++i) {
    const bool pred = predict_proba(model, X.row(i).transpose()) >= 0.5;
    if (y[static_cast<std::size_t>(i)]) {
      ++np;
      if (pred) ++tp;
    } else {
      ++nn;
      if (!pred) ++tn;
    }
  }
  double acc = 0.0;
  int sides = 0;
  if (np > 0) {
    acc += static_cast<double>(tp) / static_cast<double>(np);
    ++sides;
  }
  if (nn > 0) {
    acc += static_cast<double>(tn) / static_cast<double>(nn);
    ++sides;
  }
  return sides > 0 ? acc / sides : 0.0;
}

inline double logistic_loss(const GbtModel& model, const MatrixXd& X,
                            const std::vector<std::uint8_t>& y) {
  double loss = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    const double f = model.decision(X.row(i).transpose());
    // -[y log p + (1-y) log(1-p)] in a numerically stable form
    loss += std::max(f, 0.0) - f * y[static_cast<std::size_t>(i)] +
            std::log1p(std::exp(-std::abs(f)));
  }
  return loss / static_cast<double>(X.rows());
}

struct ProbeGrid {
  std::vector<Index> n_trees = {50, 100, 200};
  std::vector<Index> max_depth = {2, 3, 4};
  std::vector<double> shrinkage = {0.05, 0.1};
};

/// K fitted probes (one per factor) plus the tuning record. All probes share
/// the representation matrix and the train/validation user partition.
struct ProbeSuite {
  std::vector<GbtModel> probes;
  std::vector<GbtHyper> chosen;
  std::vector<double> val_balanced_accuracy;
  std::vector<Index> train_users;
  std::vector<Index> val_users;
};

/// Per factor, select the grid point maximizing validation balanced accuracy
/// (ties keep the earliest grid point) and keep the probe fitted on train
/// users. n_trees candidates are evaluated as prefixes of one long fit.
inline ProbeSuite fit_probe_suite(const MatrixXd& reps,
                                  const FactorMatrix& factors,
                                  const std::vector<Index>& train_users,
                                  const std::vector<Index>& val_users,
                                  const ProbeGrid& grid = {},
                                  std::uint64_t seed = 0) {
  for (Index u : val_users) {
    if (std::find(train_users.begin(), train_users.end(), u) !=
        train_users.end()) {
      throw Error("fit_probe_suite: train/val user sets overlap");
    }
  }
  if (train_users.empty() || val_users.empty()) {
    throw Error("fit_probe_suite: empty train or validation user set");
  }
  MatrixXd Xtr(static_cast<Index>(train_users.size()), reps.cols());
  MatrixXd Xva(static_cast<Index>(val_users.size()), reps.cols());
  for (std::size_t i = 0; i < train_users.size(); ++i) {
    Xtr.row(static_cast<Index>(i)) = reps.row(train_users[i]);
  }
  for (std::size_t i = 0; i < val_users.size(); ++i) {
    Xva.row(static_cast<Index>(i)) = reps.row(val_users[i]);
  }

  std::vector<Index> sorted_trees = grid.n_trees;
  std::sort(sorted_trees.begin(), sorted_trees.end());
  const Index max_trees = sorted_trees.back();

  ProbeSuite suite;
  suite.train_users = train_users;
  suite.val_users = val_users;
  for (Index j = 0; j < factors.K; ++j) {
    std::vector<std::uint8_t> ytr, yva;
    ytr.reserve(train_users.size());
    for (Index u : train_users) ytr.push_back(factors.memberships(u, j));
    for (Index u : val_users) yva.push_back(factors.memberships(u, j));

    GbtModel best_model;
    GbtHyper best_hyper;
    double best_acc = -1.0;
    for (Index depth : grid.max_depth) {
      for (double lr : grid.shrinkage) {
        GbtHyper full{max_trees, depth, lr};
        GbtModel fitted = fit_gbt(Xtr, ytr, full, seed);
        for (Index nt : grid.n_trees) {
          GbtModel candidate = truncate_trees(fitted, nt);
          const double acc = balanced_accuracy(candidate, Xva, yva);
          if (acc > best_acc) {
            best_acc = acc;
            best_model = std::move(candidate);
            best_hyper = {nt, depth, lr};
          }
        }
      }
    }
    suite.probes.push_back(std::move(best_model));
    suite.chosen.push_back(best_hyper);
    suite.val_balanced_accuracy.push_back(best_acc);
  }
  return suite;
}

// JSON tree dump for audit.
inline nlohmann::json probe_to_json(const GbtModel& m) {
  nlohmann::json j;
  j["base_score"] = m.base_score;
  j["shrinkage"] = m.shrinkage;
  j["n_features"] = m.n_features;
  j["importances"] = std::vector<double>(
      m.importances.data(), m.importances.data() + m.importances.size());
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"value", n.value}});
    }
    trees.push_back(nodes);
  }
  j["trees"] = trees;
  return j;
}

}  // namespace disrec
