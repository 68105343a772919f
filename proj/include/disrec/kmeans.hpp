#pragma once

#include "disrec/common.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace disrec {

struct KMeansResult {
  MatrixXd centroids;               // k x dim
  std::vector<Index> assignments;   // per row of the input
  double inertia = 0.0;
  Index n_iter = 0;
};

namespace detail {
inline Index nearest_centroid(const MatrixXd& points, Index row,
                              const MatrixXd& centroids, double* dist_out) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double d = (points.row(row) - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out != nullptr) *dist_out = best_d;
  return best;
}
}  // namespace detail

/// Lloyd iterations with k-means++ seeding. Deterministic per seed; ties in
/// nearest-centroid go to the lowest index. An emptied cluster is re-seeded
/// at the point farthest from its assigned centroid.
inline KMeansResult kmeans(const MatrixXd& points, Index k, std::uint64_t seed,
                           Index max_iter = 300, double tol = 1e-6) {
  const Index n = points.rows();
  if (k < 1) throw Error("kmeans: k must be >= 1");
  if (n < k) throw Error("kmeans: fewer points than clusters");

  Rng rng = make_rng(seed, 0xca11);
  MatrixXd centroids(k, points.cols());

  // k-means++: first centroid uniform, the rest D^2-sampled via inverse CDF
  // so the draw sequence is portable.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  {
    const Index first = static_cast<Index>(
        std::min<double>(static_cast<double>(n) - 1.0,
                         std::floor(unit(rng) * static_cast<double>(n))));
    centroids.row(0) = points.row(first);
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Index c = 1; c < k; ++c) {
      double total = 0.0;
      for (Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index cc = 0; cc < c; ++cc) {
          best = std::min(best,
                          (points.row(i) - centroids.row(cc)).squaredNorm());
        }
        d2[static_cast<std::size_t>(i)] = best;
        total += best;
      }
      if (total <= 0.0) {
        // all remaining points coincide with chosen centroids
        centroids.row(c) = points.row(c % n);
        continue;
      }
      const double target = unit(rng) * total;
      double acc = 0.0;
      Index chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
      centroids.row(c) = points.row(chosen);
    }
  }

  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  double prev_inertia = std::numeric_limits<double>::infinity();
  KMeansResult res;
  res.centroids = centroids;

  for (Index it = 0; it < max_iter; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      double d;
      const Index c = detail::nearest_centroid(points, i, centroids, &d);
      if (c != assign[static_cast<std::size_t>(i)]) changed = true;
      assign[static_cast<std::size_t>(i)] = c;
      dist[static_cast<std::size_t>(i)] = d;
      inertia += d;
    }
    res.n_iter = it + 1;
    res.inertia = inertia;
    res.assignments = assign;
    res.centroids = centroids;
    if (!changed) break;

    MatrixXd sums = MatrixXd::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) =
            sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // re-seed at the farthest point
        Index far = 0;
        for (Index i = 1; i < n; ++i) {
          if (dist[static_cast<std::size_t>(i)] >
              dist[static_cast<std::size_t>(far)]) {
            far = i;
          }
        }
        centroids.row(c) = points.row(far);
        dist[static_cast<std::size_t>(far)] = 0.0;
      }
    }
    if (prev_inertia < std::numeric_limits<double>::infinity()) {
      const double rel = std::abs(prev_inertia - inertia) /
                         std::max(prev_inertia, 1e-30);
      if (rel < tol && inertia <= prev_inertia) {
        break;
      }
    }
    prev_inertia = inertia;
  }
  return res;
}

}  // namespace disrec
