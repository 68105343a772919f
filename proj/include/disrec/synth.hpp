#pragma once

#include "disrec/factors.hpp"
#include "disrec/interactions.hpp"
#include "disrec/learners/config.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <set>
#include <vector>

namespace disrec {

/// Synthetic dataset with known binary user factors and a representation
/// whose entanglement is controlled by `mixing` (identity = perfectly
/// axis-aligned factors).
struct SynthSpec {
  Index n_users = 1000;
  Index n_items = 500;
  Index K = 6;
  Index M = 6;
  double noise_sigma = 0.05;
  MatrixXd mixing;           // M x M, invertible; empty = identity
  Index items_per_factor = 0;  // 0 = n_items / K
  Index interactions_per_user = 30;
  std::uint64_t seed = 0;

  void validate() const {
    if (K < 2 || M < K) throw Error("SynthSpec: need 2 <= K <= M");
    if (n_users < 2 || n_items < K) throw Error("SynthSpec: too small");
    if (noise_sigma < 0.0) throw Error("SynthSpec: negative noise");
    if (mixing.size() > 0) {
      if (mixing.rows() != M || mixing.cols() != M) {
        throw Error("SynthSpec: mixing must be M x M");
      }
      Eigen::FullPivLU<MatrixXd> lu(mixing);
      if (!lu.isInvertible()) throw Error("SynthSpec: mixing not invertible");
    }
  }
};

struct SynthData {
  InteractionMatrix interactions;
  FactorMatrix factors;
  RepresentationMatrix representation;
};

/// Seeded random rotation (QR of a Gaussian matrix, det-sign fixed).
inline MatrixXd random_rotation(Index m, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x407);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd a(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) a(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(m, m);
  MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < m; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Users draw factors Bernoulli(0.3) (redrawn while empty), items belong to
/// one factor block each, and 90% of a user's interactions come from their
/// factors' items (10% uniform). Representation = [factors | 0-padding]
/// * mixing^T + N(0, sigma^2).
inline SynthData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, 0x9e0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Index ipf = spec.items_per_factor > 0 ? spec.items_per_factor
                                              : spec.n_items / spec.K;
  if (ipf < 1) throw Error("generate: items_per_factor resolves to 0");

  // binary user factors
  FactorMatrix factors;
  factors.n_users = spec.n_users;
  factors.K = spec.K;
  factors.memberships.resize(spec.n_users, spec.K);
  for (Index c = 0; c < spec.K; ++c) {
    factors.factor_labels.push_back("f" + std::to_string(c));
  }
  for (Index u = 0; u < spec.n_users; ++u) {
    bool any = false;
    while (!any) {
      for (Index c = 0; c < spec.K; ++c) {
        const bool member = unit(rng) < 0.3;
        factors.memberships(u, c) = member ? 1 : 0;
        any = any || member;
      }
    }
  }

  // item blocks per factor; leftovers are an off-factor pool
  auto factor_of_item = [&](Index i) -> Index {
    const Index f = i / ipf;
    return f < spec.K ? f : -1;
  };

  // interactions: 90% on-factor, 10% uniform; distinct items per user
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;
  std::vector<std::string> user_ids, item_ids;
  for (Index u = 0; u < spec.n_users; ++u) {
    user_ids.push_back("u" + std::to_string(u));
  }
  for (Index i = 0; i < spec.n_items; ++i) {
    item_ids.push_back("i" + std::to_string(i));
  }
  for (Index u = 0; u < spec.n_users; ++u) {
    std::vector<Index> on_factor;
    for (Index i = 0; i < spec.n_items; ++i) {
      const Index f = factor_of_item(i);
      if (f >= 0 && factors.memberships(u, f)) on_factor.push_back(i);
    }
    std::set<Index> chosen;
    const Index want =
        std::min(spec.interactions_per_user, spec.n_items);
    Index attempts = 0;
    while (static_cast<Index>(chosen.size()) < want &&
           attempts < want * 50) {
      ++attempts;
      Index item;
      if (!on_factor.empty() && unit(rng) < 0.9) {
        item = on_factor[static_cast<std::size_t>(
            std::min<double>(static_cast<double>(on_factor.size()) - 1.0,
                             std::floor(unit(rng) *
                                        static_cast<double>(on_factor.size()))))];
      } else {
        item = static_cast<Index>(
            std::min<double>(static_cast<double>(spec.n_items) - 1.0,
                             std::floor(unit(rng) *
                                        static_cast<double>(spec.n_items))));
      }
      chosen.insert(item);
    }
    for (Index i : chosen) {
      entries.emplace_back(static_cast<std::uint32_t>(u),
                           static_cast<std::uint32_t>(i));
    }
  }

  SynthData out;
  out.interactions = InteractionMatrix(spec.n_users, spec.n_items,
                                       std::move(entries), user_ids, item_ids);
  out.factors = std::move(factors);

  MatrixXd base = MatrixXd::Zero(spec.n_users, spec.M);
  for (Index u = 0; u < spec.n_users; ++u) {
    for (Index c = 0; c < spec.K; ++c) {
      base(u, c) = static_cast<double>(out.factors.memberships(u, c));
    }
  }
  MatrixXd mixed = spec.mixing.size() > 0 ? MatrixXd(base * spec.mixing.transpose())
                                          : base;
  for (Index u = 0; u < spec.n_users; ++u) {
    for (Index j = 0; j < spec.M; ++j) {
      mixed(u, j) += spec.noise_sigma * gauss(rng);
    }
  }
  out.representation.values = std::move(mixed);
  out.representation.model_tag = "synth";
  out.representation.seed = spec.seed;
  out.representation.validate();
  return out;
}

}  // namespace disrec
