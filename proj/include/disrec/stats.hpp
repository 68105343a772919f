#pragma once

#include "disrec/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace disrec {

// ---------------------------------------------------------------------------
// special functions
// ---------------------------------------------------------------------------

namespace special {

/// Regularized incomplete beta I_x(a, b) by the Lentz continued fraction,
/// converged to 1e-12. Uses the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) to stay
/// in the rapidly converging region.
inline double betainc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  auto cont_frac = [](double aa, double bb, double xx) {
    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - (aa + bb) * xx / (aa + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
      const double m2 = 2.0 * m;
      double num = m * (bb - m) * xx / ((aa + m2 - 1.0) * (aa + m2));
      d = 1.0 + num * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      num = -(aa + m) * (aa + bb + m) * xx /
            ((aa + m2) * (aa + m2 + 1.0));
      d = 1.0 + num * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      const double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < 1e-12) break;
    }
    return h;
  };
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * cont_frac(a, b, x) / a;
  }
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) -
                        std::lgamma(a) + b * std::log1p(-x) +
                        a * std::log(x)) *
                   cont_frac(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
inline double t_two_sided_p(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return betainc(0.5 * dof, 0.5, x);
}

}  // namespace special

// ---------------------------------------------------------------------------
// repeated-measurements correlation
// ---------------------------------------------------------------------------

/// Grouped (x, y) observations. Requires >= 2 groups with >= 2 observations
/// each and at least one error degree of freedom.
struct PairedObservations {
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>
      groups;
  std::string x_name;
  std::string y_name;

  Index total_n() const {
    Index n = 0;
    for (const auto& [id, obs] : groups) n += static_cast<Index>(obs.size());
    return n;
  }
};

struct RmcorrResult {
  double r = 0.0;
  Index dof = 0;
  double p_value = 1.0;
  double common_slope = 0.0;
};

/// ANCOVA common-slope correlation: remove group means from x and y, then
/// correlate the de-meaned pairs with dof = N - #groups - 1. The p-value is
/// two-sided from t = r sqrt(dof / (1 - r^2)).
inline RmcorrResult rmcorr(const PairedObservations& obs) {
  if (obs.groups.size() < 2) {
    throw Error("rmcorr: need at least 2 groups");
  }
  Index n_total = 0;
  for (const auto& [id, pts] : obs.groups) {
    if (pts.size() < 2) {
      throw Error("rmcorr: group '" + id + "' has fewer than 2 observations");
    }
    n_total += static_cast<Index>(pts.size());
  }
  const auto k = static_cast<Index>(obs.groups.size());
  const Index dof = n_total - k - 1;
  if (dof < 1) throw Error("rmcorr: not enough error degrees of freedom");

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& [id, pts] : obs.groups) {
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    for (const auto& [x, y] : pts) {
      const double dx = x - mx;
      const double dy = y - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  if (sxx <= 0.0) {
    throw Error("rmcorr: degenerate predictor (zero within-group variance in " +
                (obs.x_name.empty() ? std::string("x") : obs.x_name) + ")");
  }
  RmcorrResult res;
  res.dof = dof;
  res.common_slope = sxy / sxx;
  if (syy <= 0.0) {
    res.r = 0.0;
    res.p_value = 1.0;
    return res;
  }
  res.r = sxy / std::sqrt(sxx * syy);
  res.r = std::clamp(res.r, -1.0, 1.0);
  const double r2 = res.r * res.r;
  if (r2 >= 1.0) {
    res.p_value = 0.0;
  } else {
    const double t = res.r * std::sqrt(static_cast<double>(dof) / (1.0 - r2));
    res.p_value = special::t_two_sided_p(t, static_cast<double>(dof));
  }
  return res;
}

/// One grid cell of the correlation analysis; `available` is false when the
/// cell had too few groups or degenerate variance.
struct GridCell {
  std::string x_measure;
  std::string y_measure;
  bool available = false;
  RmcorrResult result;
  std::string note;
};

/// rmcorr for every unordered measure pair over a table of grouped runs.
/// `values` maps measure name -> per-run value; runs with a missing measure
/// (e.g. no representation) are excluded from cells involving it.
struct MeasureTable {
  std::vector<std::string> measures;
  // one entry per run: group id + measure values (NaN = unavailable)
  struct Run {
    std::string group;
    std::map<std::string, double> values;
  };
  std::vector<Run> runs;
};

inline std::vector<GridCell> correlation_grid(const MeasureTable& table,
                                              double alpha = 0.05) {
  (void)alpha;
  std::vector<GridCell> cells;
  for (std::size_t a = 0; a < table.measures.size(); ++a) {
    for (std::size_t b = a + 1; b < table.measures.size(); ++b) {
      GridCell cell;
      cell.x_measure = table.measures[a];
      cell.y_measure = table.measures[b];
      std::map<std::string, std::vector<std::pair<double, double>>> grouped;
      for (const auto& run : table.runs) {
        auto xit = run.values.find(cell.x_measure);
        auto yit = run.values.find(cell.y_measure);
        if (xit == run.values.end() || yit == run.values.end()) continue;
        if (!std::isfinite(xit->second) || !std::isfinite(yit->second)) {
          continue;
        }
        grouped[run.group].emplace_back(xit->second, yit->second);
      }
      PairedObservations obs;
      obs.x_name = cell.x_measure;
      obs.y_name = cell.y_measure;
      for (auto& [gid, pts] : grouped) {
        if (pts.size() >= 2) obs.groups.emplace_back(gid, std::move(pts));
      }
      if (obs.groups.size() < 2) {
        cell.note = "insufficient groups";
        cells.push_back(std::move(cell));
        continue;
      }
      try {
        cell.result = rmcorr(obs);
        cell.available = true;
      } catch (const Error& e) {
        cell.note = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace disrec
