#pragma once

#include "disrec/harness/run_matrix.hpp"
#include "disrec/stats.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace disrec {

namespace report_detail {

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
  Index n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd ms;
  ms.n = static_cast<Index>(v.size());
  if (v.empty()) return ms;
  for (double x : v) ms.mean += x;
  ms.mean /= static_cast<double>(v.size());
  for (double x : v) ms.stddev += (x - ms.mean) * (x - ms.mean);
  ms.stddev = v.size() > 1
                  ? std::sqrt(ms.stddev / static_cast<double>(v.size() - 1))
                  : 0.0;
  return ms;
}

inline std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace report_detail

/// Measures a RunRecord may carry; null for models without representations.
inline std::map<std::string, double> record_measures(const RunRecord& r) {
  std::map<std::string, double> out;
  for (const auto& [metric, by_k] : r.effectiveness.scores) {
    for (const auto& [k, v] : by_k) {
      out[metric + "@" + std::to_string(k)] = v;
    }
  }
  if (r.D) out["disentanglement"] = *r.D;
  if (r.C) out["completeness"] = *r.C;
  if (r.lime_global) out["lime_global"] = *r.lime_global;
  if (r.shap_global) out["shap_global"] = *r.shap_global;
  return out;
}

inline std::vector<std::string> standard_measures(
    const std::vector<Index>& cutoffs = {10, 50, 100}) {
  std::vector<std::string> out;
  for (const char* m : {"ndcg", "recall", "mrr", "coverage"}) {
    for (Index k : cutoffs) out.push_back(std::string(m) + "@" + std::to_string(k));
  }
  out.insert(out.end(), {"disentanglement", "completeness", "lime_global",
                         "shap_global"});
  return out;
}

struct ReportBundle {
  std::map<std::string, std::string> csv;       // filename -> contents
  std::map<std::string, std::string> markdown;  // filename -> contents
};

namespace report_detail {

using Aggregate = std::map<std::string,                       // dataset
                           std::map<std::string,              // model
                                    std::map<std::string,     // measure
                                             std::vector<double>>>>;

inline Aggregate aggregate(const std::vector<RunRecord>& records) {
  Aggregate agg;
  for (const auto& r : records) {
    if (r.failed()) continue;
    for (const auto& [measure, value] : record_measures(r)) {
      agg[r.dataset][r.model][measure].push_back(value);
    }
  }
  return agg;
}

inline std::string table_markdown(
    const std::string& dataset,
    const std::map<std::string, std::map<std::string, std::vector<double>>>&
        by_model,
    const std::vector<std::string>& measures) {
  // best mean per measure, for bolding
  std::map<std::string, std::string> best_model;
  for (const auto& m : measures) {
    double best = -1.0;
    for (const auto& [model, values] : by_model) {
      auto it = values.find(m);
      if (it == values.end() || it->second.empty()) continue;
      const double mean = mean_std(it->second).mean;
      if (mean > best) {
        best = mean;
        best_model[m] = model;
      }
    }
  }
  std::ostringstream os;
  os << "### " << dataset << "\n\n| model |";
  for (const auto& m : measures) os << " " << m << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < measures.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& [model, values] : by_model) {
    os << "| " << model << " |";
    for (const auto& m : measures) {
      auto it = values.find(m);
      if (it == values.end() || it->second.empty()) {
        os << " - |";
        continue;
      }
      const auto ms = mean_std(it->second);
      std::string cell = fixed4(ms.mean) + " ± " + fixed4(ms.stddev);
      if (best_model[m] == model) cell = "**" + cell + "**";
      os << " " << cell << " |";
    }
    os << "\n";
  }
  os << "\n";
  return os.str();
}

inline std::string table_csv(
    const std::string& dataset,
    const std::map<std::string, std::map<std::string, std::vector<double>>>&
        by_model,
    const std::vector<std::string>& measures) {
  std::ostringstream os;
  os << "dataset,model";
  for (const auto& m : measures) os << "," << m << "_mean," << m << "_std";
  os << "\n";
  for (const auto& [model, values] : by_model) {
    os << dataset << "," << model;
    for (const auto& m : measures) {
      auto it = values.find(m);
      if (it == values.end() || it->second.empty()) {
        os << ",,";
        continue;
      }
      const auto ms = mean_std(it->second);
      os << "," << format_double(ms.mean) << "," << format_double(ms.stddev);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace report_detail

enum class Grouping { by_model, by_dataset };

/// rmcorr grids. Grouping::by_model builds one grid per dataset with models
/// as groups; Grouping::by_dataset one grid per model with datasets as
/// groups.
inline std::map<std::string, std::vector<GridCell>> correlation_grids(
    const std::vector<RunRecord>& records, Grouping grouping,
    const std::vector<Index>& cutoffs = {10, 50, 100}) {
  std::map<std::string, std::vector<RunRecord>> contexts;
  for (const auto& r : records) {
    if (r.failed()) continue;
    contexts[grouping == Grouping::by_model ? r.dataset : r.model].push_back(r);
  }
  std::map<std::string, std::vector<GridCell>> grids;
  for (const auto& [context, rs] : contexts) {
    MeasureTable table;
    table.measures = standard_measures(cutoffs);
    for (const auto& r : rs) {
      MeasureTable::Run run;
      run.group = grouping == Grouping::by_model ? r.model : r.dataset;
      run.values = record_measures(r);
      table.runs.push_back(std::move(run));
    }
    grids[context] = correlation_grid(table);
  }
  return grids;
}

inline std::string grid_csv(const std::string& context,
                            const std::vector<GridCell>& cells) {
  std::ostringstream os;
  os << "context,x_measure,y_measure,r,dof,p,significant,available,note\n";
  for (const auto& c : cells) {
    os << context << "," << c.x_measure << "," << c.y_measure << ",";
    if (c.available) {
      os << format_double(c.result.r) << "," << c.result.dof << ","
         << format_double(c.result.p_value) << ","
         << (c.result.p_value < 0.05 ? 1 : 0) << ",1,";
    } else {
      os << ",,,,0," << c.note;
    }
    os << "\n";
  }
  return os.str();
}

inline std::string grid_markdown(const std::string& context,
                                 const std::vector<GridCell>& cells,
                                 const std::vector<std::string>& measures) {
  std::map<std::pair<std::string, std::string>, const GridCell*> lookup;
  for (const auto& c : cells) {
    lookup[{c.x_measure, c.y_measure}] = &c;
    lookup[{c.y_measure, c.x_measure}] = &c;
  }
  std::ostringstream os;
  os << "### " << context << "\n\n|  |";
  for (const auto& m : measures) os << " " << m << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < measures.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& row : measures) {
    os << "| " << row << " |";
    for (const auto& col : measures) {
      if (row == col) {
        os << " 1.00 |";
        continue;
      }
      auto it = lookup.find({row, col});
      if (it == lookup.end() || !it->second->available) {
        os << " - |";
        continue;
      }
      const auto& res = it->second->result;
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(2) << res.r;
      os << " " << cell.str() << (res.p_value < 0.05 ? "*" : "") << " |";
    }
    os << "\n";
  }
  os << "\n(*) p < 0.05\n\n";
  return os.str();
}

/// Assemble the full report: per-dataset effectiveness tables,
/// disentanglement/interpretability tables, and both rmcorr grid families.
inline ReportBundle report(const std::vector<RunRecord>& records,
                           const std::vector<Index>& cutoffs = {10, 50, 100}) {
  if (records.empty()) throw Error("report: no records");
  ReportBundle bundle;
  auto agg = report_detail::aggregate(records);

  std::vector<std::string> eff_measures;
  for (const char* m : {"ndcg", "recall", "mrr", "coverage"}) {
    for (Index k : cutoffs) {
      eff_measures.push_back(std::string(m) + "@" + std::to_string(k));
    }
  }
  const std::vector<std::string> di_measures = {
      "disentanglement", "completeness", "lime_global", "shap_global"};

  std::string eff_md = "## Effectiveness (mean ± std over seeds)\n\n";
  std::string di_md =
      "## Disentanglement and interpretability (mean ± std over seeds)\n\n";
  std::string eff_csv, di_csv;
  for (const auto& [dataset, by_model] : agg) {
    eff_md += report_detail::table_markdown(dataset, by_model, eff_measures);
    di_md += report_detail::table_markdown(dataset, by_model, di_measures);
    const std::string ecsv =
        report_detail::table_csv(dataset, by_model, eff_measures);
    const std::string dcsv =
        report_detail::table_csv(dataset, by_model, di_measures);
    if (eff_csv.empty()) {
      eff_csv = ecsv;
      di_csv = dcsv;
    } else {
      // drop the header line of subsequent datasets
      eff_csv += ecsv.substr(ecsv.find('\n') + 1);
      di_csv += dcsv.substr(dcsv.find('\n') + 1);
    }
  }
  bundle.markdown["effectiveness.md"] = eff_md;
  bundle.markdown["disentanglement_interpretability.md"] = di_md;
  bundle.csv["effectiveness.csv"] = eff_csv;
  bundle.csv["disentanglement_interpretability.csv"] = di_csv;

  const auto measures = standard_measures(cutoffs);
  for (auto grouping : {Grouping::by_model, Grouping::by_dataset}) {
    // grouping by model yields one grid per dataset and vice versa
    const std::string tag =
        grouping == Grouping::by_model ? "by_dataset" : "by_model";
    const std::string desc = grouping == Grouping::by_model
                                 ? "one grid per dataset, groups = models"
                                 : "one grid per model, groups = datasets";
    auto grids = correlation_grids(records, grouping, cutoffs);
    std::string md = "## rmcorr grids (" + desc + ")\n\n";
    std::string csv;
    for (const auto& [context, cells] : grids) {
      md += grid_markdown(context, cells, measures);
      const std::string c = grid_csv(context, cells);
      if (csv.empty()) {
        csv = c;
      } else {
        csv += c.substr(c.find('\n') + 1);
      }
    }
    bundle.markdown["rmcorr_" + tag + ".md"] = md;
    bundle.csv["rmcorr_" + tag + ".csv"] = csv;
  }
  return bundle;
}

inline void write_report(const ReportBundle& bundle, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, contents] : bundle.csv) {
    std::ofstream out(std::filesystem::path(dir) / name);
    out << contents;
  }
  for (const auto& [name, contents] : bundle.markdown) {
    std::ofstream out(std::filesystem::path(dir) / name);
    out << contents;
  }
}

}  // namespace disrec
