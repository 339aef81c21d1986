#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ember/envelope.hpp"
#include "ember/testbed.hpp"

namespace ember {

/// Interpolated quantile (the common linear rule on order statistics).
inline double quantile_interpolated(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

struct MetricsRow {
  std::string scenario;  // well-count label
  std::string method;
  std::string zone;
  double var_error = 0.0;
  double iqr_error = 0.0;
  double var_sim_err = 0.0;
  double iqr_sim_err = 0.0;
};

namespace detail {

struct ErrorStats {
  double var = 0.0;
  double iqr = 0.0;
};

inline ErrorStats error_stats(const GridVolume& truth, const GridVolume& estimate,
                              const std::vector<std::size_t>& cells) {
  std::vector<double> errors;
  errors.reserve(cells.size());
  double sum = 0.0;
  for (const std::size_t c : cells) {
    const double e = estimate[c] - truth[c];
    errors.push_back(e);
    sum += e;
  }
  const double mean = sum / static_cast<double>(errors.size());
  double var = 0.0;
  for (const double e : errors) var += (e - mean) * (e - mean);
  var /= static_cast<double>(errors.size());  // population variance
  ErrorStats out;
  out.var = var;
  out.iqr = quantile_interpolated(errors, 0.75) - quantile_interpolated(errors, 0.25);
  return out;
}

}  // namespace detail

/// Var/IQR of estimation error over one zone kind, plus the same statistics
/// per realization averaged across realizations. Well cells are excluded;
/// estimation error at wells is not informative for inexact estimators.
inline MetricsRow error_metrics(const GridVolume& truth, const GridVolume& estimate,
                                const std::vector<GridVolume>& realizations,
                                const GridVolume& zones, int zone_kind,
                                const std::vector<std::size_t>& well_cells) {
  if (!estimate.same_geometry(truth) || !zones.same_geometry(truth)) {
    throw DataError("metrics inputs have mismatched geometry");
  }
  if (realizations.empty()) throw DataError("metrics need at least one realization");
  for (const auto& r : realizations) {
    if (!r.same_geometry(truth)) throw DataError("realization geometry mismatch");
  }
  std::vector<char> is_well(truth.size(), 0);
  for (const std::size_t c : well_cells) is_well[c] = 1;
  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < truth.size(); ++c) {
    if (static_cast<int>(zones[c]) != zone_kind || is_well[c]) continue;
    if (truth.missing_at(c) || estimate.missing_at(c)) continue;
    cells.push_back(c);
  }
  if (cells.empty()) throw DataError("empty zone selection for metrics");

  MetricsRow row;
  row.zone = zone_kind == kChannelZone ? "channel" : "shoreface";
  const auto est = detail::error_stats(truth, estimate, cells);
  row.var_error = est.var;
  row.iqr_error = est.iqr;
  double var_sum = 0.0, iqr_sum = 0.0;
  for (const auto& real : realizations) {
    const auto sim = detail::error_stats(truth, real, cells);
    var_sum += sim.var;
    iqr_sum += sim.iqr;
  }
  row.var_sim_err = var_sum / static_cast<double>(realizations.size());
  row.iqr_sim_err = iqr_sum / static_cast<double>(realizations.size());
  return row;
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics CSV '" + path + "'");
  out << "scenario,method,zone,var_error,iqr_error,var_sim_err,iqr_sim_err\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.6f,%.6f,%.6f,%.6f\n", r.scenario.c_str(),
                  r.method.c_str(), r.zone.c_str(), r.var_error, r.iqr_error, r.var_sim_err,
                  r.iqr_sim_err);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Blind-well reporting.

struct BlindWellRow {
  std::size_t cell = 0;
  double depth = 0.0;
  double truth = 0.0;
  double p10 = 0.0, p50 = 0.0, p90 = 0.0;
  std::vector<double> prob_above;  // one entry per threshold
};

struct BlindWellReport {
  std::vector<BlindWellRow> rows;
  std::vector<double> thresholds;
  double coverage = 0.0;  // fraction of depths with truth within [P10, P90]
};

inline BlindWellReport blind_well_report(const Envelope& env, const SampleSet& truth_path,
                                         const std::vector<double>& thresholds) {
  if (truth_path.empty()) throw DataError("blind well path is empty");
  BlindWellReport report;
  report.thresholds = thresholds;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < truth_path.size(); ++i) {
    const auto cell = env.geometry().locate(truth_path[i].loc);
    if (!cell || env.missing(*cell)) {
      throw DataError("blind well depth " + std::to_string(truth_path[i].loc.z) +
                      " falls outside the envelope");
    }
    const ConditionalCdf cdf = env.cell_cdf(*cell);
    BlindWellRow row;
    row.cell = *cell;
    row.depth = truth_path[i].loc.z;
    row.truth = truth_path[i].value;
    row.p10 = cdf.quantile(0.1);
    row.p50 = cdf.quantile(0.5);
    row.p90 = cdf.quantile(0.9);
    for (const double t : thresholds) row.prob_above.push_back(1.0 - cdf.cdf(t));
    if (row.truth >= row.p10 && row.truth <= row.p90) ++covered;
    report.rows.push_back(std::move(row));
  }
  report.coverage = static_cast<double>(covered) / static_cast<double>(truth_path.size());
  return report;
}

inline void write_blind_well_csv(const BlindWellReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write blind well CSV '" + path + "'");
  out << "depth,truth,p10,p50,p90";
  char buf[96];
  for (const double t : report.thresholds) {
    std::snprintf(buf, sizeof(buf), ",prob_above_%g", t);
    out << buf;
  }
  out << "\n";
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g", row.depth, row.truth,
                  row.p10, row.p50, row.p90);
    out << buf;
    for (const double p : row.prob_above) {
      std::snprintf(buf, sizeof(buf), ",%.10g", p);
      out << buf;
    }
    out << "\n";
  }
  std::snprintf(buf, sizeof(buf), "# coverage,%.10g\n", report.coverage);
  out << buf;
}

/// Full CDF dump for the blind well cells: `cell_index,z,weight`.
inline void write_blind_well_cdf_csv(const Envelope& env, const BlindWellReport& report,
                                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write blind well CDF dump '" + path + "'");
  out << "cell_index,z,weight\n";
  char buf[96];
  for (const auto& row : report.rows) {
    for (const auto& [atom, w] : env.cell_atoms(row.cell)) {
      std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", row.cell, env.support()[atom], w);
      out << buf;
    }
  }
}

}  // namespace ember
