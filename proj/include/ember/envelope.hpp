#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ember/forest.hpp"

namespace ember {

struct EnvelopeOptions {
  // Lossy fixed-size quantile table per cell, for large grids. The exact
  // sparse representation is the default.
  bool quantile_table = false;
  std::size_t table_points = 101;
};

/// Family of conditional distributions, one per target-grid cell. Cells
/// share the model's support (sorted distinct training targets); each cell
/// stores sparse (atom, weight) pairs. Cells with missing secondary values
/// are marked missing and carry no CDF.
class Envelope {
 public:
  Envelope() = default;

  Envelope(GridVolume geometry, std::vector<double> support, std::string model_id,
           std::vector<std::string> feature_names)
      : geometry_(std::move(geometry)), support_(std::move(support)),
        cells_(geometry_.size()), missing_(geometry_.size(), 0),
        model_id_(std::move(model_id)), feature_names_(std::move(feature_names)) {}

  std::size_t size() const { return cells_.size(); }
  const GridVolume& geometry() const { return geometry_; }
  const std::vector<double>& support() const { return support_; }
  const std::string& model_id() const { return model_id_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  bool missing(std::size_t cell) const { return missing_[cell] != 0; }
  void mark_missing(std::size_t cell) { missing_[cell] = 1; }

  void set_cell(std::size_t cell, std::vector<std::pair<std::uint32_t, double>> atoms) {
    cells_[cell] = std::move(atoms);
  }

  const std::vector<std::pair<std::uint32_t, double>>& cell_atoms(std::size_t cell) const {
    return cells_[cell];
  }

  ConditionalCdf cell_cdf(std::size_t cell) const {
    if (missing(cell)) throw DataError("cell " + std::to_string(cell) + " is missing");
    std::vector<double> support, weights;
    support.reserve(cells_[cell].size());
    weights.reserve(cells_[cell].size());
    for (const auto& [atom, w] : cells_[cell]) {
      support.push_back(support_[atom]);
      weights.push_back(w);
    }
    return ConditionalCdf(std::move(support), std::move(weights));
  }

  /// Empty grid with this envelope's geometry.
  GridVolume make_grid(const std::string& name) const {
    GridVolume g(geometry_.nx(), geometry_.ny(), geometry_.nz(), geometry_.origin(),
                 geometry_.cell_size(), name);
    return g;
  }

 private:
  GridVolume geometry_;
  std::vector<double> support_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> cells_;
  std::vector<char> missing_;
  std::string model_id_;
  std::vector<std::string> feature_names_;
};

/// Evaluate the model at every non-missing cell of the secondary grids.
/// Grids are matched to the model's feature names (coordinates come from
/// cell centers), so the secondary list order does not matter.
inline Envelope build_envelope(const EmberModel& model, const SampleSet& samples,
                               const std::vector<GridVolume>& secondary,
                               const EnvelopeOptions& options = {}) {
  if (secondary.empty()) throw DataError("build_envelope needs at least one secondary grid");
  for (std::size_t g = 1; g < secondary.size(); ++g) {
    if (!secondary[g].same_geometry(secondary[0])) {
      throw DataError("secondary grid '" + secondary[g].name() +
                      "' does not share the target geometry");
    }
  }

  // Resolve each model data feature to a grid or a coordinate axis.
  const std::size_t p_data = model.p_data();
  std::vector<int> source(p_data, -1);  // >=0 grid index; -1 x, -2 y, -3 z
  for (std::size_t f = 0; f < p_data; ++f) {
    const std::string& name = model.feature_names()[f];
    if (name == "x") {
      source[f] = -1;
    } else if (name == "y") {
      source[f] = -2;
    } else if (name == "z") {
      source[f] = -3;
    } else {
      int found = -1;
      for (std::size_t g = 0; g < secondary.size(); ++g) {
        if (secondary[g].name() == name) {
          if (found >= 0) throw DataError("two secondary grids are named '" + name + "'");
          found = static_cast<int>(g);
        }
      }
      if (found < 0) throw DataError("no secondary grid supplies feature '" + name + "'");
      source[f] = found;
    }
  }

  GridVolume geometry = secondary[0];
  geometry.set_name("envelope");
  std::fill(geometry.values().begin(), geometry.values().end(), 0.0);
  Envelope env(std::move(geometry), model.support(), model.id(), model.feature_names());

  parallel_for(env.size(), [&](std::size_t c) {
    for (std::size_t f = 0; f < p_data; ++f) {
      if (source[f] >= 0 && secondary[static_cast<std::size_t>(source[f])].missing_at(c)) {
        env.mark_missing(c);
        return;
      }
    }
    const Location center = secondary[0].cell_center(c);
    std::vector<double> row(p_data);
    for (std::size_t f = 0; f < p_data; ++f) {
      switch (source[f]) {
        case -1: row[f] = center.x; break;
        case -2: row[f] = center.y; break;
        case -3: row[f] = center.z; break;
        default: row[f] = secondary[static_cast<std::size_t>(source[f])][c];
      }
    }
    const std::vector<double> full = predict_features(model, samples, center, row);
    ConditionalCdf cdf = conditional_cdf(model, full);

    if (options.quantile_table && cdf.size() > options.table_points) {
      const double w = 1.0 / static_cast<double>(options.table_points);
      std::vector<double> support, weights;
      for (std::size_t q = 0; q < options.table_points; ++q) {
        const double zq = cdf.quantile((static_cast<double>(q) + 0.5) * w);
        if (!support.empty() && support.back() == zq) {
          weights.back() += w;
        } else {
          support.push_back(zq);
          weights.push_back(w);
        }
      }
      cdf = ConditionalCdf(std::move(support), std::move(weights));
    }

    std::vector<std::pair<std::uint32_t, double>> atoms;
    atoms.reserve(cdf.size());
    for (std::size_t i = 0; i < cdf.size(); ++i) {
      const auto it = std::lower_bound(model.support().begin(), model.support().end(),
                                       cdf.support()[i]);
      atoms.emplace_back(static_cast<std::uint32_t>(it - model.support().begin()),
                         cdf.weights()[i]);
    }
    env.set_cell(c, std::move(atoms));
  });
  return env;
}

// ---------------------------------------------------------------------------
// Derived product grids.

struct Product {
  enum class Kind { mean, quantile, spread, prob_above, prob_interval };
  Kind kind = Kind::mean;
  double p = 0.5;
  double p_lo = 0.1, p_hi = 0.9;
  double threshold = 0.0;
  double a = 0.0, b = 0.0;

  static Product mean() { return {Kind::mean, 0, 0, 0, 0, 0, 0}; }
  static Product quantile(double p) { return {Kind::quantile, p, 0, 0, 0, 0, 0}; }
  static Product spread(double lo, double hi) { return {Kind::spread, 0, lo, hi, 0, 0, 0}; }
  static Product prob_above(double t) { return {Kind::prob_above, 0, 0, 0, t, 0, 0}; }
  static Product prob_interval(double a, double b) {
    return {Kind::prob_interval, 0, 0, 0, 0, a, b};
  }

  std::string default_name() const {
    switch (kind) {
      case Kind::mean: return "mean";
      case Kind::quantile: return "q" + std::to_string(p);
      case Kind::spread: return "spread";
      case Kind::prob_above: return "prob_above";
      case Kind::prob_interval: return "prob_interval";
    }
    return "product";
  }

  void validate() const {
    switch (kind) {
      case Kind::quantile:
        if (!(p > 0.0 && p < 1.0)) throw DataError("quantile p must lie in (0,1)");
        break;
      case Kind::spread:
        if (!(p_lo > 0.0 && p_lo < 1.0 && p_hi > 0.0 && p_hi < 1.0 && p_lo <= p_hi)) {
          throw DataError("spread probabilities must satisfy 0 < p_lo <= p_hi < 1");
        }
        break;
      case Kind::prob_interval:
        if (a > b) throw DataError("interval bounds must satisfy a <= b");
        break;
      default: break;
    }
  }
};

/// Cellwise product grid; missing envelope cells stay missing.
inline GridVolume product(const Envelope& env, const Product& spec,
                          const std::string& name = "") {
  spec.validate();
  GridVolume out = env.make_grid(name.empty() ? spec.default_name() : name);
  parallel_for(env.size(), [&](std::size_t c) {
    if (env.missing(c)) {
      out[c] = kMissing;
      return;
    }
    const ConditionalCdf cdf = env.cell_cdf(c);
    switch (spec.kind) {
      case Product::Kind::mean: out[c] = cdf.mean(); break;
      case Product::Kind::quantile: out[c] = cdf.quantile(spec.p); break;
      case Product::Kind::spread:
        out[c] = cdf.quantile(spec.p_hi) - cdf.quantile(spec.p_lo);
        break;
      case Product::Kind::prob_above: out[c] = 1.0 - cdf.cdf(spec.threshold); break;
      case Product::Kind::prob_interval: out[c] = cdf.interval_prob(spec.a, spec.b); break;
    }
  });
  return out;
}

/// Per-cell CDF dump: `cell_index,z,weight` for every non-missing cell.
inline void write_envelope_csv(const Envelope& env, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write envelope dump '" + path + "'");
  out << "cell_index,z,weight\n";
  char buf[96];
  for (std::size_t c = 0; c < env.size(); ++c) {
    if (env.missing(c)) continue;
    for (const auto& [atom, w] : env.cell_atoms(c)) {
      std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", c, env.support()[atom], w);
      out << buf;
    }
  }
}

}  // namespace ember
