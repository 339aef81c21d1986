#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include "ember/data.hpp"
#include "ember/variogram.hpp"

namespace ember {

enum class KrigingKind { simple, ordinary };

inline std::string to_string(KrigingKind k) {
  return k == KrigingKind::simple ? "simple" : "ordinary";
}

inline KrigingKind kriging_kind_from_string(const std::string& s) {
  if (s == "simple") return KrigingKind::simple;
  if (s == "ordinary") return KrigingKind::ordinary;
  throw DataError("unknown kriging kind '" + s + "'");
}

struct SearchSpec {
  std::size_t max_neighbors = 32;
  double max_radius = std::numeric_limits<double>::infinity();
};

struct KrigingSpec {
  KrigingKind kind = KrigingKind::ordinary;
  VariogramModel variogram;
  std::optional<double> mean;  // required iff simple
  SearchSpec search;

  void validate() const {
    variogram.validate();
    if (kind == KrigingKind::simple && (!mean || !std::isfinite(*mean))) {
      throw DataError("simple kriging requires a finite mean");
    }
    if (search.max_neighbors < 1) throw DataError("kriging neighbor cap must be >= 1");
    if (search.max_radius <= 0.0) throw DataError("kriging search radius must be positive");
  }
};

struct KrigingResult {
  double estimate = 0.0;
  double variance = 0.0;
  std::size_t neighbors_used = 0;
  bool variance_clamped = false;
};

namespace detail {

// Distance in the metric of the model's first structure (rotated and
// range-scaled); Euclidean when the model has no structures. Used only to
// rank neighbors.
inline double anisotropic_distance(const VariogramModel& model, const Location& a,
                                   const Location& b) {
  const std::array<double, 3> h{a.x - b.x, a.y - b.y, a.z - b.z};
  if (model.structures.empty()) {
    return std::sqrt(h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
  }
  const auto& s = model.structures.front();
  const auto hr = rotate_zxz(h, s.angles);
  const double ux = hr[0] / s.ranges[0];
  const double uy = hr[1] / s.ranges[1];
  const double uz = hr[2] / s.ranges[2];
  return std::sqrt(ux * ux + uy * uy + uz * uz);
}

struct Neighbor {
  Location loc;
  double value;
  double rank_dist;
};

inline std::vector<Neighbor> select_neighbors(const KrigingSpec& spec, const SampleSet& samples,
                                              const Location& target) {
  struct Candidate {
    std::size_t index;
    double rank_dist;
    double radius_dist;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = distance(samples[i].loc, target);
    if (d > spec.search.max_radius) continue;
    candidates.push_back({i, anisotropic_distance(spec.variogram, samples[i].loc, target), d});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.rank_dist != b.rank_dist) return a.rank_dist < b.rank_dist;
    return a.index < b.index;
  });
  if (candidates.size() > spec.search.max_neighbors) {
    candidates.resize(spec.search.max_neighbors);
  }

  // Co-located candidates are merged by averaging so the system stays
  // non-singular.
  std::vector<Neighbor> out;
  std::vector<std::size_t> merged_count;
  for (const auto& c : candidates) {
    const Sample& s = samples[c.index];
    bool merged = false;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (same_position(out[k].loc, s.loc)) {
        out[k].value = (out[k].value * static_cast<double>(merged_count[k]) + s.value) /
                       static_cast<double>(merged_count[k] + 1);
        merged_count[k] += 1;
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.push_back({s.loc, s.value, c.rank_dist});
      merged_count.push_back(1);
    }
  }
  return out;
}

}  // namespace detail

/// Solve the kriging system over covariances C(h) = sill - gamma(h).
/// Exact at data points: a target that coincides with a sample returns that
/// sample's value with zero variance.
inline KrigingResult krige(const KrigingSpec& spec, const SampleSet& samples,
                           const Location& target) {
  spec.validate();
  const auto neighbors = detail::select_neighbors(spec, samples, target);
  const std::size_t m = neighbors.size();
  const double total_sill = spec.variogram.total_sill();

  if (m == 0) {
    if (spec.kind == KrigingKind::simple) {
      return {*spec.mean, total_sill, 0, false};  // prior fallback
    }
    throw DataError("ordinary kriging found no samples within the search radius");
  }

  for (const auto& nb : neighbors) {
    if (same_position(nb.loc, target)) {
      return {nb.value, 0.0, m, false};
    }
  }

  Eigen::MatrixXd lhs;
  Eigen::VectorXd rhs;
  const bool ordinary = spec.kind == KrigingKind::ordinary;
  const std::size_t dim = ordinary ? m + 1 : m;
  lhs.setZero(dim, dim);
  rhs.setZero(dim);
  for (std::size_t i = 0; i < m; ++i) {
    lhs(i, i) = total_sill;  // C(0) includes the nugget
    for (std::size_t j = i + 1; j < m; ++j) {
      const double cov = spec.variogram.covariance(neighbors[i].loc, neighbors[j].loc);
      lhs(i, j) = cov;
      lhs(j, i) = cov;
    }
    rhs(i) = spec.variogram.covariance(target, neighbors[i].loc);
  }
  if (ordinary) {
    for (std::size_t i = 0; i < m; ++i) {
      lhs(i, m) = 1.0;
      lhs(m, i) = 1.0;
    }
    rhs(m) = 1.0;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    double closest = std::numeric_limits<double>::infinity();
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        const double d = distance(neighbors[i].loc, neighbors[j].loc);
        if (d < closest) {
          closest = d;
          a = i;
          b = j;
        }
      }
    }
    throw NumericError("singular kriging system; closest neighbor pair (" +
                       std::to_string(neighbors[a].loc.x) + "," + std::to_string(neighbors[a].loc.y) +
                       "," + std::to_string(neighbors[a].loc.z) + ") and (" +
                       std::to_string(neighbors[b].loc.x) + "," + std::to_string(neighbors[b].loc.y) +
                       "," + std::to_string(neighbors[b].loc.z) + ") at distance " +
                       std::to_string(closest));
  }
  const Eigen::VectorXd sol = lu.solve(rhs);

  KrigingResult result;
  result.neighbors_used = m;
  if (ordinary) {
    double est = 0.0, wc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      est += sol(i) * neighbors[i].value;
      wc += sol(i) * rhs(i);
    }
    result.estimate = est;
    result.variance = total_sill - wc - sol(m);  // sol(m) is the Lagrange multiplier
  } else {
    const double mean = *spec.mean;
    double est = mean, wc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      est += sol(i) * (neighbors[i].value - mean);
      wc += sol(i) * rhs(i);
    }
    result.estimate = est;
    result.variance = total_sill - wc;
  }
  if (result.variance < 0.0) {
    result.variance = 0.0;
    result.variance_clamped = true;
  }
  return result;
}

/// Leave-one-out cross validation: element i is the kriging estimate at
/// location i from all other samples.
inline std::vector<double> loo_cross_validate(const KrigingSpec& spec, const SampleSet& samples) {
  if (samples.size() < 2) throw DataError("leave-one-out needs at least 2 samples");
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      out[i] = krige(spec, samples.without(i), samples[i].loc).estimate;
    } catch (const std::runtime_error& err) {
      throw DataError("leave-one-out failed at sample " + std::to_string(i) + ": " + err.what());
    }
  }
  return out;
}

}  // namespace ember
