#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ember/envelope.hpp"
#include "ember/kriging.hpp"

namespace ember {

enum class FieldGenerator { automatic, dense, sgs };

struct SamplingSpec {
  VariogramModel correlation;  // unit total sill
  std::size_t n_realizations = 1;
  std::uint64_t seed = 0;
  std::size_t gibbs_iterations = 100;
  double conditioning_tol = 1e-9;
  FieldGenerator generator = FieldGenerator::automatic;
  std::size_t sgs_neighbors = 24;
  std::size_t dense_cell_cap = 20000;

  void validate() const {
    correlation.validate();
    if (std::abs(correlation.total_sill() - 1.0) > 1e-9) {
      throw DataError("sampling correlation model must have unit total sill (got " +
                      std::to_string(correlation.total_sill()) + ")");
    }
    if (n_realizations < 1) throw DataError("realization count must be >= 1");
    if (gibbs_iterations < 1) throw DataError("gibbs iteration count must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Sampling-RF correlation inference from envelope residuals.

struct CorrelationBin {
  double lag = 0.0;
  std::size_t count = 0;
  double rho = 0.0;
};

struct CorrelationSeries {
  std::vector<CorrelationBin> bins;
  double lag_width = 1.0;
  std::vector<std::string> warnings;
};

/// Normalized residuals r_i = (Z_i - mean_i)/sd_i against the envelope CDF
/// at each sample, then the pairwise product average per isotropic lag bin,
/// clamped to [-1, 1].
inline CorrelationSeries residual_correlation(const Envelope& env, const SampleSet& samples,
                                              double lag_width, std::size_t n_lags) {
  if (lag_width <= 0.0) throw DataError("lag width must be positive");
  if (n_lags == 0) throw DataError("number of lags must be positive");
  CorrelationSeries out;
  out.lag_width = lag_width;
  out.bins.resize(n_lags);
  for (std::size_t k = 0; k < n_lags; ++k) {
    out.bins[k].lag = static_cast<double>(k + 1) * lag_width;
  }

  std::vector<Location> locs;
  std::vector<double> residuals;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto cell = env.geometry().locate(samples[i].loc);
    if (!cell || env.missing(*cell)) {
      out.warnings.push_back("sample " + std::to_string(i) +
                             " has no envelope cell; excluded");
      continue;
    }
    const ConditionalCdf cdf = env.cell_cdf(*cell);
    const double sd = cdf.stddev();
    if (!(sd > 0.0)) {
      out.warnings.push_back("sample " + std::to_string(i) +
                             " sits on a degenerate envelope cell; excluded");
      continue;
    }
    locs.push_back(samples[i].loc);
    residuals.push_back((samples[i].value - cdf.mean()) / sd);
  }
  if (residuals.size() < 3) {
    throw DataError("residual correlation needs at least 3 usable samples, found " +
                    std::to_string(residuals.size()));
  }
  bool any_nonzero = false;
  for (double r : residuals) any_nonzero = any_nonzero || r != 0.0;
  if (!any_nonzero) {
    out.warnings.push_back("all residuals are zero; correlation undefined, pairs excluded");
    return out;
  }

  std::vector<double> sums(n_lags, 0.0);
  for (std::size_t i = 0; i < locs.size(); ++i) {
    for (std::size_t j = i + 1; j < locs.size(); ++j) {
      const double d = distance(locs[i], locs[j]);
      const auto k = static_cast<std::ptrdiff_t>(std::floor(d / lag_width + 0.5));
      if (k < 1 || k > static_cast<std::ptrdiff_t>(n_lags)) continue;
      sums[k - 1] += residuals[i] * residuals[j];
      out.bins[k - 1].count += 1;
    }
  }
  for (std::size_t k = 0; k < n_lags; ++k) {
    if (out.bins[k].count > 0) {
      out.bins[k].rho = std::clamp(sums[k] / static_cast<double>(out.bins[k].count), -1.0, 1.0);
    }
  }
  return out;
}

/// Semivariance view of a correlation series (gamma = 1 - rho at unit
/// sill), ready for fit_variogram.
inline ExperimentalVariogram correlation_to_variogram(const CorrelationSeries& series) {
  ExperimentalVariogram out;
  out.lag_width = series.lag_width;
  out.bins.reserve(series.bins.size());
  for (const auto& b : series.bins) {
    VariogramBin vb;
    vb.lag = b.lag;
    vb.count = b.count;
    vb.gamma = b.count > 0 ? std::max(0.0, 1.0 - b.rho) : 0.0;
    out.bins.push_back(vb);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conditioning intervals at the data.

struct ConditioningInterval {
  double u_low = kUniformClamp;  // open lower bound, in (0,1]
  double u_high = 1.0;
  double g_low = 0.0;  // Gaussian bounds, normal_quantile of the clamped u's
  double g_high = 0.0;
};

struct ConditioningResult {
  std::vector<ConditioningInterval> intervals;
  std::vector<std::string> warnings;
};

/// Per sample, the uniform interval whose quantile reproduces the observed
/// value: (cumulative weight strictly below the nearest support atom,
/// cumulative weight through it]. Values outside the local support snap to
/// the nearest atom with a warning; the envelope is not exact at data.
inline ConditioningResult conditioning_intervals(const Envelope& env, const SampleSet& samples) {
  ConditioningResult out;
  out.intervals.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto cell = env.geometry().locate(samples[i].loc);
    if (!cell) {
      throw DataError("sample " + std::to_string(i) + " lies outside the envelope grid");
    }
    if (env.missing(*cell)) {
      throw DataError("sample " + std::to_string(i) + " sits on a missing envelope cell");
    }
    const ConditionalCdf cdf = env.cell_cdf(*cell);
    const double z = samples[i].value;
    if (z < cdf.min_support() || z > cdf.max_support()) {
      out.warnings.push_back("sample " + std::to_string(i) + " value " + std::to_string(z) +
                             " is outside the local envelope support; snapped");
    }
    // Nearest support atom; ties resolve to the lower one.
    const auto& sup = cdf.support();
    const auto it = std::lower_bound(sup.begin(), sup.end(), z);
    std::size_t atom;
    if (it == sup.begin()) {
      atom = 0;
    } else if (it == sup.end()) {
      atom = sup.size() - 1;
    } else {
      const std::size_t hi = static_cast<std::size_t>(it - sup.begin());
      atom = (z - sup[hi - 1] <= sup[hi] - z) ? hi - 1 : hi;
    }
    ConditioningInterval ci;
    ci.u_high = std::max(cdf.cdf(sup[atom]), kUniformClamp);
    ci.u_low = std::max(cdf.cdf_below(sup[atom]), kUniformClamp);
    if (ci.u_low > ci.u_high) ci.u_low = ci.u_high;
    ci.g_low = normal_quantile(ci.u_low);
    ci.g_high = normal_quantile(clamp_uniform(ci.u_high));
    out.intervals.push_back(ci);
  }
  return out;
}

namespace detail {

inline double truncated_normal(double mu, double sigma, double lo, double hi, Rng& rng) {
  const double pa = normal_cdf((lo - mu) / sigma);
  const double pb = normal_cdf((hi - mu) / sigma);
  if (!(pb - pa > 1e-14)) return std::clamp(mu, lo, hi);
  const double u = clamp_uniform(pa + rng.uniform01() * (pb - pa));
  return std::clamp(mu + sigma * normal_quantile(u), lo, hi);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Truncated-Gaussian Gibbs sampler over the data locations.

class GibbsSampler {
 public:
  GibbsSampler(std::vector<ConditioningInterval> intervals, const std::vector<Location>& locations,
               const VariogramModel& correlation, std::size_t iterations)
      : intervals_(std::move(intervals)), iterations_(iterations) {
    const std::size_t n = intervals_.size();
    if (locations.size() != n) throw DataError("interval and location counts differ");
    if (n == 0) throw DataError("gibbs sampler needs at least one datum");
    Eigen::MatrixXd cov(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      cov(i, i) = 1.0 + 1e-8;  // jitter
      for (std::size_t j = i + 1; j < n; ++j) {
        const double c = correlation.correlation(
            {locations[i].x - locations[j].x, locations[i].y - locations[j].y,
             locations[i].z - locations[j].z});
        cov(i, j) = c;
        cov(j, i) = c;
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NumericError("data correlation matrix is not positive definite after jitter");
    }
    precision_ = llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                     static_cast<Eigen::Index>(n)));
  }

  /// One complete draw: independent truncated start, then full sweeps of
  /// single-site conditional updates. Every value honors its interval.
  std::vector<double> draw(std::uint64_t seed) const {
    const auto n = static_cast<std::size_t>(precision_.rows());
    Rng rng(seed);
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      x(static_cast<Eigen::Index>(i)) =
          detail::truncated_normal(0.0, 1.0, intervals_[i].g_low, intervals_[i].g_high, rng);
    }
    for (std::size_t it = 0; it < iterations_; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double qii = precision_(ii, ii);
        double dot = 0.0;
        for (Eigen::Index j = 0; j < precision_.cols(); ++j) {
          if (j != ii) dot += precision_(ii, j) * x(j);
        }
        const double mu = -dot / qii;
        const double sigma = std::sqrt(1.0 / qii);
        x(ii) = detail::truncated_normal(mu, sigma, intervals_[i].g_low, intervals_[i].g_high, rng);
      }
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = x(static_cast<Eigen::Index>(i));
    return out;
  }

 private:
  std::vector<ConditioningInterval> intervals_;
  std::size_t iterations_;
  Eigen::MatrixXd precision_;
};

inline std::vector<double> gibbs_truncated_gaussian(
    const std::vector<ConditioningInterval>& intervals, const std::vector<Location>& locations,
    const SamplingSpec& spec, std::uint64_t seed) {
  GibbsSampler sampler(intervals, locations, spec.correlation, spec.gibbs_iterations);
  return sampler.draw(seed);
}

// ---------------------------------------------------------------------------
// Conditioned stationary Gaussian fields on the grid.

/// Zero-mean unit-variance Gaussian field realizations with a fixed
/// correlation model, conditioned to given values at data cells by residual
/// substitution. The dense generator factorizes the full grid covariance
/// once (exact, for desk-scale grids); sequential simulation with a
/// neighbor cap is the fallback for larger grids.
class GaussianFieldGenerator {
 public:
  GaussianFieldGenerator(const GridVolume& geometry, const VariogramModel& correlation,
                         std::vector<std::size_t> data_cells,
                         FieldGenerator kind = FieldGenerator::automatic,
                         std::size_t sgs_neighbors = 24, std::size_t dense_cell_cap = 20000)
      : geometry_(geometry), corr_(correlation), data_cells_(std::move(data_cells)),
        sgs_neighbors_(std::max<std::size_t>(1, sgs_neighbors)) {
    for (std::size_t k = 0; k < data_cells_.size(); ++k) {
      if (data_cells_[k] >= geometry_.size()) throw DataError("data cell index out of range");
      for (std::size_t l = k + 1; l < data_cells_.size(); ++l) {
        if (data_cells_[k] == data_cells_[l]) {
          throw DataError("two data fall in grid cell " + std::to_string(data_cells_[k]) +
                          "; merge them or refine the grid");
        }
      }
    }
    const std::size_t n = geometry_.size();
    if (kind == FieldGenerator::dense && n > dense_cell_cap) {
      throw NumericError("dense field generator supports up to " +
                         std::to_string(dense_cell_cap) + " cells, grid has " +
                         std::to_string(n) + "; split the grid or use the sgs generator");
    }
    dense_ = kind == FieldGenerator::dense ||
             (kind == FieldGenerator::automatic && n <= dense_cell_cap);
    if (dense_) factorize();
  }

  bool dense() const { return dense_; }
  const std::vector<std::size_t>& data_cells() const { return data_cells_; }

  GridVolume realize(std::uint64_t seed, const std::vector<double>& data_values) const {
    if (data_values.size() != data_cells_.size()) {
      throw DataError("data value count does not match data cell count");
    }
    return dense_ ? realize_dense(seed, data_values) : realize_sgs(seed, data_values);
  }

 private:
  void factorize() {
    const auto n = static_cast<Eigen::Index>(geometry_.size());
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Location a = geometry_.cell_center(static_cast<std::size_t>(i));
      cov(i, i) = 1.0 + 1e-8;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Location b = geometry_.cell_center(static_cast<std::size_t>(j));
        const double c = corr_.correlation({a.x - b.x, a.y - b.y, a.z - b.z});
        cov(i, j) = c;
        cov(j, i) = c;
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NumericError("grid covariance is not positive definite after jitter");
    }
    chol_ = llt.matrixL();

    const auto nd = static_cast<Eigen::Index>(data_cells_.size());
    if (nd > 0) {
      Eigen::MatrixXd cdd(nd, nd);
      Eigen::MatrixXd cdn(nd, n);
      for (Eigen::Index a = 0; a < nd; ++a) {
        for (Eigen::Index b = 0; b < nd; ++b) {
          cdd(a, b) = cov(static_cast<Eigen::Index>(data_cells_[static_cast<std::size_t>(a)]),
                          static_cast<Eigen::Index>(data_cells_[static_cast<std::size_t>(b)]));
        }
        cdn.row(a) = cov.row(static_cast<Eigen::Index>(data_cells_[static_cast<std::size_t>(a)]));
      }
      Eigen::LLT<Eigen::MatrixXd> dll(cdd);
      if (dll.info() != Eigen::Success) {
        throw NumericError("data-cell covariance is not positive definite");
      }
      cond_weights_ = dll.solve(cdn);  // nd x n simple-kriging weights
    }
  }

  GridVolume realize_dense(std::uint64_t seed, const std::vector<double>& data_values) const {
    const auto n = static_cast<Eigen::Index>(geometry_.size());
    Rng rng(seed);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
    Eigen::VectorXd x = chol_.triangularView<Eigen::Lower>() * z;
    if (!data_cells_.empty()) {
      const auto nd = static_cast<Eigen::Index>(data_cells_.size());
      Eigen::VectorXd resid(nd);
      for (Eigen::Index d = 0; d < nd; ++d) {
        resid(d) = data_values[static_cast<std::size_t>(d)] -
                   x(static_cast<Eigen::Index>(data_cells_[static_cast<std::size_t>(d)]));
      }
      x += cond_weights_.transpose() * resid;
    }
    GridVolume out(geometry_.nx(), geometry_.ny(), geometry_.nz(), geometry_.origin(),
                   geometry_.cell_size(), "gaussian_field");
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = x(i);
    return out;
  }

  GridVolume realize_sgs(std::uint64_t seed, const std::vector<double>& data_values) const {
    const std::size_t n = geometry_.size();
    GridVolume out(geometry_.nx(), geometry_.ny(), geometry_.nz(), geometry_.origin(),
                   geometry_.cell_size(), "gaussian_field");
    std::vector<char> known(n, 0);
    for (std::size_t d = 0; d < data_cells_.size(); ++d) {
      out[data_cells_[d]] = data_values[d];
      known[data_cells_[d]] = 1;
    }

    Rng rng(seed);
    std::vector<std::size_t> path;
    path.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
      if (!known[c]) path.push_back(c);
    }
    for (std::size_t i = path.size(); i > 1; --i) {  // Fisher-Yates
      std::swap(path[i - 1], path[rng.uniform_index(i)]);
    }

    std::vector<std::size_t> nbr;
    for (const std::size_t c : path) {
      gather_known_neighbors(c, known, nbr);
      double mean = 0.0, var = 1.0;
      if (!nbr.empty()) {
        const auto m = static_cast<Eigen::Index>(nbr.size());
        Eigen::MatrixXd cnn(m, m);
        Eigen::VectorXd rhs(m), vals(m);
        const Location target = geometry_.cell_center(c);
        for (Eigen::Index i = 0; i < m; ++i) {
          const Location a = geometry_.cell_center(nbr[static_cast<std::size_t>(i)]);
          cnn(i, i) = 1.0 + 1e-8;
          for (Eigen::Index j = i + 1; j < m; ++j) {
            const Location b = geometry_.cell_center(nbr[static_cast<std::size_t>(j)]);
            const double cv = corr_.correlation({a.x - b.x, a.y - b.y, a.z - b.z});
            cnn(i, j) = cv;
            cnn(j, i) = cv;
          }
          rhs(i) = corr_.correlation({a.x - target.x, a.y - target.y, a.z - target.z});
          vals(i) = out[nbr[static_cast<std::size_t>(i)]];
        }
        const Eigen::VectorXd w = cnn.llt().solve(rhs);
        mean = w.dot(vals);
        var = std::clamp(1.0 - w.dot(rhs), 0.0, 1.0);
      }
      out[c] = mean + std::sqrt(var) * rng.normal();
      known[c] = 1;
    }
    return out;
  }

  // Nearest known cells by expanding index-space shells, ranked by the
  // correlation model's anisotropic metric.
  void gather_known_neighbors(std::size_t cell, const std::vector<char>& known,
                              std::vector<std::size_t>& out) const {
    out.clear();
    const auto c = geometry_.coords(cell);
    const auto cx = static_cast<std::ptrdiff_t>(c[0]);
    const auto cy = static_cast<std::ptrdiff_t>(c[1]);
    const auto cz = static_cast<std::ptrdiff_t>(c[2]);
    const std::ptrdiff_t max_r = static_cast<std::ptrdiff_t>(
        std::max({geometry_.nx(), geometry_.ny(), geometry_.nz()}));
    const Location target = geometry_.cell_center(cell);
    std::vector<std::pair<double, std::size_t>> ranked;
    std::ptrdiff_t settled_at = -1;
    for (std::ptrdiff_t r = 1; r <= max_r; ++r) {
      for (std::ptrdiff_t dz = -r; dz <= r; ++dz) {
        const std::ptrdiff_t z = cz + dz;
        if (z < 0 || z >= static_cast<std::ptrdiff_t>(geometry_.nz())) continue;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
          const std::ptrdiff_t y = cy + dy;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(geometry_.ny())) continue;
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            // shell only
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            const std::ptrdiff_t x = cx + dx;
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(geometry_.nx())) continue;
            const std::size_t idx = geometry_.index(static_cast<std::size_t>(x),
                                                    static_cast<std::size_t>(y),
                                                    static_cast<std::size_t>(z));
            if (!known[idx]) continue;
            const Location a = geometry_.cell_center(idx);
            ranked.emplace_back(detail::anisotropic_distance(corr_, a, target), idx);
          }
        }
      }
      if (ranked.size() >= sgs_neighbors_) {
        if (settled_at < 0) {
          settled_at = r;
        } else if (r > settled_at) {
          break;  // one extra shell after filling the cap
        }
      }
    }
    std::sort(ranked.begin(), ranked.end());
    const std::size_t take = std::min(sgs_neighbors_, ranked.size());
    for (std::size_t i = 0; i < take; ++i) out.push_back(ranked[i].second);
  }

  GridVolume geometry_;
  VariogramModel corr_;
  std::vector<std::size_t> data_cells_;
  bool dense_ = true;
  std::size_t sgs_neighbors_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd cond_weights_;
};

/// One conditioned field realization (convenience wrapper; reuse the
/// generator when drawing many).
inline GridVolume conditional_gaussian_field(const SamplingSpec& spec, const GridVolume& grid,
                                             const std::vector<Location>& data_locations,
                                             const std::vector<double>& data_values,
                                             std::uint64_t seed) {
  spec.validate();
  std::vector<std::size_t> cells;
  cells.reserve(data_locations.size());
  for (const auto& loc : data_locations) {
    const auto c = grid.locate(loc);
    if (!c) throw DataError("data location lies outside the simulation grid");
    cells.push_back(*c);
  }
  GaussianFieldGenerator gen(grid, spec.correlation, std::move(cells), spec.generator,
                             spec.sgs_neighbors, spec.dense_cell_cap);
  return gen.realize(seed, data_values);
}

/// Draw one value per cell from the envelope using the uniform transform of
/// the Gaussian field: Z = quantile(G(X)).
inline GridVolume sample_envelope(const Envelope& env, const GridVolume& field) {
  if (!field.same_geometry(env.geometry())) {
    throw DataError("field and envelope geometries differ");
  }
  GridVolume out = env.make_grid("realization");
  parallel_for(env.size(), [&](std::size_t c) {
    if (env.missing(c) || field.missing_at(c)) {
      out[c] = kMissing;
      return;
    }
    const double u = clamp_uniform(normal_cdf(field[c]));
    out[c] = env.cell_cdf(c).quantile(u);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Full conditional simulation.

struct SimulationResult {
  std::vector<GridVolume> realizations;
  std::vector<std::uint64_t> seeds;  // per-realization seeds, for the manifest
  // Pre-snap values at the data cells, per realization (diagnostics).
  std::vector<std::vector<double>> presnap;
  std::vector<std::string> warnings;
};

/// Per realization: truncated-Gibbs draw at the data, conditioned Gaussian
/// field, envelope sampling, then data cells snap to the observed values.
/// Deterministic per (seed, realization index).
inline SimulationResult simulate(const EmberModel& model, const Envelope& env,
                                 const SampleSet& samples, const SamplingSpec& spec) {
  (void)model;  // the envelope already carries the model's distributions
  spec.validate();
  if (samples.empty()) throw DataError("simulation needs at least one conditioning sample");

  SimulationResult result;
  ConditioningResult cond = conditioning_intervals(env, samples);
  result.warnings = std::move(cond.warnings);

  std::vector<std::size_t> data_cells;
  data_cells.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    data_cells.push_back(*env.geometry().locate(samples[i].loc));
  }

  const GibbsSampler gibbs(cond.intervals, samples.locations(), spec.correlation,
                           spec.gibbs_iterations);
  const GaussianFieldGenerator gen(env.geometry(), spec.correlation, data_cells, spec.generator,
                                   spec.sgs_neighbors, spec.dense_cell_cap);

  result.realizations.resize(spec.n_realizations);
  result.seeds.resize(spec.n_realizations);
  result.presnap.resize(spec.n_realizations);
  parallel_for(spec.n_realizations, [&](std::size_t r) {
    const std::uint64_t seed_r = derive_seed(spec.seed, r);
    const std::vector<double> x = gibbs.draw(derive_seed(seed_r, 1));
    const GridVolume field = gen.realize(derive_seed(seed_r, 2), x);
    GridVolume real = sample_envelope(env, field);
    auto& pre = result.presnap[r];
    pre.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      pre[i] = real[data_cells[i]];
      real[data_cells[i]] = samples[i].value;  // snap: simulations condition to the data
    }
    real.set_name("real_" + std::to_string(r));
    result.seeds[r] = seed_r;
    result.realizations[r] = std::move(real);
  });
  return result;
}

/// Cellwise mean over realizations, missing-aware.
inline GridVolume posterior_mean(const std::vector<GridVolume>& realizations) {
  if (realizations.empty()) throw DataError("posterior mean needs at least one realization");
  for (std::size_t r = 1; r < realizations.size(); ++r) {
    if (!realizations[r].same_geometry(realizations[0])) {
      throw DataError("realization " + std::to_string(r) + " has mismatched geometry");
    }
  }
  GridVolume out(realizations[0].nx(), realizations[0].ny(), realizations[0].nz(),
                 realizations[0].origin(), realizations[0].cell_size(), "posterior_mean");
  parallel_for(out.size(), [&](std::size_t c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& real : realizations) {
      if (!real.missing_at(c)) {
        sum += real[c];
        ++count;
      }
    }
    out[c] = count == 0 ? kMissing : sum / static_cast<double>(count);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Classic Gaussian baseline: kriging trend plus a stationary residual field
// conditioned at the data.

inline std::vector<GridVolume> gaussian_baseline_simulate(
    const SampleSet& samples, const KrigingSpec& trend_spec,
    const VariogramModel& residual_variogram, const GridVolume& grid, std::size_t n_real,
    std::uint64_t seed, FieldGenerator generator = FieldGenerator::automatic,
    std::size_t sgs_neighbors = 24, std::size_t dense_cell_cap = 20000) {
  if (n_real < 1) throw DataError("realization count must be >= 1");
  trend_spec.validate();

  GridVolume trend(grid.nx(), grid.ny(), grid.nz(), grid.origin(), grid.cell_size(), "trend");
  parallel_for(trend.size(), [&](std::size_t c) {
    trend[c] = krige(trend_spec, samples, trend.cell_center(c)).estimate;
  });

  const double sill = residual_variogram.total_sill();
  std::vector<GridVolume> out(n_real, trend);
  if (sill <= 0.0) {  // degenerate residual: every realization is the trend map
    for (std::size_t r = 0; r < n_real; ++r) {
      out[r].set_name("real_" + std::to_string(r));
    }
    return out;
  }
  const VariogramModel corr = residual_variogram.normalized();
  const double scale = std::sqrt(sill);

  std::vector<std::size_t> data_cells;
  std::vector<double> constraints;
  data_cells.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto c = grid.locate(samples[i].loc);
    if (!c) throw DataError("sample " + std::to_string(i) + " lies outside the grid");
    data_cells.push_back(*c);
    constraints.push_back((samples[i].value - trend[*c]) / scale);
  }

  const GaussianFieldGenerator gen(grid, corr, data_cells, generator, sgs_neighbors,
                                   dense_cell_cap);
  parallel_for(n_real, [&](std::size_t r) {
    const GridVolume field = gen.realize(derive_seed(seed, r), constraints);
    GridVolume& real = out[r];
    for (std::size_t c = 0; c < real.size(); ++c) {
      real[c] = trend[c] + scale * field[c];
    }
    real.set_name("real_" + std::to_string(r));
  });
  return out;
}

}  // namespace ember
