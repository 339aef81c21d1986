#pragma once

#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ember/data.hpp"

namespace ember {

enum class VariogramShape { spherical, exponential, gaussian };

inline std::string to_string(VariogramShape s) {
  switch (s) {
    case VariogramShape::spherical: return "spherical";
    case VariogramShape::exponential: return "exponential";
    case VariogramShape::gaussian: return "gaussian";
  }
  return "spherical";
}

inline VariogramShape variogram_shape_from_string(const std::string& s) {
  if (s == "spherical") return VariogramShape::spherical;
  if (s == "exponential") return VariogramShape::exponential;
  if (s == "gaussian") return VariogramShape::gaussian;
  throw DataError("unknown variogram shape '" + s + "'");
}

/// One structured component. Ranges are practical ranges (the factor-3
/// forms reach 95% of the sill there for exponential/gaussian; spherical
/// reaches the sill exactly). Angles are intrinsic ZXZ rotations in
/// degrees, applied to the lag before range scaling.
struct VariogramStructure {
  VariogramShape shape = VariogramShape::spherical;
  double sill = 1.0;
  std::array<double, 3> ranges{1.0, 1.0, 1.0};
  std::array<double, 3> angles{0.0, 0.0, 0.0};
};

namespace detail {

inline std::array<double, 3> rotate_zxz(const std::array<double, 3>& h,
                                        const std::array<double, 3>& angles_deg) {
  if (angles_deg[0] == 0.0 && angles_deg[1] == 0.0 && angles_deg[2] == 0.0) return h;
  constexpr double deg = M_PI / 180.0;
  const double c1 = std::cos(angles_deg[0] * deg), s1 = std::sin(angles_deg[0] * deg);
  const double c2 = std::cos(angles_deg[1] * deg), s2 = std::sin(angles_deg[1] * deg);
  const double c3 = std::cos(angles_deg[2] * deg), s3 = std::sin(angles_deg[2] * deg);
  // Rz(a1) * Rx(a2) * Rz(a3), applied to h.
  const std::array<double, 3> r0{c1 * c3 - s1 * c2 * s3, -c1 * s3 - s1 * c2 * c3, s1 * s2};
  const std::array<double, 3> r1{s1 * c3 + c1 * c2 * s3, -s1 * s3 + c1 * c2 * c3, -c1 * s2};
  const std::array<double, 3> r2{s2 * s3, s2 * c3, c2};
  return {r0[0] * h[0] + r0[1] * h[1] + r0[2] * h[2],
          r1[0] * h[0] + r1[1] * h[1] + r1[2] * h[2],
          r2[0] * h[0] + r2[1] * h[1] + r2[2] * h[2]};
}

inline double structure_gamma(const VariogramStructure& s, const std::array<double, 3>& h) {
  const auto hr = rotate_zxz(h, s.angles);
  const double ux = hr[0] / s.ranges[0];
  const double uy = hr[1] / s.ranges[1];
  const double uz = hr[2] / s.ranges[2];
  const double r = std::sqrt(ux * ux + uy * uy + uz * uz);
  switch (s.shape) {
    case VariogramShape::spherical:
      return r >= 1.0 ? s.sill : s.sill * (1.5 * r - 0.5 * r * r * r);
    case VariogramShape::exponential:
      return s.sill * (1.0 - std::exp(-3.0 * r));
    case VariogramShape::gaussian:
      return s.sill * (1.0 - std::exp(-3.0 * r * r));
  }
  return 0.0;
}

}  // namespace detail

/// Nugget plus structured components. gamma(0) = 0 by convention; the
/// nugget enters as the limit from above, so C(0) = total sill and kriging
/// stays exact at data points.
struct VariogramModel {
  double nugget = 0.0;
  std::vector<VariogramStructure> structures;

  double total_sill() const {
    double s = nugget;
    for (const auto& st : structures) s += st.sill;
    return s;
  }

  void validate() const {
    if (nugget < 0.0) throw DataError("variogram nugget must be nonnegative");
    for (const auto& st : structures) {
      if (st.sill <= 0.0) throw DataError("variogram structure sill must be positive");
      if (st.ranges[0] <= 0.0 || st.ranges[1] <= 0.0 || st.ranges[2] <= 0.0) {
        throw DataError("variogram ranges must be positive");
      }
    }
    if (total_sill() <= 0.0) throw DataError("variogram total sill must be positive");
  }

  double gamma(const std::array<double, 3>& h) const {
    if (h[0] == 0.0 && h[1] == 0.0 && h[2] == 0.0) return 0.0;
    double g = nugget;
    for (const auto& st : structures) g += detail::structure_gamma(st, h);
    return g;
  }

  double gamma(const Location& a, const Location& b) const {
    return gamma({a.x - b.x, a.y - b.y, a.z - b.z});
  }

  double covariance(const std::array<double, 3>& h) const { return total_sill() - gamma(h); }

  double covariance(const Location& a, const Location& b) const {
    return total_sill() - gamma(a, b);
  }

  double correlation(const std::array<double, 3>& h) const {
    return 1.0 - gamma(h) / total_sill();
  }

  /// Same shape with sills rescaled so the total sill is 1.
  VariogramModel normalized() const {
    VariogramModel out = *this;
    const double s = total_sill();
    if (s <= 0.0) throw DataError("cannot normalize a variogram with zero sill");
    out.nugget /= s;
    for (auto& st : out.structures) st.sill /= s;
    return out;
  }

  /// Copy with every range multiplied by `factor` (misspecification cases).
  VariogramModel with_scaled_ranges(double factor) const {
    VariogramModel out = *this;
    for (auto& st : out.structures) {
      for (auto& r : st.ranges) r *= factor;
    }
    return out;
  }
};

inline double model_gamma(const VariogramModel& model, const std::array<double, 3>& h) {
  return model.gamma(h);
}

// ---------------------------------------------------------------------------
// Experimental variograms.

struct VariogramBin {
  double lag = 0.0;       // bin center
  std::size_t count = 0;  // pair count N(h)
  double gamma = 0.0;     // Matheron semivariance; meaningful only when count > 0
};

struct ExperimentalVariogram {
  std::vector<VariogramBin> bins;
  std::array<double, 3> direction{1.0, 0.0, 0.0};
  double angle_tol_deg = 90.0;
  double lag_width = 1.0;
  std::vector<std::string> warnings;

  std::size_t occupied() const {
    std::size_t n = 0;
    for (const auto& b : bins) n += (b.count > 0) ? 1 : 0;
    return n;
  }
};

/// Matheron estimator with directional cones. Pairs land in the bin whose
/// center k*lag_width is nearest to their separation (half-open on the
/// upper edge); pairs closer than half a lag stay unbinned.
inline ExperimentalVariogram empirical_variogram(const SampleSet& samples,
                                                 std::array<double, 3> direction,
                                                 double angle_tol_deg, double lag_width,
                                                 std::size_t n_lags) {
  if (samples.size() < 2) throw DataError("empirical variogram needs at least 2 samples");
  if (lag_width <= 0.0) throw DataError("lag width must be positive");
  if (n_lags == 0) throw DataError("number of lags must be positive");
  const double norm = std::sqrt(direction[0] * direction[0] + direction[1] * direction[1] +
                                direction[2] * direction[2]);
  if (norm <= 0.0) throw DataError("direction must be a nonzero vector");
  for (auto& d : direction) d /= norm;

  ExperimentalVariogram out;
  out.direction = direction;
  out.angle_tol_deg = angle_tol_deg;
  out.lag_width = lag_width;
  out.bins.resize(n_lags);
  for (std::size_t k = 0; k < n_lags; ++k) {
    out.bins[k].lag = static_cast<double>(k + 1) * lag_width;
  }
  std::vector<double> sq_sum(n_lags, 0.0);

  const double cos_tol = std::cos(angle_tol_deg * M_PI / 180.0);
  std::size_t in_cone = 0;
  const auto& recs = samples.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    for (std::size_t j = i + 1; j < recs.size(); ++j) {
      const double hx = recs[j].loc.x - recs[i].loc.x;
      const double hy = recs[j].loc.y - recs[i].loc.y;
      const double hz = recs[j].loc.z - recs[i].loc.z;
      const double d = std::sqrt(hx * hx + hy * hy + hz * hz);
      if (d <= 0.0) continue;
      const double cosang =
          std::abs(hx * direction[0] + hy * direction[1] + hz * direction[2]) / d;
      if (cosang < cos_tol) continue;
      ++in_cone;
      const auto k = static_cast<std::ptrdiff_t>(std::floor(d / lag_width + 0.5));
      if (k < 1 || k > static_cast<std::ptrdiff_t>(n_lags)) continue;
      const double dv = recs[j].value - recs[i].value;
      sq_sum[k - 1] += dv * dv;
      out.bins[k - 1].count += 1;
    }
  }
  for (std::size_t k = 0; k < n_lags; ++k) {
    if (out.bins[k].count > 0) {
      out.bins[k].gamma = sq_sum[k] / (2.0 * static_cast<double>(out.bins[k].count));
    }
  }
  if (in_cone == 0) {
    out.warnings.push_back("all sample pairs fell outside the direction cone");
  }
  return out;
}

inline void write_experimental_csv(const ExperimentalVariogram& exp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write variogram CSV '" + path + "'");
  out << "lag,count,gamma\n";
  char buf[96];
  for (const auto& b : exp.bins) {
    std::snprintf(buf, sizeof(buf), "%.10g,%zu,%.10g\n", b.lag, b.count, b.gamma);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Weighted least-squares model fitting.

struct VariogramFit {
  VariogramModel model;
  double objective = 0.0;
  bool converged = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline double fit_objective(const VariogramModel& model,
                            const std::vector<ExperimentalVariogram>& exps) {
  double obj = 0.0;
  for (const auto& exp : exps) {
    for (const auto& bin : exp.bins) {
      if (bin.count == 0) continue;
      const std::array<double, 3> h{exp.direction[0] * bin.lag, exp.direction[1] * bin.lag,
                                    exp.direction[2] * bin.lag};
      const double diff = bin.gamma - model.gamma(h);
      obj += static_cast<double>(bin.count) * diff * diff;
    }
  }
  return obj;
}

}  // namespace detail

/// Fit nugget + a single structure of the given shape by N(h)-weighted least
/// squares, starting from `init`. Coordinate descent over {nugget, sill,
/// ranges} with multiplicative bracketing; rotation angles stay at their
/// initial values. The model is evaluated along each input's direction
/// vector, so anisotropy is only identified when several directional
/// variograms are supplied.
inline VariogramFit fit_variogram(const std::vector<ExperimentalVariogram>& exps,
                                  VariogramShape shape, const VariogramModel& init) {
  std::size_t occupied = 0;
  for (const auto& e : exps) occupied += e.occupied();
  if (occupied < 3) {
    throw DataError("variogram fit needs at least 3 occupied bins, found " +
                    std::to_string(occupied));
  }
  VariogramModel model = init;
  if (model.structures.empty()) {
    model.structures.push_back(VariogramStructure{});
  }
  model.structures.resize(1);
  model.structures[0].shape = shape;
  model.validate();

  constexpr int kMaxSweeps = 500;
  constexpr double kRelTol = 1e-6;

  // Parameter accessors: nugget, sill, and the three ranges.
  const auto get = [&](int p) -> double {
    switch (p) {
      case 0: return model.nugget;
      case 1: return model.structures[0].sill;
      default: return model.structures[0].ranges[p - 2];
    }
  };
  const auto set = [&](int p, double v) {
    switch (p) {
      case 0: model.nugget = std::max(0.0, v); break;
      case 1: model.structures[0].sill = std::max(1e-12, v); break;
      default: model.structures[0].ranges[p - 2] = std::max(1e-12, v); break;
    }
  };

  double best = detail::fit_objective(model, exps);
  const double initial = best;
  double step = 2.0;
  bool converged = false;
  int sweeps = 0;
  const double sill_scale = std::max(model.total_sill(), 1e-12);
  while (sweeps < kMaxSweeps) {
    ++sweeps;
    bool improved = false;
    for (int p = 0; p < 5; ++p) {
      for (int inner = 0; inner < 100; ++inner) {
        const double v = get(p);
        double candidate_val = v;
        double candidate_obj = best;
        const double probes[4] = {v * step, v / step,
                                  // zero-valued parameters cannot move multiplicatively
                                  v == 0.0 ? 1e-3 * sill_scale * step : v,
                                  p == 0 ? 0.0 : v};
        for (double pv : probes) {
          if (pv == v) continue;
          set(p, pv);
          const double obj = detail::fit_objective(model, exps);
          if (obj < candidate_obj) {
            candidate_obj = obj;
            candidate_val = get(p);
          }
        }
        set(p, candidate_val);
        if (candidate_obj < best * (1.0 - kRelTol)) {
          best = candidate_obj;
          improved = true;
        } else {
          best = std::min(best, candidate_obj);
          break;
        }
      }
    }
    if (!improved) {
      if (step - 1.0 < 1e-6) {
        converged = true;
        break;
      }
      step = std::sqrt(step);
    }
  }

  VariogramFit out;
  out.model = model;
  out.objective = best;
  out.converged = converged;
  if (!converged) {
    out.warnings.push_back("fit_variogram stopped at iteration cap; returning best so far");
  }
  if (best > initial) {
    // Cannot happen: every accepted move decreases the objective.
    out.warnings.push_back("objective exceeded initial value");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structured key-value text serialization.

inline std::string format_variogram_model(const VariogramModel& model) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "nugget %.10g\n", model.nugget);
  out << buf;
  for (const auto& st : model.structures) {
    out << "[structure]\n";
    out << "shape " << to_string(st.shape) << "\n";
    std::snprintf(buf, sizeof(buf), "sill %.10g\n", st.sill);
    out << buf;
    std::snprintf(buf, sizeof(buf), "ranges %.10g %.10g %.10g\n", st.ranges[0], st.ranges[1],
                  st.ranges[2]);
    out << buf;
    std::snprintf(buf, sizeof(buf), "angles %.10g %.10g %.10g\n", st.angles[0], st.angles[1],
                  st.angles[2]);
    out << buf;
  }
  return out.str();
}

inline VariogramModel parse_variogram_model(const std::string& text) {
  VariogramModel model;
  VariogramStructure* current = nullptr;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = line;
    const auto hash = t.find('#');
    if (hash != std::string::npos) t = t.substr(0, hash);
    std::istringstream ls(t);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "[structure]") {
      model.structures.push_back(VariogramStructure{});
      current = &model.structures.back();
      continue;
    }
    const auto fail = [&](const std::string& why) {
      throw DataError("variogram model line " + std::to_string(line_no) + ": " + why);
    };
    if (key == "nugget") {
      if (!(ls >> model.nugget)) fail("expected a number after 'nugget'");
    } else if (key == "shape") {
      if (!current) fail("'shape' before any [structure]");
      std::string s;
      ls >> s;
      current->shape = variogram_shape_from_string(s);
    } else if (key == "sill") {
      if (!current) fail("'sill' before any [structure]");
      if (!(ls >> current->sill)) fail("expected a number after 'sill'");
    } else if (key == "ranges") {
      if (!current) fail("'ranges' before any [structure]");
      if (!(ls >> current->ranges[0] >> current->ranges[1] >> current->ranges[2])) {
        fail("expected three numbers after 'ranges'");
      }
    } else if (key == "angles") {
      if (!current) fail("'angles' before any [structure]");
      if (!(ls >> current->angles[0] >> current->angles[1] >> current->angles[2])) {
        fail("expected three numbers after 'angles'");
      }
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  model.validate();
  return model;
}

inline void save_variogram_model(const VariogramModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write variogram model '" + path + "'");
  out << format_variogram_model(model);
}

inline VariogramModel load_variogram_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open variogram model '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_variogram_model(buffer.str());
  } catch (const DataError& err) {
    throw DataError(std::string(err.what()) + " in '" + path + "'");
  }
}

}  // namespace ember
