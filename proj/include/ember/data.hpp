#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ember/common.hpp"

namespace ember {

struct Location {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::optional<std::size_t> cell;  // index into a grid, when known

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline double distance(const Location& a, const Location& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline bool same_position(const Location& a, const Location& b) {
  return a.x == b.x && a.y == b.y && a.z == b.z;
}

struct Sample {
  Location loc;
  double value = 0.0;
  std::string well;
};

/// Hard data: one record per observed location. Construction rejects
/// duplicate locations and non-finite values, so downstream code can rely
/// on pairwise-distinct positions.
class SampleSet {
 public:
  SampleSet() = default;

  explicit SampleSet(std::vector<Sample> samples) {
    for (auto& s : samples) add(std::move(s));
  }

  void add(Sample s) {
    if (!s.loc.finite() || !std::isfinite(s.value)) {
      throw DataError("sample has non-finite coordinate or value (well '" + s.well + "')");
    }
    for (const auto& existing : samples_) {
      if (same_position(existing.loc, s.loc)) {
        throw DataError("duplicate sample location (" + std::to_string(s.loc.x) + ", " +
                        std::to_string(s.loc.y) + ", " + std::to_string(s.loc.z) + ")");
      }
    }
    samples_.push_back(std::move(s));
  }

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& records() const { return samples_; }

  std::vector<Location> locations() const {
    std::vector<Location> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.loc);
    return out;
  }

  std::vector<double> values() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.value);
    return out;
  }

  /// Copy without record i (used by leave-one-out cross validation).
  SampleSet without(std::size_t i) const {
    SampleSet out;
    out.samples_.reserve(samples_.size() - 1);
    for (std::size_t j = 0; j < samples_.size(); ++j) {
      if (j != i) out.samples_.push_back(samples_[j]);
    }
    return out;
  }

  /// Subset by record indices (assumed valid and duplicate-free).
  SampleSet subset(const std::vector<std::size_t>& indices) const {
    SampleSet out;
    out.samples_.reserve(indices.size());
    for (std::size_t i : indices) out.samples_.push_back(samples_[i]);
    return out;
  }

 private:
  std::vector<Sample> samples_;
};

/// Regular 3D lattice, one scalar per cell, iterated x-fastest then y then z.
/// Origin is the min corner of the volume; cell centers sit at
/// origin + (i + 0.5) * cell_size.
class GridVolume {
 public:
  GridVolume() = default;

  GridVolume(std::size_t nx, std::size_t ny, std::size_t nz,
             std::array<double, 3> origin, std::array<double, 3> cell_size,
             std::string name = "var", double fill = kMissing)
      : nx_(nx), ny_(ny), nz_(nz), origin_(origin), cell_(cell_size),
        name_(std::move(name)), values_(nx * ny * nz, fill) {
    if (nx_ == 0 || ny_ == 0 || nz_ == 0) {
      throw DataError("grid dimensions must be positive");
    }
    if (cell_[0] <= 0.0 || cell_[1] <= 0.0 || cell_[2] <= 0.0) {
      throw DataError("grid cell sizes must be strictly positive");
    }
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t nz() const { return nz_; }
  std::size_t size() const { return values_.size(); }
  const std::array<double, 3>& origin() const { return origin_; }
  const std::array<double, 3>& cell_size() const { return cell_; }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return ix + nx_ * (iy + ny_ * iz);
  }

  std::array<std::size_t, 3> coords(std::size_t idx) const {
    const std::size_t ix = idx % nx_;
    const std::size_t iy = (idx / nx_) % ny_;
    const std::size_t iz = idx / (nx_ * ny_);
    return {ix, iy, iz};
  }

  double& at(std::size_t ix, std::size_t iy, std::size_t iz) { return values_[index(ix, iy, iz)]; }
  double at(std::size_t ix, std::size_t iy, std::size_t iz) const { return values_[index(ix, iy, iz)]; }
  double& operator[](std::size_t idx) { return values_[idx]; }
  double operator[](std::size_t idx) const { return values_[idx]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  Location cell_center(std::size_t idx) const {
    const auto c = coords(idx);
    Location loc;
    loc.x = origin_[0] + (static_cast<double>(c[0]) + 0.5) * cell_[0];
    loc.y = origin_[1] + (static_cast<double>(c[1]) + 0.5) * cell_[1];
    loc.z = origin_[2] + (static_cast<double>(c[2]) + 0.5) * cell_[2];
    loc.cell = idx;
    return loc;
  }

  /// Cell containing (x,y,z); points on the upper boundary snap inward.
  std::optional<std::size_t> locate(double x, double y, double z) const {
    const auto axis = [](double v, double o, double d, std::size_t n) -> std::ptrdiff_t {
      double t = (v - o) / d;
      auto i = static_cast<std::ptrdiff_t>(std::floor(t));
      if (i == static_cast<std::ptrdiff_t>(n) && t <= static_cast<double>(n) + 1e-9) i = n - 1;
      return i;
    };
    const std::ptrdiff_t ix = axis(x, origin_[0], cell_[0], nx_);
    const std::ptrdiff_t iy = axis(y, origin_[1], cell_[1], ny_);
    const std::ptrdiff_t iz = axis(z, origin_[2], cell_[2], nz_);
    if (ix < 0 || iy < 0 || iz < 0 || ix >= static_cast<std::ptrdiff_t>(nx_) ||
        iy >= static_cast<std::ptrdiff_t>(ny_) || iz >= static_cast<std::ptrdiff_t>(nz_)) {
      return std::nullopt;
    }
    return index(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy),
                 static_cast<std::size_t>(iz));
  }

  std::optional<std::size_t> locate(const Location& loc) const {
    return locate(loc.x, loc.y, loc.z);
  }

  bool missing_at(std::size_t idx) const { return is_missing(values_[idx]); }

  bool same_geometry(const GridVolume& other) const {
    return nx_ == other.nx_ && ny_ == other.ny_ && nz_ == other.nz_ &&
           origin_ == other.origin_ && cell_ == other.cell_;
  }

 private:
  std::size_t nx_ = 0, ny_ = 0, nz_ = 0;
  std::array<double, 3> origin_{0, 0, 0};
  std::array<double, 3> cell_{1, 1, 1};
  std::string name_ = "var";
  std::vector<double> values_;
};

/// Rectangular feature table, row-major; one row per sample or target cell.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  FeatureMatrix(std::vector<std::string> column_names, std::size_t rows)
      : names_(std::move(column_names)), cols_(names_.size()),
        data_(rows * names_.size(), 0.0) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      for (std::size_t j = i + 1; j < names_.size(); ++j) {
        if (names_[i] == names_[j]) {
          throw DataError("feature column name '" + names_[i] + "' is not unique");
        }
      }
    }
  }

  std::size_t rows() const { return cols_ == 0 ? 0 : data_.size() / cols_; }
  std::size_t cols() const { return cols_; }
  const std::vector<std::string>& names() const { return names_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> row_copy(std::size_t r) const {
    return {data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_)};
  }

 private:
  std::vector<std::string> names_;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Build the feature table for a list of locations from gridded secondaries.
/// Columns follow the grid order, then x,y,z when include_coords is set.
/// When grids are involved, coordinates are snapped to the containing cell
/// center so training rows and target-cell rows live on the same lattice.
inline FeatureMatrix assemble_features(const std::vector<Location>& locations,
                                       const std::vector<GridVolume>& secondary,
                                       bool include_coords) {
  std::vector<std::string> names;
  names.reserve(secondary.size() + 3);
  for (const auto& g : secondary) names.push_back(g.name());
  if (include_coords) {
    names.push_back("x");
    names.push_back("y");
    names.push_back("z");
  }
  FeatureMatrix out(names, locations.size());
  for (std::size_t r = 0; r < locations.size(); ++r) {
    const Location& loc = locations[r];
    Location coord = loc;
    for (std::size_t c = 0; c < secondary.size(); ++c) {
      const auto idx = secondary[c].locate(loc);
      if (!idx) {
        throw DataError("location (" + std::to_string(loc.x) + ", " + std::to_string(loc.y) +
                        ", " + std::to_string(loc.z) + ") is outside grid '" +
                        secondary[c].name() + "'");
      }
      if (secondary[c].missing_at(*idx)) {
        throw DataError("grid '" + secondary[c].name() + "' has a missing value at cell " +
                        std::to_string(*idx));
      }
      out(r, c) = secondary[c][*idx];
      if (c == 0) coord = secondary[c].cell_center(*idx);
    }
    if (include_coords) {
      const std::size_t base = secondary.size();
      out(r, base + 0) = coord.x;
      out(r, base + 1) = coord.y;
      out(r, base + 2) = coord.z;
    }
  }
  return out;
}

}  // namespace ember
