#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ember/data.hpp"

namespace ember {

inline constexpr int kChannelZone = 0;
inline constexpr int kShorefaceZone = 1;

/// Desk-scale synthetic reservoir: alternating channel and shoreface
/// layers, one informative and one uninformative synthetic secondary, and
/// wells sampling the truth along vertical columns.
struct TestbedSpec {
  std::size_t nx = 32, ny = 32, nz = 4;
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::array<double, 3> cell{10.0, 10.0, 2.0};
  std::vector<int> zone_kinds;  // per layer; empty alternates starting with channel

  std::size_t channel_belts = 2;
  double channel_net_to_gross = 0.30;
  double channel_poro_in = 0.25;
  double channel_poro_out = 0.08;
  double channel_noise = 0.015;

  std::array<double, 2> shoreface_trend_dir{-1.0, -1.0};  // progrades to the south west
  double shoreface_base = 0.10;
  double shoreface_amplitude = 0.08;
  double shoreface_noise = 0.01;

  double seismic_noise = 0.5;
  bool seismic_resolves_channel = true;  // informative in channel zones only

  std::size_t wells = 8;
  std::uint64_t well_seed = 0;  // 0 derives from the main seed

  void validate() const {
    if (nx == 0 || ny == 0 || nz == 0) throw DataError("testbed dimensions must be positive");
    if (cell[0] <= 0 || cell[1] <= 0 || cell[2] <= 0) {
      throw DataError("testbed cell sizes must be positive");
    }
    const auto poro_ok = [](double p) { return p >= 0.0 && p <= 0.35; };
    if (!poro_ok(channel_poro_in) || !poro_ok(channel_poro_out) || !poro_ok(shoreface_base) ||
        !poro_ok(shoreface_base + shoreface_amplitude)) {
      throw DataError("porosity levels must lie within [0, 0.35]");
    }
    if (channel_belts == 0) throw DataError("testbed needs at least one channel belt");
    if (!(channel_net_to_gross > 0.0 && channel_net_to_gross < 1.0)) {
      throw DataError("net-to-gross must lie in (0,1)");
    }
    if (wells == 0) throw DataError("testbed needs at least one well");
    if (wells > nx * ny) throw DataError("more wells than grid columns");
    const auto kinds = layer_kinds();
    bool has_channel = false, has_shoreface = false;
    for (int k : kinds) {
      has_channel = has_channel || k == kChannelZone;
      has_shoreface = has_shoreface || k == kShorefaceZone;
    }
    if (!has_channel || !has_shoreface) {
      throw DataError("zone layout needs at least one channel and one shoreface layer");
    }
  }

  std::vector<int> layer_kinds() const {
    if (!zone_kinds.empty()) {
      if (zone_kinds.size() != nz) throw DataError("zone_kinds must list one kind per layer");
      return zone_kinds;
    }
    std::vector<int> kinds(nz);
    for (std::size_t iz = 0; iz < nz; ++iz) {
      kinds[iz] = (iz % 2 == 0) ? kChannelZone : kShorefaceZone;
    }
    return kinds;
  }
};

struct Testbed {
  GridVolume truth;
  GridVolume zones;              // zone kind per cell (partition of the grid)
  GridVolume channel_indicator;  // 1 inside a channel belt, 0 elsewhere
  GridVolume seismic;            // informative synthetic secondary
  GridVolume noise;              // uninformative synthetic secondary
  SampleSet wells;
  std::vector<std::size_t> well_cells;
  std::vector<std::pair<std::size_t, std::size_t>> well_columns;  // (ix, iy)

  std::vector<GridVolume> secondary() const { return {seismic, noise}; }
};

inline Testbed generate_testbed(const TestbedSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto kinds = spec.layer_kinds();

  Testbed tb;
  const auto make = [&](const std::string& name) {
    return GridVolume(spec.nx, spec.ny, spec.nz, spec.origin, spec.cell, name, 0.0);
  };
  tb.truth = make("porosity");
  tb.zones = make("zone");
  tb.channel_indicator = make("channel_indicator");
  tb.seismic = make("seismic");
  tb.noise = make("noise");

  const double len_x = static_cast<double>(spec.nx) * spec.cell[0];
  const double len_y = static_cast<double>(spec.ny) * spec.cell[1];
  Rng rng(derive_seed(seed, 0x7e57bed));

  // Truth, zone labels and belt indicator, layer by layer.
  for (std::size_t iz = 0; iz < spec.nz; ++iz) {
    const int kind = kinds[iz];
    if (kind == kChannelZone) {
      struct Belt {
        double offset, amp, cycles, phase, half_width;
      };
      std::vector<Belt> belts(spec.channel_belts);
      const double width =
          spec.channel_net_to_gross * len_y / static_cast<double>(spec.channel_belts);
      for (std::size_t b = 0; b < belts.size(); ++b) {
        belts[b].offset = len_y * (static_cast<double>(b) + 0.5) /
                              static_cast<double>(spec.channel_belts) +
                          rng.uniform(-0.08, 0.08) * len_y;
        belts[b].amp = rng.uniform(0.08, 0.18) * len_y;
        belts[b].cycles = rng.uniform(1.0, 2.0);
        belts[b].phase = rng.uniform(0.0, 2.0 * M_PI);
        belts[b].half_width = 0.5 * width;
      }
      for (std::size_t iy = 0; iy < spec.ny; ++iy) {
        for (std::size_t ix = 0; ix < spec.nx; ++ix) {
          const std::size_t c = tb.truth.index(ix, iy, iz);
          const double xc = (static_cast<double>(ix) + 0.5) * spec.cell[0];
          const double yc = (static_cast<double>(iy) + 0.5) * spec.cell[1];
          bool inside = false;
          for (const auto& belt : belts) {
            const double center =
                belt.offset + belt.amp * std::sin(2.0 * M_PI * belt.cycles * xc / len_x +
                                                  belt.phase);
            if (std::abs(yc - center) <= belt.half_width) {
              inside = true;
              break;
            }
          }
          const double level = inside ? spec.channel_poro_in : spec.channel_poro_out;
          tb.truth[c] = std::clamp(level + spec.channel_noise * rng.normal(), 0.0, 0.35);
          tb.zones[c] = kChannelZone;
          tb.channel_indicator[c] = inside ? 1.0 : 0.0;
        }
      }
    } else {
      const double dir_norm = std::hypot(spec.shoreface_trend_dir[0], spec.shoreface_trend_dir[1]);
      const double ux = spec.shoreface_trend_dir[0] / dir_norm;
      const double uy = spec.shoreface_trend_dir[1] / dir_norm;
      // Projection range over the four plan-view corners.
      double pmin = 0.0, pmax = 0.0;
      bool first = true;
      for (const double cx : {0.0, len_x}) {
        for (const double cy : {0.0, len_y}) {
          const double p = ux * cx + uy * cy;
          pmin = first ? p : std::min(pmin, p);
          pmax = first ? p : std::max(pmax, p);
          first = false;
        }
      }
      for (std::size_t iy = 0; iy < spec.ny; ++iy) {
        for (std::size_t ix = 0; ix < spec.nx; ++ix) {
          const std::size_t c = tb.truth.index(ix, iy, iz);
          const double xc = (static_cast<double>(ix) + 0.5) * spec.cell[0];
          const double yc = (static_cast<double>(iy) + 0.5) * spec.cell[1];
          const double t = (ux * xc + uy * yc - pmin) / (pmax - pmin);
          tb.truth[c] = std::clamp(
              spec.shoreface_base + spec.shoreface_amplitude * t +
                  spec.shoreface_noise * rng.normal(),
              0.0, 0.35);
          tb.zones[c] = kShorefaceZone;
          tb.channel_indicator[c] = 0.0;
        }
      }
    }
  }

  // Secondaries: the synthetic seismic resolves channel belts (noisy
  // indicator) only inside channel zones; the other grid is pure noise.
  for (std::size_t c = 0; c < tb.truth.size(); ++c) {
    const bool resolved = spec.seismic_resolves_channel && tb.zones[c] == kChannelZone;
    tb.seismic[c] = (resolved ? tb.channel_indicator[c] : 0.0) + spec.seismic_noise * rng.normal();
  }
  for (std::size_t c = 0; c < tb.noise.size(); ++c) tb.noise[c] = rng.normal();

  // Wells: stratified column placement, truth sampled exactly at cell
  // centers down each column.
  Rng wrng(spec.well_seed != 0 ? spec.well_seed : derive_seed(seed, 0x3e115));
  const auto nb = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(spec.wells))));
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  for (std::size_t by = 0; by < nb; ++by) {
    for (std::size_t bx = 0; bx < nb; ++bx) blocks.emplace_back(bx, by);
  }
  for (std::size_t i = blocks.size(); i > 1; --i) {
    std::swap(blocks[i - 1], blocks[wrng.uniform_index(i)]);
  }
  std::size_t placed = 0;
  for (const auto& [bx, by] : blocks) {
    if (placed == spec.wells) break;
    const std::size_t x0 = bx * spec.nx / nb, x1 = (bx + 1) * spec.nx / nb;
    const std::size_t y0 = by * spec.ny / nb, y1 = (by + 1) * spec.ny / nb;
    if (x1 <= x0 || y1 <= y0) continue;
    const std::size_t ix = x0 + wrng.uniform_index(x1 - x0);
    const std::size_t iy = y0 + wrng.uniform_index(y1 - y0);
    bool taken = false;
    for (const auto& col : tb.well_columns) {
      taken = taken || (col.first == ix && col.second == iy);
    }
    if (taken) continue;
    tb.well_columns.emplace_back(ix, iy);
    ++placed;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "W%02zu", placed);
    for (std::size_t iz = 0; iz < spec.nz; ++iz) {
      const std::size_t c = tb.truth.index(ix, iy, iz);
      Sample s;
      s.loc = tb.truth.cell_center(c);
      s.value = tb.truth[c];
      s.well = idbuf;
      tb.wells.add(std::move(s));
      tb.well_cells.push_back(c);
    }
  }
  if (placed < spec.wells) {
    // Stratification ran out of free blocks; fall back to uniform draws.
    while (placed < spec.wells) {
      const std::size_t ix = wrng.uniform_index(spec.nx);
      const std::size_t iy = wrng.uniform_index(spec.ny);
      bool taken = false;
      for (const auto& col : tb.well_columns) {
        taken = taken || (col.first == ix && col.second == iy);
      }
      if (taken) continue;
      tb.well_columns.emplace_back(ix, iy);
      ++placed;
      char idbuf[16];
      std::snprintf(idbuf, sizeof(idbuf), "W%02zu", placed);
      for (std::size_t iz = 0; iz < spec.nz; ++iz) {
        const std::size_t c = tb.truth.index(ix, iy, iz);
        Sample s;
        s.loc = tb.truth.cell_center(c);
        s.value = tb.truth[c];
        s.well = idbuf;
        tb.wells.add(std::move(s));
        tb.well_cells.push_back(c);
      }
    }
  }
  return tb;
}

}  // namespace ember
