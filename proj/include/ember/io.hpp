#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ember/data.hpp"

namespace ember {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& token, const std::string& context) {
  const std::string t = trim(token);
  double v = 0.0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  const auto result = std::from_chars(begin, end, v);
  if (result.ec != std::errc{} || result.ptr != end || t.empty()) {
    throw DataError("expected a number but found '" + token + "' (" + context + ")");
  }
  return v;
}

}  // namespace detail

/// Read hard data from CSV with header exactly `x,y,z,value,well`.
inline SampleSet load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sample file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("sample file '" + path + "' is empty");
  if (detail::trim(line) != "x,y,z,value,well") {
    throw DataError("sample file '" + path + "': header must be 'x,y,z,value,well'");
  }
  SampleSet out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 5) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 5 fields, found " +
                      std::to_string(fields.size()));
    }
    const std::string context = path + ":" + std::to_string(line_no);
    Sample s;
    s.loc.x = detail::parse_double(fields[0], context);
    s.loc.y = detail::parse_double(fields[1], context);
    s.loc.z = detail::parse_double(fields[2], context);
    s.value = detail::parse_double(fields[3], context);
    s.well = detail::trim(fields[4]);
    try {
      out.add(std::move(s));
    } catch (const DataError& err) {
      throw DataError(std::string(err.what()) + " at row " + std::to_string(line_no) +
                      " of '" + path + "'");
    }
  }
  if (out.empty()) throw DataError("sample file '" + path + "' has no data rows");
  return out;
}

inline void write_samples(const SampleSet& samples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write sample file '" + path + "'");
  out << "x,y,z,value,well\n";
  char buf[256];
  for (const auto& s : samples.records()) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%s\n", s.loc.x, s.loc.y,
                  s.loc.z, s.value, s.well.c_str());
    out << buf;
  }
}

/// Read a GSLIB-style ASCII grid:
///   line 1: title
///   line 2: nx ny nz x0 y0 z0 dx dy dz
///   line 3: variable count (must be 1) and variable name
///   then nx*ny*nz values, x-fastest. -999.0 marks missing cells.
inline GridVolume load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open grid file '" + path + "'");
  std::string title, geom_line, var_line;
  if (!std::getline(in, title) || !std::getline(in, geom_line) || !std::getline(in, var_line)) {
    throw DataError("grid file '" + path + "' is truncated before the value block");
  }
  std::istringstream geom(geom_line);
  long nx = 0, ny = 0, nz = 0;
  double x0 = 0, y0 = 0, z0 = 0, dx = 0, dy = 0, dz = 0;
  if (!(geom >> nx >> ny >> nz >> x0 >> y0 >> z0 >> dx >> dy >> dz)) {
    throw DataError("grid file '" + path + "': geometry line must be 'nx ny nz x0 y0 z0 dx dy dz'");
  }
  if (nx <= 0 || ny <= 0 || nz <= 0) {
    throw DataError("grid file '" + path + "': dimensions must be positive");
  }
  if (dx <= 0 || dy <= 0 || dz <= 0) {
    throw DataError("grid file '" + path + "': cell sizes must be positive");
  }
  std::istringstream vars(var_line);
  int nvar = 0;
  std::string name;
  if (!(vars >> nvar) || nvar != 1) {
    throw DataError("grid file '" + path + "': variable count must be 1");
  }
  if (!(vars >> name)) name = "var";

  GridVolume grid(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
                  static_cast<std::size_t>(nz), {x0, y0, z0}, {dx, dy, dz}, name);
  const std::size_t expected = grid.size();
  std::size_t count = 0;
  double v = 0.0;
  while (in >> v) {
    if (count >= expected) {
      throw DataError("grid file '" + path + "': more than " + std::to_string(expected) +
                      " values");
    }
    grid[count++] = v;
  }
  if (count != expected) {
    throw DataError("grid file '" + path + "': expected " + std::to_string(expected) +
                    " values, found " + std::to_string(count));
  }
  return grid;
}

inline void write_grid(const GridVolume& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write grid file '" + path + "'");
  char buf[128];
  out << grid.name() << "\n";
  std::snprintf(buf, sizeof(buf), "%zu %zu %zu %.10g %.10g %.10g %.10g %.10g %.10g\n",
                grid.nx(), grid.ny(), grid.nz(), grid.origin()[0], grid.origin()[1],
                grid.origin()[2], grid.cell_size()[0], grid.cell_size()[1],
                grid.cell_size()[2]);
  out << buf;
  out << "1 " << grid.name() << "\n";
  for (double v : grid.values()) {
    std::snprintf(buf, sizeof(buf), "%.10g\n", v);
    out << buf;
  }
}

}  // namespace ember
