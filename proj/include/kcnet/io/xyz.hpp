#pragma once

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kcnet/cloud.hpp"
#include "kcnet/error.hpp"

namespace kcnet::io {

/// Reads one point per line; '#' lines and blank lines are skipped. The dimension is taken
/// from the first point unless `expected_dim` is given.
inline PointCloud read_xyz(std::istream& in, int expected_dim = 0) {
  std::vector<double> coords;
  int dim = expected_dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> row;
    double v = 0.0;
    while (fields >> v) row.push_back(v);
    if (!fields.eof()) throw FormatError("xyz line " + std::to_string(line_no) + ": unparsable value");
    if (dim == 0) dim = static_cast<int>(row.size());
    if (dim != 2 && dim != 3) throw FormatError("xyz line " + std::to_string(line_no) + ": expected 2 or 3 values");
    if (static_cast<int>(row.size()) != dim)
      throw FormatError("xyz line " + std::to_string(line_no) + ": expected " + std::to_string(dim) + " values, got " +
                        std::to_string(row.size()));
    coords.insert(coords.end(), row.begin(), row.end());
  }
  if (coords.empty()) throw FormatError("xyz: no points");
  PointCloud cloud;
  cloud.points = Eigen::Map<const PointMatrix>(coords.data(), static_cast<Eigen::Index>(coords.size()) / dim, dim);
  validate(cloud);
  return cloud;
}

inline PointCloud read_xyz(const std::string& path, int expected_dim = 0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return read_xyz(in, expected_dim);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

/// 17 significant digits, so a read of the output restores every coordinate exactly.
inline void write_xyz(std::ostream& out, const PointCloud& cloud) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (int d = 0; d < cloud.dim(); ++d) out << (d ? " " : "") << cloud.points(i, d);
    out << '\n';
  }
  out.precision(old);
}

inline void write_xyz(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_xyz(out, cloud);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace kcnet::io
