#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kcnet/cloud.hpp"
#include "kcnet/error.hpp"

namespace kcnet::io {

using Rgb = std::array<std::uint8_t, 3>;

/// Min-max normalized per object: weakest white (255,255,255), strongest red (255,0,0).
/// Constant responses are all white.
inline std::vector<Rgb> response_colors(std::span<const double> responses) {
  std::vector<Rgb> colors(responses.size(), Rgb{255, 255, 255});
  if (responses.empty()) return colors;
  const auto [lo, hi] = std::minmax_element(responses.begin(), responses.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return colors;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const double t = std::clamp((responses[i] - *lo) / range, 0.0, 1.0);
    const auto fade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
    colors[i] = Rgb{255, fade, fade};
  }
  return colors;
}

/// ASCII PLY, one vertex per point with x y z and an RGB color. 2-D clouds get z = 0.
inline void write_ply_response(std::ostream& out, const PointCloud& cloud, std::span<const double> responses) {
  if (static_cast<Eigen::Index>(responses.size()) != cloud.size())
    throw InvalidInput("write_ply_response: need one response per point");
  const auto colors = response_colors(responses);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  const auto old = out.precision(std::numeric_limits<float>::max_digits10);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const auto& c = colors[static_cast<std::size_t>(i)];
    out << static_cast<float>(cloud.points(i, 0)) << ' ' << static_cast<float>(cloud.points(i, 1)) << ' '
        << (cloud.dim() == 3 ? static_cast<float>(cloud.points(i, 2)) : 0.0f) << ' ' << int{c[0]} << ' '
        << int{c[1]} << ' ' << int{c[2]} << '\n';
  }
  out.precision(old);
}

inline void write_ply_response(const std::string& path, const PointCloud& cloud, std::span<const double> responses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_ply_response(out, cloud, responses);
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct PlyVertex {
  std::array<double, 3> position;
  Rgb color;
};

/// Reads the vertex records of an ASCII PLY written by write_ply_response.
inline std::vector<PlyVertex> read_ply_vertices(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw FormatError("ply: missing magic line");
  std::size_t vertices = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string word;
    f >> word;
    if (word == "format" ) {
      std::string kind;
      f >> kind;
      if (kind != "ascii") throw FormatError("ply: only ascii is supported");
    } else if (word == "element") {
      std::string name;
      f >> name >> vertices;
      if (name != "vertex") throw FormatError("ply: unexpected element '" + name + "'");
    } else if (word == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw FormatError("ply: missing end_header");
  std::vector<PlyVertex> out;
  out.reserve(vertices);
  for (std::size_t i = 0; i < vertices; ++i) {
    if (!std::getline(in, line)) throw FormatError("ply: truncated at vertex " + std::to_string(i));
    std::istringstream f(line);
    PlyVertex v{};
    int r = 0, g = 0, b = 0;
    if (!(f >> v.position[0] >> v.position[1] >> v.position[2] >> r >> g >> b))
      throw FormatError("ply: malformed vertex " + std::to_string(i));
    if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) throw FormatError("ply: color out of range");
    v.color = Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    out.push_back(v);
  }
  return out;
}

}  // namespace kcnet::io
