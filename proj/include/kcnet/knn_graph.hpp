#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kcnet/cloud.hpp"
#include "kcnet/error.hpp"

namespace kcnet {

/// Directed K-nearest-neighbor graph: every vertex has exactly K out-edges, no self-loops,
/// rows sorted by ascending distance with ties broken by lower vertex index.
class NeighborGraph {
 public:
  NeighborGraph() = default;
  NeighborGraph(Eigen::Index vertices, int k, std::vector<std::int32_t> neighbors, std::vector<double> distances)
      : vertices_(vertices), k_(k), neighbors_(std::move(neighbors)), distances_(std::move(distances)) {
    const auto expected = static_cast<std::size_t>(vertices_) * static_cast<std::size_t>(k_);
    if (neighbors_.size() != expected || distances_.size() != expected)
      throw InvalidInput("neighbor graph storage does not match N*K");
  }

  Eigen::Index size() const noexcept { return vertices_; }
  int k() const noexcept { return k_; }

  std::span<const std::int32_t> neighbors(Eigen::Index i) const {
    return {neighbors_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_)};
  }
  std::span<const double> distances(Eigen::Index i) const {
    return {distances_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_)};
  }
  const std::vector<std::int32_t>& all_neighbors() const noexcept { return neighbors_; }
  const std::vector<double>& all_distances() const noexcept { return distances_; }

  friend bool operator==(const NeighborGraph&, const NeighborGraph&) = default;

 private:
  Eigen::Index vertices_ = 0;
  int k_ = 0;
  std::vector<std::int32_t> neighbors_;
  std::vector<double> distances_;
};

namespace detail {

inline double squared_distance(const PointMatrix& pts, Eigen::Index a, Eigen::Index b) {
  double sum = 0.0;
  for (Eigen::Index d = 0; d < pts.cols(); ++d) {
    const double diff = pts(a, d) - pts(b, d);
    sum += diff * diff;
  }
  return sum;
}

}  // namespace detail

/// Exact kNN graph. Each query keeps a bounded sorted candidate list, which is linear in N for
/// the small K used here.
inline NeighborGraph build_knn_graph(const PointCloud& cloud, int k) {
  validate(cloud);
  const Eigen::Index n = cloud.size();
  if (k < 1) throw InvalidInput("K must be at least 1");
  if (k >= n)
    throw InvalidInput("K=" + std::to_string(k) + " requires more than " + std::to_string(k) + " points, got " +
                       std::to_string(n));

  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::int32_t> neighbors(static_cast<std::size_t>(n) * kk);
  std::vector<double> distances(static_cast<std::size_t>(n) * kk);
  std::vector<double> best_d(kk);
  std::vector<std::int32_t> best_j(kk);

  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t filled = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d2 = detail::squared_distance(cloud.points, i, j);
      // j increases monotonically, so an equal distance never displaces an earlier index.
      if (filled == kk && d2 >= best_d[kk - 1]) continue;
      std::size_t pos = filled < kk ? filled++ : kk - 1;
      while (pos > 0 && best_d[pos - 1] > d2) {
        best_d[pos] = best_d[pos - 1];
        best_j[pos] = best_j[pos - 1];
        --pos;
      }
      best_d[pos] = d2;
      best_j[pos] = static_cast<std::int32_t>(j);
    }
    const auto row = static_cast<std::size_t>(i) * kk;
    for (std::size_t r = 0; r < kk; ++r) {
      neighbors[row + r] = best_j[r];
      distances[row + r] = std::sqrt(best_d[r]);
    }
  }
  return NeighborGraph(n, k, std::move(neighbors), std::move(distances));
}

/// Mean of every stored edge length over all graphs; the kernel-width heuristic.
inline double average_neighbor_distance(std::span<const NeighborGraph* const> graphs) {
  if (graphs.empty()) throw InvalidInput("average_neighbor_distance needs at least one graph");
  double sum = 0.0;
  std::size_t edges = 0;
  for (const NeighborGraph* g : graphs) {
    for (double d : g->all_distances()) sum += d;
    edges += g->all_distances().size();
  }
  if (edges == 0) throw InvalidInput("average_neighbor_distance: graphs have no edges");
  return sum / static_cast<double>(edges);
}

inline double average_neighbor_distance(std::span<const NeighborGraph> graphs) {
  std::vector<const NeighborGraph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const auto& g : graphs) ptrs.push_back(&g);
  return average_neighbor_distance(std::span<const NeighborGraph* const>(ptrs));
}

/// Writes "i: j1 j2 ... jK", one line per vertex.
inline void write_graph_dump(std::ostream& out, const NeighborGraph& graph) {
  for (Eigen::Index i = 0; i < graph.size(); ++i) {
    out << i << ':';
    for (auto j : graph.neighbors(i)) out << ' ' << j;
    out << '\n';
  }
}

/// Reads a dump produced by write_graph_dump. Edge lengths are recomputed from `cloud`.
inline NeighborGraph read_graph_dump(std::istream& in, const PointCloud& cloud) {
  std::vector<std::int32_t> neighbors;
  std::vector<double> distances;
  int k = -1;
  Eigen::Index row = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw FormatError("graph dump line " + std::to_string(line_no) + ": missing ':'");
    if (std::stoll(line.substr(0, colon)) != row)
      throw FormatError("graph dump line " + std::to_string(line_no) + ": vertex out of order");
    std::istringstream fields(line.substr(colon + 1));
    int count = 0;
    std::int64_t j = 0;
    while (fields >> j) {
      if (j < 0 || j >= cloud.size() || j == row)
        throw FormatError("graph dump line " + std::to_string(line_no) + ": bad neighbor index " + std::to_string(j));
      neighbors.push_back(static_cast<std::int32_t>(j));
      distances.push_back(std::sqrt(detail::squared_distance(cloud.points, row, j)));
      ++count;
    }
    if (!fields.eof()) throw FormatError("graph dump line " + std::to_string(line_no) + ": unparsable index");
    if (k < 0) k = count;
    if (count != k || k == 0)
      throw FormatError("graph dump line " + std::to_string(line_no) + ": expected " + std::to_string(k) + " neighbors");
    ++row;
  }
  if (row != cloud.size())
    throw FormatError("graph dump has " + std::to_string(row) + " rows for a cloud of " + std::to_string(cloud.size()));
  return NeighborGraph(row, k, std::move(neighbors), std::move(distances));
}

}  // namespace kcnet
