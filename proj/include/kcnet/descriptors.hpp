#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

#include "kcnet/cloud.hpp"
#include "kcnet/error.hpp"
#include "kcnet/features.hpp"
#include "kcnet/knn_graph.hpp"

namespace kcnet {

/// Per-point handcrafted features: 3 columns for normals, 6 for covariance (xx xy xz yy yz zz).
using DescriptorMatrix = FeatureMatrix<double>;

/// Covariance of the neighborhood {x_i} U N(i), divided by the member count.
/// Built from pairwise differences, so translating the cloud leaves it unchanged bit for bit
/// whenever the translated coordinates are exactly representable.
inline Eigen::Matrix3d neighborhood_covariance(const PointCloud& cloud, const NeighborGraph& graph, Eigen::Index i) {
  std::vector<Eigen::Vector3d> members;
  members.reserve(static_cast<std::size_t>(graph.k()) + 1);
  members.emplace_back(cloud.points.row(i).transpose());
  for (auto n : graph.neighbors(i)) members.emplace_back(cloud.points.row(n).transpose());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t a = 0; a < members.size(); ++a)
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      const Eigen::Vector3d d = members[a] - members[b];
      cov.noalias() += d * d.transpose();
    }
  const double count = static_cast<double>(members.size());
  return cov / (count * count);
}

namespace detail {
inline void check_descriptor_inputs(const PointCloud& cloud, const NeighborGraph& graph, int min_neighbors) {
  validate(cloud);
  if (cloud.dim() != 3) throw InvalidInput("descriptors require a 3-D cloud");
  if (graph.size() != cloud.size()) throw InvalidInput("graph and cloud sizes differ");
  if (graph.k() < min_neighbors)
    throw InvalidInput("descriptors need at least " + std::to_string(min_neighbors) + " neighbors per point");
}

/// Flip so the first component that is clearly nonzero is positive.
inline Eigen::Vector3d canonical_sign(Eigen::Vector3d v) {
  for (int c = 0; c < 3; ++c) {
    if (std::abs(v[c]) > 1e-9) {
      if (v[c] < 0) v = -v;
      break;
    }
  }
  return v;
}
}  // namespace detail

/// Unit normals as the minimum-variance direction of each neighborhood.
/// Neighborhoods with zero spread get the fallback (0, 0, 1). Indices whose two smallest
/// eigenvalues are within 1e-6 of each other (relative) are appended to `ambiguous` if given.
inline DescriptorMatrix estimate_normals(const PointCloud& cloud, const NeighborGraph& graph,
                                         std::vector<Eigen::Index>* ambiguous = nullptr) {
  detail::check_descriptor_inputs(cloud, graph, 2);
  DescriptorMatrix normals(cloud.size(), 3);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Eigen::Matrix3d cov = neighborhood_covariance(cloud, graph, i);
    const double scale = cov.trace();
    if (!(scale > 0.0)) {
      normals.row(i) << 0.0, 0.0, 1.0;
      if (ambiguous) ambiguous->push_back(i);
      continue;
    }
    solver.compute(cov / scale);
    const auto& ev = solver.eigenvalues();
    if (ambiguous && ev[1] - ev[0] < 1e-6) ambiguous->push_back(i);
    normals.row(i) = detail::canonical_sign(solver.eigenvectors().col(0).normalized()).transpose();
  }
  return normals;
}

/// Upper triangle of each neighborhood covariance.
inline DescriptorMatrix covariance_features(const PointCloud& cloud, const NeighborGraph& graph) {
  detail::check_descriptor_inputs(cloud, graph, 1);
  DescriptorMatrix out(cloud.size(), 6);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Eigen::Matrix3d c = neighborhood_covariance(cloud, graph, i);
    out.row(i) << c(0, 0), c(0, 1), c(0, 2), c(1, 1), c(1, 2), c(2, 2);
  }
  return out;
}

}  // namespace kcnet
