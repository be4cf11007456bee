#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "kcnet/error.hpp"
#include "kcnet/random.hpp"

namespace kcnet {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// An ordered set of N points in 2 or 3 dimensions, optionally labelled.
struct PointCloud {
  PointMatrix points;
  std::optional<int> label;

  PointCloud() = default;
  explicit PointCloud(PointMatrix pts, std::optional<int> lbl = std::nullopt)
      : points(std::move(pts)), label(lbl) {}

  Eigen::Index size() const noexcept { return points.rows(); }
  int dim() const noexcept { return static_cast<int>(points.cols()); }
  auto point(Eigen::Index i) const { return points.row(i); }
};

inline void validate(const PointCloud& cloud) {
  if (cloud.size() < 1) throw InvalidInput("point cloud is empty");
  if (cloud.dim() != 2 && cloud.dim() != 3)
    throw InvalidInput("point cloud dimension must be 2 or 3, got " + std::to_string(cloud.dim()));
  if (!cloud.points.allFinite()) throw InvalidInput("point cloud has a non-finite coordinate");
}

/// Centers the cloud on its centroid and scales it so the farthest point has norm 1.
/// All-coincident clouds are only centered.
inline PointCloud normalize_unit_ball(const PointCloud& cloud) {
  validate(cloud);
  PointCloud out = cloud;
  const Eigen::RowVectorXd centroid = cloud.points.colwise().mean();
  out.points.rowwise() -= centroid;
  const double radius = out.points.rowwise().norm().maxCoeff();
  if (radius > 0.0) out.points /= radius;
  return out;
}

/// Draws exactly `count` points: a subset without replacement when shrinking, every original
/// point plus uniform draws with replacement when growing.
inline PointCloud resample_fixed(const PointCloud& cloud, Eigen::Index count, std::uint64_t seed) {
  if (cloud.size() < 1) throw InvalidInput("cannot resample an empty cloud");
  if (count < 1) throw InvalidInput("resample count must be positive");
  const Eigen::Index n = cloud.size();
  Rng rng(seed);
  std::vector<Eigen::Index> picks;
  picks.reserve(static_cast<std::size_t>(count));
  if (count <= n) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    // Partial Fisher-Yates; keep the chosen indices in original order.
    for (Eigen::Index i = 0; i < count; ++i) {
      std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
    }
    picks.assign(all.begin(), all.begin() + count);
    std::sort(picks.begin(), picks.end());
  } else {
    picks.resize(static_cast<std::size_t>(n));
    std::iota(picks.begin(), picks.end(), Eigen::Index{0});
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (Eigen::Index i = n; i < count; ++i) picks.push_back(pick(rng));
  }
  PointCloud out;
  out.label = cloud.label;
  out.points.resize(count, cloud.dim());
  for (Eigen::Index i = 0; i < count; ++i) out.points.row(i) = cloud.points.row(picks[static_cast<std::size_t>(i)]);
  return out;
}

/// Replaces `count` distinct randomly chosen points with uniform noise from [-1, 1]^D.
inline PointCloud perturb_noise(const PointCloud& cloud, Eigen::Index count, std::uint64_t seed) {
  if (count < 0 || count > cloud.size())
    throw InvalidInput("noise count " + std::to_string(count) + " outside [0, " +
                       std::to_string(cloud.size()) + "]");
  PointCloud out = cloud;
  if (count == 0) return out;
  Rng rng(seed);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(cloud.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, cloud.size() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    const Eigen::Index target = idx[static_cast<std::size_t>(i)];
    for (int d = 0; d < cloud.dim(); ++d) out.points(target, d) = coord(rng);
  }
  return out;
}

}  // namespace kcnet
