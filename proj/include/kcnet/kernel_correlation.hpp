#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "kcnet/cloud.hpp"
#include "kcnet/error.hpp"
#include "kcnet/features.hpp"
#include "kcnet/knn_graph.hpp"

namespace kcnet {

/// L learnable point-set kernels of M points each, sharing one Gaussian width.
/// Row l*M + m of `points` is the m-th point of kernel l.
template <class Scalar>
struct KernelSet {
  int num_kernels = 0;
  int points_per_kernel = 0;
  double sigma = 0.0;
  FeatureMatrix<Scalar> points;

  int dim() const noexcept { return static_cast<int>(points.cols()); }
  auto kernel_point(int l, int m) const { return points.row(static_cast<Eigen::Index>(l) * points_per_kernel + m); }

  void validate() const {
    if (num_kernels < 1 || points_per_kernel < 1) throw InvalidInput("kernel set needs L, M >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("kernel width must be positive and finite");
    if (points.rows() != static_cast<Eigen::Index>(num_kernels) * points_per_kernel)
      throw InvalidInput("kernel storage does not hold L*M points");
    if (!points.allFinite()) throw InvalidInput("kernel set has a non-finite coordinate");
  }
};

/// Gaussian affinity exp(-|k - delta|^2 / (2 sigma^2)).
template <class VecA, class VecB>
double gaussian_kernel(const VecA& k, const VecB& delta, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("gaussian_kernel: sigma must be positive");
  double sq = 0.0;
  for (Eigen::Index d = 0; d < k.size(); ++d) {
    const double diff = static_cast<double>(k[d]) - static_cast<double>(delta[d]);
    sq += diff * diff;
  }
  return std::exp(-sq / (2.0 * sigma * sigma));
}

/// Every coordinate uniform on [-0.2, 0.2].
template <class Scalar = double>
KernelSet<Scalar> init_kernels(int num_kernels, int points_per_kernel, int dim, double sigma, std::uint64_t seed) {
  if (num_kernels < 1 || points_per_kernel < 1) throw InvalidInput("init_kernels: L and M must be >= 1");
  if (dim != 2 && dim != 3) throw InvalidInput("init_kernels: dimension must be 2 or 3");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("init_kernels: sigma must be positive");
  KernelSet<Scalar> set;
  set.num_kernels = num_kernels;
  set.points_per_kernel = points_per_kernel;
  set.sigma = sigma;
  set.points.resize(static_cast<Eigen::Index>(num_kernels) * points_per_kernel, dim);
  Rng rng(seed);
  std::uniform_real_distribution<double> coord(-0.2, 0.2);
  for (Eigen::Index r = 0; r < set.points.rows(); ++r)
    for (int d = 0; d < dim; ++d) set.points(r, d) = static_cast<Scalar>(coord(rng));
  return set;
}

/// Affinities saved by the forward pass, indexed [i][l][m][n], so the backward pass can skip
/// the exponentials.
struct KcCache {
  std::vector<double> affinity;
};

namespace detail {

inline void check_kc_shapes(int kernel_dim, const PointCloud& cloud, const NeighborGraph& graph) {
  validate(cloud);
  if (graph.size() != cloud.size())
    throw InvalidInput("graph has " + std::to_string(graph.size()) + " vertices, cloud has " +
                       std::to_string(cloud.size()) + " points");
  if (kernel_dim != cloud.dim()) throw InvalidInput("kernel dimension does not match cloud dimension");
}

template <int Dim, class Scalar>
FeatureMatrix<Scalar> kc_forward_impl(const KernelSet<Scalar>& kernels, const PointCloud& cloud,
                                      const NeighborGraph& graph, KcCache* cache) {
  const Eigen::Index n_points = cloud.size();
  const int k = graph.k();
  const int n_kernels = kernels.num_kernels;
  const int m_points = kernels.points_per_kernel;
  const double inv_two_sigma_sq = 1.0 / (2.0 * kernels.sigma * kernels.sigma);

  std::vector<std::array<double, Dim>> kpts(static_cast<std::size_t>(kernels.points.rows()));
  for (Eigen::Index r = 0; r < kernels.points.rows(); ++r)
    for (int d = 0; d < Dim; ++d) kpts[static_cast<std::size_t>(r)][d] = static_cast<double>(kernels.points(r, d));

  if (cache) cache->affinity.resize(static_cast<std::size_t>(n_points) * n_kernels * m_points * k);
  double* saved = cache ? cache->affinity.data() : nullptr;

  FeatureMatrix<Scalar> out(n_points, n_kernels);
  std::vector<std::array<double, Dim>> offsets(static_cast<std::size_t>(k));
  std::vector<double> per_point(static_cast<std::size_t>(m_points));
  for (Eigen::Index i = 0; i < n_points; ++i) {
    const auto nbrs = graph.neighbors(i);
    for (int n = 0; n < k; ++n)
      for (int d = 0; d < Dim; ++d) offsets[n][d] = cloud.points(nbrs[n], d) - cloud.points(i, d);

    for (int l = 0; l < n_kernels; ++l) {
      for (int m = 0; m < m_points; ++m) {
        const auto& kp = kpts[static_cast<std::size_t>(l) * m_points + m];
        double partial = 0.0;
        for (int n = 0; n < k; ++n) {
          double sq = 0.0;
          for (int d = 0; d < Dim; ++d) {
            const double diff = kp[d] - offsets[n][d];
            sq += diff * diff;
          }
          const double e = std::exp(-sq * inv_two_sigma_sq);
          if (saved) *saved++ = e;
          partial += e;
        }
        per_point[m] = partial;
      }
      // Summing the per-kernel-point terms in sorted order makes the response exactly
      // invariant to the order of points inside a kernel.
      std::sort(per_point.begin(), per_point.end());
      double total = 0.0;
      for (double p : per_point) total += p;
      out(i, l) = static_cast<Scalar>(total / k);
    }
  }
  return out;
}

template <int Dim, class Scalar, class Upstream>
FeatureMatrix<Scalar> kc_backward_impl(const KernelSet<Scalar>& kernels, const PointCloud& cloud,
                                       const NeighborGraph& graph, const Upstream& upstream, const KcCache* cache) {
  const Eigen::Index n_points = cloud.size();
  const int k = graph.k();
  const int n_kernels = kernels.num_kernels;
  const int m_points = kernels.points_per_kernel;
  const double sigma_sq = kernels.sigma * kernels.sigma;
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma_sq);
  // alpha_i = -1 / (|N(i)| sigma^2); |N(i)| = K for every vertex.
  const double alpha = -1.0 / (static_cast<double>(k) * sigma_sq);

  const std::size_t n_kp = static_cast<std::size_t>(kernels.points.rows());
  std::vector<std::array<double, Dim>> kpts(n_kp);
  for (std::size_t r = 0; r < n_kp; ++r)
    for (int d = 0; d < Dim; ++d) kpts[r][d] = static_cast<double>(kernels.points(static_cast<Eigen::Index>(r), d));

  std::vector<std::array<double, Dim>> grads(n_kp, std::array<double, Dim>{});
  std::vector<std::array<double, Dim>> offsets(static_cast<std::size_t>(k));
  const double* saved = cache ? cache->affinity.data() : nullptr;

  for (Eigen::Index i = 0; i < n_points; ++i) {
    const auto nbrs = graph.neighbors(i);
    for (int n = 0; n < k; ++n)
      for (int d = 0; d < Dim; ++d) offsets[n][d] = cloud.points(nbrs[n], d) - cloud.points(i, d);

    for (int l = 0; l < n_kernels; ++l) {
      const double scale = alpha * static_cast<double>(upstream(i, l));
      for (int m = 0; m < m_points; ++m) {
        const std::size_t r = static_cast<std::size_t>(l) * m_points + m;
        const auto& kp = kpts[r];
        std::array<double, Dim> acc{};
        for (int n = 0; n < k; ++n) {
          // v = kappa_m + x_i - x_n
          std::array<double, Dim> v;
          double sq = 0.0;
          for (int d = 0; d < Dim; ++d) {
            v[d] = kp[d] - offsets[n][d];
            sq += v[d] * v[d];
          }
          const double e = saved ? *saved++ : std::exp(-sq * inv_two_sigma_sq);
          for (int d = 0; d < Dim; ++d) acc[d] += v[d] * e;
        }
        if (scale != 0.0)
          for (int d = 0; d < Dim; ++d) grads[r][d] += scale * acc[d];
      }
    }
  }

  FeatureMatrix<Scalar> out(static_cast<Eigen::Index>(n_kp), Dim);
  for (std::size_t r = 0; r < n_kp; ++r)
    for (int d = 0; d < Dim; ++d) out(static_cast<Eigen::Index>(r), d) = static_cast<Scalar>(grads[r][d]);
  return out;
}

}  // namespace detail

/// Kernel-correlation responses, N x L: entry (i, l) is the mean over neighbors n of i of
/// sum_m exp(-|kappa_m - (x_n - x_i)|^2 / 2 sigma^2). Sums are accumulated in double.
template <class Scalar>
FeatureMatrix<Scalar> kc_forward(const KernelSet<Scalar>& kernels, const PointCloud& cloud, const NeighborGraph& graph,
                                 KcCache* cache = nullptr) {
  kernels.validate();
  detail::check_kc_shapes(kernels.dim(), cloud, graph);
  return cloud.dim() == 2 ? detail::kc_forward_impl<2>(kernels, cloud, graph, cache)
                          : detail::kc_forward_impl<3>(kernels, cloud, graph, cache);
}

/// Loss gradient with respect to every kernel point (rows match KernelSet::points), given the
/// upstream gradient dL/dKC (N x L). Point coordinates receive no gradient.
/// Pass the cache filled by the matching kc_forward call to reuse its affinities.
template <class Scalar, class Upstream>
FeatureMatrix<Scalar> kc_backward(const KernelSet<Scalar>& kernels, const PointCloud& cloud, const NeighborGraph& graph,
                                  const Upstream& upstream, const KcCache* cache = nullptr) {
  kernels.validate();
  detail::check_kc_shapes(kernels.dim(), cloud, graph);
  if (upstream.rows() != cloud.size() || upstream.cols() != kernels.num_kernels)
    throw InvalidInput("kc_backward: upstream gradient must be N x L");
  if (cache && cache->affinity.size() != static_cast<std::size_t>(cloud.size()) * kernels.points.rows() * graph.k())
    throw InvalidInput("kc_backward: cache does not match this layer");
  return cloud.dim() == 2 ? detail::kc_backward_impl<2>(kernels, cloud, graph, upstream, cache)
                          : detail::kc_backward_impl<3>(kernels, cloud, graph, upstream, cache);
}

/// Kernel bank text format: "L M D sigma", then L*M lines of D coordinates.
template <class Scalar>
void write_kernel_bank(std::ostream& out, const KernelSet<Scalar>& kernels) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << kernels.num_kernels << ' ' << kernels.points_per_kernel << ' ' << kernels.dim() << ' ' << kernels.sigma
      << '\n';
  for (Eigen::Index r = 0; r < kernels.points.rows(); ++r) {
    for (int d = 0; d < kernels.dim(); ++d) out << (d ? " " : "") << static_cast<double>(kernels.points(r, d));
    out << '\n';
  }
  out.precision(old_precision);
}

template <class Scalar>
KernelSet<Scalar> read_kernel_bank(std::istream& in) {
  KernelSet<Scalar> kernels;
  int dim = 0;
  if (!(in >> kernels.num_kernels >> kernels.points_per_kernel >> dim >> kernels.sigma))
    throw FormatError("kernel bank: malformed header");
  if (kernels.num_kernels < 1 || kernels.points_per_kernel < 1 || (dim != 2 && dim != 3))
    throw FormatError("kernel bank: invalid header values");
  kernels.points.resize(static_cast<Eigen::Index>(kernels.num_kernels) * kernels.points_per_kernel, dim);
  for (Eigen::Index r = 0; r < kernels.points.rows(); ++r)
    for (int d = 0; d < dim; ++d) {
      double v = 0.0;
      if (!(in >> v)) throw FormatError("kernel bank: truncated at kernel point " + std::to_string(r));
      kernels.points(r, d) = static_cast<Scalar>(v);
    }
  kernels.validate();
  return kernels;
}

}  // namespace kcnet
