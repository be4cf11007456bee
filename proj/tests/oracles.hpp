#pragma once

// Reference implementations used only by the tests. Each one follows the plainest possible
// route (exhaustive search, dense matrices, finite differences, polynomial roots) and shares no
// code with the library paths it checks.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Dense = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Exhaustive kNN: sort every (squared distance, index) pair of each row.
inline std::vector<std::vector<int>> brute_force_knn(const Dense& pts, int k) {
  const auto n = pts.rows();
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> all;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (Eigen::Index d = 0; d < pts.cols(); ++d) {
        const double diff = pts(i, d) - pts(j, d);
        d2 += diff * diff;
      }
      all.emplace_back(d2, static_cast<int>(j));
    }
    std::sort(all.begin(), all.end());
    for (int r = 0; r < k; ++r) rows[static_cast<std::size_t>(i)].push_back(all[static_cast<std::size_t>(r)].second);
  }
  return rows;
}

/// Dense adjacency W with W(i, j) = 1 for every edge i -> j.
inline Dense adjacency(const std::vector<std::vector<int>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Dense w = Dense::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j : rows[static_cast<std::size_t>(i)]) w(i, j) = 1.0;
  return w;
}

/// Degree matrix D with D(i, i) = number of edges leaving i.
inline Dense degree(const Dense& w) {
  Dense d = Dense::Zero(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i) d(i, i) = w.row(i).sum();
  return d;
}

/// D^-1 (W X), with the row sums taken in column order.
inline Dense dense_avg_pool(const Dense& w, const Dense& x) {
  const Dense d = degree(w);
  Dense wx = Dense::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index c = 0; c < x.cols(); ++c) wx(i, c) += w(i, j) * x(j, c);
  for (Eigen::Index i = 0; i < wx.rows(); ++i) wx.row(i) /= d(i, i);
  return wx;
}

/// Matrix product with the "+" replaced by "max" over the nonzero entries of W.
inline Dense dense_max_pool(const Dense& w, const Dense& x) {
  Dense y = Dense::Constant(x.rows(), x.cols(), -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (w(i, j) != 0.0)
        for (Eigen::Index c = 0; c < x.cols(); ++c) y(i, c) = std::max(y(i, c), x(j, c));
  return y;
}

/// Central differences of a scalar function over every entry of `x`.
inline std::vector<double> central_difference(const std::function<double()>& f, double* x, std::size_t n, double h) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Fourth-order five-point stencil; used where a tight tolerance is demanded of smooth maps.
inline std::vector<double> five_point_difference(const std::function<double()>& f, double* x, std::size_t n,
                                                 double h) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = x[i];
    auto at = [&](double step) {
      x[i] = saved + step;
      return f();
    };
    const double v = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12.0 * h);
    x[i] = saved;
    g[i] = v;
  }
  return g;
}

/// Worst entry of |a - b| / max(|a|, |b|, floor). The floor keeps entries that are tiny
/// compared with the rest of the gradient from dominating through cancellation noise.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Smallest eigenpair of a symmetric 3x3 matrix: bisection on the characteristic polynomial,
/// then the eigenvector as the longest cross product of two rows of (A - lambda I).
inline std::pair<double, Eigen::Vector3d> smallest_eigenpair(const Eigen::Matrix3d& a) {
  // det(lambda I - A) = lambda^3 - c2 lambda^2 + c1 lambda - c0
  const double c2 = a.trace();
  const double c1 = a(0, 0) * a(1, 1) + a(0, 0) * a(2, 2) + a(1, 1) * a(2, 2) - a(0, 1) * a(1, 0) -
                    a(0, 2) * a(2, 0) - a(1, 2) * a(2, 1);
  const double c0 = a.determinant();
  auto p = [&](double l) { return ((l - c2) * l + c1) * l - c0; };
  // Gershgorin lower bound on the spectrum; p < 0 there, and p changes sign at the smallest root.
  double lo = 0.0;
  for (int i = 0; i < 3; ++i) {
    double radius = 0.0;
    for (int j = 0; j < 3; ++j)
      if (j != i) radius += std::abs(a(i, j));
    lo = std::min(lo, a(i, i) - radius) - 1e-12;
  }
  // The derivative's smaller root bounds the first root from above when the roots are distinct.
  const double disc = std::max(0.0, c2 * c2 - 3.0 * c1);
  double hi = (c2 - std::sqrt(disc)) / 3.0;
  if (p(hi) < 0.0) hi = (c2 + std::sqrt(disc)) / 3.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (p(mid) < 0.0) lo = mid; else hi = mid;
  }
  const double lambda = 0.5 * (lo + hi);
  const Eigen::Matrix3d shifted = a - lambda * Eigen::Matrix3d::Identity();
  Eigen::Vector3d best = Eigen::Vector3d::Zero();
  for (int r = 0; r < 3; ++r)
    for (int s = r + 1; s < 3; ++s) {
      const Eigen::Vector3d c = shifted.row(r).transpose().cross(shifted.row(s).transpose());
      if (c.norm() > best.norm()) best = c;
    }
  return {lambda, best.normalized()};
}

/// Uniform random matrix in [-half_width, half_width].
inline Dense random_points(std::mt19937_64& rng, Eigen::Index n, Eigen::Index dim, double half_width) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  Dense p(n, dim);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

}  // namespace oracle
