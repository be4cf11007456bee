#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "kcnet/error.hpp"
#include "kcnet/features.hpp"
#include "kcnet/knn_graph.hpp"

namespace kcnet {

/// Which neighbor supplied each pooled maximum, N x C.
struct PoolRecord {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<std::int32_t> argmax;

  std::int32_t at(Eigen::Index i, Eigen::Index c) const { return argmax[static_cast<std::size_t>(i * cols + c)]; }
};

template <class Scalar>
struct MaxPoolResult {
  FeatureMatrix<Scalar> values;
  PoolRecord record;
};

namespace detail {
template <class Matrix>
void check_pool_shapes(const Matrix& x, const NeighborGraph& graph, const char* op) {
  if (x.rows() != graph.size())
    throw InvalidInput(std::string(op) + ": feature rows (" + std::to_string(x.rows()) +
                       ") do not match graph vertices (" + std::to_string(graph.size()) + ")");
  if (graph.k() < 1) throw InvalidInput(std::string(op) + ": graph has no edges");
}
}  // namespace detail

/// Y(i, c) = max over neighbors n of X(n, c). Ties go to the lowest vertex index.
template <class Derived>
auto graph_max_pool(const Eigen::MatrixBase<Derived>& x, const NeighborGraph& graph)
    -> MaxPoolResult<typename Derived::Scalar> {
  using Scalar = typename Derived::Scalar;
  detail::check_pool_shapes(x, graph, "graph_max_pool");
  const Eigen::Index n = x.rows();
  const Eigen::Index c = x.cols();
  MaxPoolResult<Scalar> result;
  result.values.resize(n, c);
  result.record.rows = n;
  result.record.cols = c;
  result.record.argmax.resize(static_cast<std::size_t>(n * c));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(i);
    for (Eigen::Index ch = 0; ch < c; ++ch) {
      std::int32_t best = nbrs[0];
      Scalar best_v = x(best, ch);
      for (std::size_t r = 1; r < nbrs.size(); ++r) {
        const Scalar v = x(nbrs[r], ch);
        if (v > best_v || (v == best_v && nbrs[r] < best)) {
          best_v = v;
          best = nbrs[r];
        }
      }
      result.values(i, ch) = best_v;
      result.record.argmax[static_cast<std::size_t>(i * c + ch)] = best;
    }
  }
  return result;
}

/// Routes each pooled gradient back to the neighbor that won the max.
template <class Derived>
auto graph_max_pool_backward(const PoolRecord& record, const Eigen::MatrixBase<Derived>& dy)
    -> FeatureMatrix<typename Derived::Scalar> {
  if (dy.rows() != record.rows || dy.cols() != record.cols ||
      record.argmax.size() != static_cast<std::size_t>(record.rows * record.cols))
    throw InvalidInput("graph_max_pool_backward: gradient shape does not match the pool record");
  FeatureMatrix<typename Derived::Scalar> dx = FeatureMatrix<typename Derived::Scalar>::Zero(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i)
    for (Eigen::Index ch = 0; ch < dy.cols(); ++ch) dx(record.at(i, ch), ch) += dy(i, ch);
  return dx;
}

/// Y = D^-1 W X. Every vertex has out-degree K, so each row averages its K neighbors.
template <class Derived>
auto graph_avg_pool(const Eigen::MatrixBase<Derived>& x, const NeighborGraph& graph)
    -> FeatureMatrix<typename Derived::Scalar> {
  using Scalar = typename Derived::Scalar;
  detail::check_pool_shapes(x, graph, "graph_avg_pool");
  FeatureMatrix<Scalar> y = FeatureMatrix<Scalar>::Zero(x.rows(), x.cols());
  const auto degree = static_cast<Scalar>(graph.k());
  std::vector<std::int32_t> row;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    // Ascending vertex order reproduces the dense row-times-matrix sum bit for bit.
    const auto nbrs = graph.neighbors(i);
    row.assign(nbrs.begin(), nbrs.end());
    std::sort(row.begin(), row.end());
    for (auto n : row) y.row(i) += x.row(n);
    y.row(i) /= degree;
  }
  return y;
}

/// Adjoint of graph_avg_pool: dX = P^T dY.
template <class Derived>
auto graph_avg_pool_backward(const NeighborGraph& graph, const Eigen::MatrixBase<Derived>& dy)
    -> FeatureMatrix<typename Derived::Scalar> {
  using Scalar = typename Derived::Scalar;
  detail::check_pool_shapes(dy, graph, "graph_avg_pool_backward");
  FeatureMatrix<Scalar> dx = FeatureMatrix<Scalar>::Zero(dy.rows(), dy.cols());
  const Scalar inv_degree = Scalar(1) / static_cast<Scalar>(graph.k());
  for (Eigen::Index i = 0; i < dy.rows(); ++i)
    for (auto n : graph.neighbors(i)) dx.row(n) += dy.row(i) * inv_degree;
  return dx;
}

}  // namespace kcnet
