#include <gtest/gtest.h>

#include <numeric>

#include "kcnet/graph_pool.hpp"
#include "oracles.hpp"

using kcnet::FeatureMatrix;
using kcnet::NeighborGraph;
using kcnet::PointCloud;

namespace {

NeighborGraph line_graph(int k) {
  kcnet::PointMatrix m(3, 2);
  m << 0, 0, 1, 0, 3, 0;
  return kcnet::build_knn_graph(PointCloud(m), k);
}

FeatureMatrix<double> column(std::initializer_list<double> v) {
  FeatureMatrix<double> x(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double e : v) x(i++, 0) = e;
  return x;
}

std::vector<std::vector<int>> rows_of(const NeighborGraph& g) {
  std::vector<std::vector<int>> rows;
  for (Eigen::Index i = 0; i < g.size(); ++i) rows.emplace_back(g.neighbors(i).begin(), g.neighbors(i).end());
  return rows;
}

}  // namespace

TEST(GraphMaxPool, HandExample) {
  const auto r = kcnet::graph_max_pool(column({1, 5, 2}), line_graph(1));
  EXPECT_EQ(r.values, column({5, 1, 5}));
  EXPECT_EQ(r.record.argmax, (std::vector<std::int32_t>{1, 0, 1}));
}

TEST(GraphMaxPool, ConstantIsUnchanged) {
  std::mt19937_64 rng(1);
  const auto g = kcnet::build_knn_graph(PointCloud(oracle::random_points(rng, 30, 3, 1.0)), 5);
  const FeatureMatrix<double> x = FeatureMatrix<double>::Constant(30, 4, 2.5);
  EXPECT_EQ(kcnet::graph_max_pool(x, g).values, x);
}

TEST(GraphMaxPool, SelectionAndRecordProperties) {
  std::mt19937_64 rng(2);
  const auto g = kcnet::build_knn_graph(PointCloud(oracle::random_points(rng, 40, 3, 1.0)), 6);
  const FeatureMatrix<double> x = oracle::random_points(rng, 40, 7, 1.0);
  const auto r = kcnet::graph_max_pool(x, g);
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index c = 0; c < 7; ++c) {
      const auto nb = g.neighbors(i);
      EXPECT_NE(std::find(nb.begin(), nb.end(), r.record.at(i, c)), nb.end());
      EXPECT_EQ(r.values(i, c), x(r.record.at(i, c), c));
    }
}

TEST(GraphMaxPool, TieGoesToLowestIndex) {
  // Vertex 1 has neighbors {0, 2} with equal features.
  const auto r = kcnet::graph_max_pool(column({4, 0, 4}), line_graph(2));
  EXPECT_EQ(r.record.at(1, 0), 0);
  const auto bw = kcnet::graph_max_pool_backward(r.record, column({0, 1, 0}));
  EXPECT_EQ(bw, column({1, 0, 0}));
}

TEST(GraphMaxPool, ShapeMismatch) {
  EXPECT_THROW(kcnet::graph_max_pool(column({1, 2}), line_graph(1)), kcnet::InvalidInput);
}

TEST(GraphMaxPoolBackward, HandRouting) {
  const auto r = kcnet::graph_max_pool(column({1, 5, 2}), line_graph(1));
  EXPECT_EQ(kcnet::graph_max_pool_backward(r.record, column({1, 1, 1})), column({1, 2, 0}));
  EXPECT_TRUE(kcnet::graph_max_pool_backward(r.record, column({0, 0, 0})).isZero(0.0));
  EXPECT_THROW(kcnet::graph_max_pool_backward(r.record, column({1, 1})), kcnet::InvalidInput);
}

TEST(GraphMaxPoolBackward, ConservesMass) {
  std::mt19937_64 rng(3);
  const auto g = kcnet::build_knn_graph(PointCloud(oracle::random_points(rng, 64, 3, 1.0)), 8);
  // Integer-valued gradients keep every partial sum exact.
  FeatureMatrix<double> dy(64, 5);
  std::uniform_int_distribution<int> u(-50, 50);
  for (Eigen::Index i = 0; i < dy.size(); ++i) dy.data()[i] = u(rng);
  const auto r = kcnet::graph_max_pool(FeatureMatrix<double>(oracle::random_points(rng, 64, 5, 1.0)), g);
  EXPECT_EQ(kcnet::graph_max_pool_backward(r.record, dy).sum(), dy.sum());
}

TEST(GraphAvgPool, HandExamples) {
  EXPECT_EQ(kcnet::graph_avg_pool(column({2, 4, 6}), line_graph(1)), column({4, 2, 4}));
  EXPECT_EQ(kcnet::graph_avg_pool(column({0, 3, 9}), line_graph(2)), column({6, 4.5, 1.5}));
  EXPECT_EQ(kcnet::graph_avg_pool(column({7, 7, 7}), line_graph(2)), column({7, 7, 7}));
}

TEST(GraphAvgPool, Linear) {
  std::mt19937_64 rng(4);
  const auto g = kcnet::build_knn_graph(PointCloud(oracle::random_points(rng, 50, 2, 1.0)), 7);
  const FeatureMatrix<double> a = oracle::random_points(rng, 50, 3, 1.0);
  const FeatureMatrix<double> b = oracle::random_points(rng, 50, 3, 1.0);
  const FeatureMatrix<double> lhs = kcnet::graph_avg_pool(FeatureMatrix<double>(0.3 * a - 1.7 * b), g);
  const FeatureMatrix<double> rhs = 0.3 * kcnet::graph_avg_pool(a, g) - 1.7 * kcnet::graph_avg_pool(b, g);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GraphAvgPoolBackward, HandExamples) {
  EXPECT_EQ(kcnet::graph_avg_pool_backward(line_graph(1), column({1, 1, 1})), column({1, 2, 0}));
  EXPECT_TRUE(kcnet::graph_avg_pool_backward(line_graph(1), column({0, 0, 0})).isZero(0.0));
  EXPECT_THROW(kcnet::graph_avg_pool_backward(line_graph(1), column({1})), kcnet::InvalidInput);
}

TEST(GraphPools, CommuteWithChannelPermutation) {
  std::mt19937_64 rng(5);
  const auto g = kcnet::build_knn_graph(PointCloud(oracle::random_points(rng, 40, 3, 1.0)), 6);
  const FeatureMatrix<double> x = oracle::random_points(rng, 40, 6, 1.0);
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  FeatureMatrix<double> xp(40, 6);
  for (int c = 0; c < 6; ++c) xp.col(c) = x.col(perm[c]);
  const auto max_a = kcnet::graph_max_pool(x, g).values, max_b = kcnet::graph_max_pool(xp, g).values;
  const auto avg_a = kcnet::graph_avg_pool(x, g), avg_b = kcnet::graph_avg_pool(xp, g);
  for (int c = 0; c < 6; ++c) {
    EXPECT_EQ(max_b.col(c), max_a.col(perm[c]));
    EXPECT_EQ(avg_b.col(c), avg_a.col(perm[c]));
  }
}

TEST(GraphPools, MatchDenseFormulation) {
  std::mt19937_64 rng(6);
  for (int n : {20, 100, 256}) {
    const auto g = kcnet::build_knn_graph(PointCloud(oracle::random_points(rng, n, 3, 1.0)), 9);
    const FeatureMatrix<double> x = oracle::random_points(rng, n, 4, 1.0);
    const auto w = oracle::adjacency(rows_of(g));
    EXPECT_EQ(kcnet::graph_max_pool(x, g).values, oracle::dense_max_pool(w, x));
    EXPECT_EQ(kcnet::graph_avg_pool(x, g), oracle::dense_avg_pool(w, x));
  }
}

TEST(GraphAvgPoolBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const auto g = kcnet::build_knn_graph(PointCloud(oracle::random_points(rng, 30, 3, 1.0)), 5);
  FeatureMatrix<double> x = oracle::random_points(rng, 30, 3, 1.0);
  const FeatureMatrix<double> dy = oracle::random_points(rng, 30, 3, 1.0);
  const auto analytic = kcnet::graph_avg_pool_backward(g, dy);
  const auto numeric = oracle::central_difference(
      [&] { return kcnet::graph_avg_pool(x, g).cwiseProduct(dy).sum(); }, x.data(), static_cast<std::size_t>(x.size()),
      1e-3);
  const std::vector<double> a(analytic.data(), analytic.data() + analytic.size());
  EXPECT_LT(oracle::max_relative_error(a, numeric, 1e-9 * oracle::max_abs(a)), 1e-9);
}
