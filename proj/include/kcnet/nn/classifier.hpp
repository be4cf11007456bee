#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kcnet/cloud.hpp"
#include "kcnet/descriptors.hpp"
#include "kcnet/error.hpp"
#include "kcnet/features.hpp"
#include "kcnet/graph_pool.hpp"
#include "kcnet/kernel_correlation.hpp"
#include "kcnet/knn_graph.hpp"
#include "kcnet/nn/adam.hpp"
#include "kcnet/nn/config.hpp"
#include "kcnet/nn/layers.hpp"
#include "kcnet/random.hpp"

namespace kcnet::nn {

/// Shape summary of one parametric layer.
struct LayerSpec {
  std::string name;
  std::string kind;
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Eigen::Index parameters = 0;
};

/// Every learnable tensor of the classifier.
template <class Scalar>
struct ClassifierParams {
  KernelSet<Scalar> kernels;  // empty unless local features are kernel correlation
  // mlp1 (2 layers), mlp2 (2 layers), lift
  std::array<LinearParams<Scalar>, 5> point;
  // two hidden layers and the logit layer
  std::array<LinearParams<Scalar>, 3> head;

  bool has_kernels() const noexcept { return kernels.points.size() > 0; }

  ClassifierParams zeros_like() const {
    ClassifierParams z = *this;
    z.kernels.points.setZero();
    for (auto& p : z.point) { p.weight.setZero(); p.bias.setZero(); }
    for (auto& p : z.head) { p.weight.setZero(); p.bias.setZero(); }
    return z;
  }

  void set_zero() {
    kernels.points.setZero();
    for (auto& p : point) { p.weight.setZero(); p.bias.setZero(); }
    for (auto& p : head) { p.weight.setZero(); p.bias.setZero(); }
  }

  /// Views in a fixed order; kernel points are exempt from weight decay.
  std::vector<ParamView<Scalar>> views() {
    std::vector<ParamView<Scalar>> v;
    auto add = [&v](std::string name, auto& m, bool decay) {
      v.push_back({std::move(name), std::span<Scalar>(m.data(), static_cast<std::size_t>(m.size())), decay});
    };
    if (has_kernels()) add("kernels", kernels.points, false);
    static constexpr const char* point_names[] = {"mlp1.0", "mlp1.1", "mlp2.0", "mlp2.1", "lift"};
    static constexpr const char* head_names[] = {"head.0", "head.1", "head.2"};
    for (std::size_t i = 0; i < point.size(); ++i) {
      add(std::string(point_names[i]) + ".weight", point[i].weight, true);
      add(std::string(point_names[i]) + ".bias", point[i].bias, true);
    }
    for (std::size_t i = 0; i < head.size(); ++i) {
      add(std::string(head_names[i]) + ".weight", head[i].weight, true);
      add(std::string(head_names[i]) + ".bias", head[i].bias, true);
    }
    return v;
  }
};

/// Activations retained between forward and backward for one cloud.
template <class Scalar>
struct Workspace {
  KcCache kc_cache;
  FeatureMatrix<Scalar> input;      // [coords | local features]
  FeatureMatrix<Scalar> h1, h2;     // mlp1
  FeatureMatrix<Scalar> h3, h4;     // mlp2
  FeatureMatrix<Scalar> concat;     // [pooled h2 | h4]
  FeatureMatrix<Scalar> lifted;
  PoolRecord pool_record;
  GlobalMaxResult<Scalar> global;
  RowVector<Scalar> z1, z1_drop, z2, z2_drop, logits;
  Dropout<Scalar> drop1, drop2;
};

/// Point-cloud classifier: local features concatenated with coordinates, a two-layer per-point
/// MLP, a graph-pooling branch alongside a second two-layer MLP, a per-point lift, global max
/// pooling, and a three-layer head with dropout after the two hidden layers.
template <class Scalar>
class Classifier {
 public:
  /// `sigma` is the resolved kernel width (the config may ask for it to be derived from data).
  Classifier(const TrainingConfig& cfg, int dim, int num_classes, double sigma)
      : cfg_(cfg), dim_(dim), num_classes_(num_classes) {
    if (dim != 2 && dim != 3) throw InvalidInput("classifier: dimension must be 2 or 3");
    if (num_classes < 2) throw InvalidInput("classifier: need at least two classes");
    if (cfg.local_features == LocalFeatures::normals && dim != 3)
      throw InvalidInput("classifier: normal features require 3-D clouds");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw InvalidInput("classifier: dropout must lie in [0, 1)");

    if (cfg.local_features == LocalFeatures::kernel_correlation)
      params_.kernels = init_kernels<Scalar>(cfg.kernels, cfg.kernel_points, dim, sigma,
                                             derive_seed(cfg.seed, Stream::init, 0));
    Rng rng = make_rng(cfg.seed, Stream::init, 1);
    const int in = dim + local_width();
    params_.point[0] = init_linear<Scalar>(in, cfg.mlp1[0], rng);
    params_.point[1] = init_linear<Scalar>(cfg.mlp1[0], cfg.mlp1[1], rng);
    params_.point[2] = init_linear<Scalar>(cfg.mlp1[1], cfg.mlp2[0], rng);
    params_.point[3] = init_linear<Scalar>(cfg.mlp2[0], cfg.mlp2[1], rng);
    params_.point[4] = init_linear<Scalar>(cfg.mlp1[1] + cfg.mlp2[1], cfg.lift, rng);
    params_.head[0] = init_linear<Scalar>(cfg.lift, cfg.head[0], rng);
    params_.head[1] = init_linear<Scalar>(cfg.head[0], cfg.head[1], rng);
    params_.head[2] = init_linear<Scalar>(cfg.head[1], num_classes, rng, false);
    grads_ = params_.zeros_like();
  }

  const TrainingConfig& config() const noexcept { return cfg_; }
  int dim() const noexcept { return dim_; }
  int num_classes() const noexcept { return num_classes_; }
  ClassifierParams<Scalar>& params() noexcept { return params_; }
  const ClassifierParams<Scalar>& params() const noexcept { return params_; }
  ClassifierParams<Scalar>& grads() noexcept { return grads_; }
  void zero_grad() { grads_.set_zero(); }

  int local_width() const noexcept {
    switch (cfg_.local_features) {
      case LocalFeatures::kernel_correlation: return cfg_.kernels;
      case LocalFeatures::normals: return 3;
      case LocalFeatures::none: return 0;
    }
    return 0;
  }

  std::vector<LayerSpec> layers() const {
    std::vector<LayerSpec> out;
    if (params_.has_kernels())
      out.push_back({"kc", "kernel_correlation", dim_, cfg_.kernels, params_.kernels.points.size()});
    static constexpr const char* names[] = {"mlp1.0", "mlp1.1", "mlp2.0", "mlp2.1", "lift"};
    for (std::size_t i = 0; i < params_.point.size(); ++i)
      out.push_back({names[i], "per_point_linear", params_.point[i].in(), params_.point[i].out(),
                     params_.point[i].parameter_count()});
    for (std::size_t i = 0; i < params_.head.size(); ++i)
      out.push_back({"head." + std::to_string(i), "linear", params_.head[i].in(), params_.head[i].out(),
                     params_.head[i].parameter_count()});
    return out;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index total = 0;
    for (const auto& l : layers()) total += l.parameters;
    return total;
  }

  /// Logits for one cloud. `dropout_rng` is only used in train mode.
  RowVector<Scalar> forward(const PointCloud& cloud, const NeighborGraph& graph, Workspace<Scalar>& ws, Mode mode,
                            Rng* dropout_rng = nullptr) const {
    validate(cloud);
    if (cloud.dim() != dim_) throw InvalidInput("classifier: cloud dimension does not match the network");
    if (graph.size() != cloud.size()) throw InvalidInput("classifier: graph does not match cloud");
    if (mode == Mode::train && cfg_.dropout > 0.0 && dropout_rng == nullptr)
      throw InvalidInput("classifier: train mode with dropout needs an rng");
    const Eigen::Index n = cloud.size();

    ws.input.resize(n, dim_ + local_width());
    ws.input.leftCols(dim_) = cloud.points.template cast<Scalar>();
    switch (cfg_.local_features) {
      case LocalFeatures::kernel_correlation:
        ws.input.rightCols(cfg_.kernels) = kc_forward(params_.kernels, cloud, graph, &ws.kc_cache);
        break;
      case LocalFeatures::normals:
        ws.input.rightCols(3) = estimate_normals(cloud, graph).template cast<Scalar>();
        break;
      case LocalFeatures::none: break;
    }

    ws.h1 = relu(linear_forward(ws.input, params_.point[0]));
    ws.h2 = relu(linear_forward(ws.h1, params_.point[1]));
    ws.h3 = relu(linear_forward(ws.h2, params_.point[2]));
    ws.h4 = relu(linear_forward(ws.h3, params_.point[3]));

    const Eigen::Index branch = ws.h2.cols();
    ws.concat.resize(n, branch + ws.h4.cols());
    switch (cfg_.pooling) {
      case PoolingKind::max: {
        auto pooled = graph_max_pool(ws.h2, graph);
        ws.concat.leftCols(branch) = pooled.values;
        ws.pool_record = std::move(pooled.record);
        break;
      }
      case PoolingKind::average: ws.concat.leftCols(branch) = graph_avg_pool(ws.h2, graph); break;
      case PoolingKind::none: ws.concat.leftCols(branch) = ws.h2; break;
    }
    ws.concat.rightCols(ws.h4.cols()) = ws.h4;

    ws.lifted = relu(linear_forward(ws.concat, params_.point[4]));
    ws.global = global_max_pool(ws.lifted);

    ws.drop1 = Dropout<Scalar>(cfg_.dropout);
    ws.drop2 = Dropout<Scalar>(cfg_.dropout);
    ws.z1 = relu(linear_forward(ws.global.values, params_.head[0]));
    ws.z1_drop = ws.drop1.forward(ws.z1, mode, *dropout_rng_or_dummy(dropout_rng));
    ws.z2 = relu(linear_forward(ws.z1_drop, params_.head[1]));
    ws.z2_drop = ws.drop2.forward(ws.z2, mode, *dropout_rng_or_dummy(dropout_rng));
    ws.logits = linear_forward(ws.z2_drop, params_.head[2]);
    return ws.logits;
  }

  /// Accumulates parameter gradients for the cloud last passed through `forward` with `ws`.
  void backward(const PointCloud& cloud, const NeighborGraph& graph, const Workspace<Scalar>& ws,
                const RowVector<Scalar>& dlogits) {
    if (dlogits.size() != num_classes_) throw InvalidInput("classifier backward: dlogits has wrong size");
    auto& g = grads_;
    FeatureMatrix<Scalar> dz = linear_backward(ws.z2_drop, params_.head[2], dlogits, g.head[2]);
    dz = relu_backward(ws.z2, ws.drop2.backward(dz));
    dz = linear_backward(ws.z1_drop, params_.head[1], dz, g.head[1]);
    dz = relu_backward(ws.z1, ws.drop1.backward(dz));
    const FeatureMatrix<Scalar> dglobal = linear_backward(ws.global.values, params_.head[0], dz, g.head[0]);

    // Only the argmax row of each lifted channel receives gradient, so the lift layer's
    // backward touches one input row per output channel.
    const auto& lift = params_.point[4];
    FeatureMatrix<Scalar> dconcat = FeatureMatrix<Scalar>::Zero(ws.concat.rows(), ws.concat.cols());
    for (Eigen::Index c = 0; c < dglobal.cols(); ++c) {
      const Eigen::Index row = ws.global.argmax[static_cast<std::size_t>(c)];
      if (!(ws.lifted(row, c) > Scalar(0))) continue;
      const Scalar d = dglobal(0, c);
      if (d == Scalar(0)) continue;
      g.point[4].weight.col(c) += d * ws.concat.row(row).transpose();
      g.point[4].bias[c] += d;
      dconcat.row(row) += d * lift.weight.col(c).transpose();
    }

    const Eigen::Index branch = ws.h2.cols();
    FeatureMatrix<Scalar> dh4 = relu_backward(ws.h4, dconcat.rightCols(ws.h4.cols()));
    FeatureMatrix<Scalar> dh3 = relu_backward(ws.h3, linear_backward(ws.h3, params_.point[3], dh4, g.point[3]));
    FeatureMatrix<Scalar> dh2 = linear_backward(ws.h2, params_.point[2], dh3, g.point[2]);
    switch (cfg_.pooling) {
      case PoolingKind::max: dh2 += graph_max_pool_backward(ws.pool_record, dconcat.leftCols(branch)); break;
      case PoolingKind::average: dh2 += graph_avg_pool_backward(graph, dconcat.leftCols(branch)); break;
      case PoolingKind::none: dh2 += dconcat.leftCols(branch); break;
    }
    dh2 = relu_backward(ws.h2, dh2);
    FeatureMatrix<Scalar> dh1 = relu_backward(ws.h1, linear_backward(ws.h1, params_.point[1], dh2, g.point[1]));

    if (cfg_.local_features == LocalFeatures::kernel_correlation) {
      const FeatureMatrix<Scalar> dinput = dh1 * params_.point[0].weight.transpose();
      g.point[0].weight.noalias() += ws.input.transpose() * dh1;
      g.point[0].bias += dh1.colwise().sum();
      const FeatureMatrix<Scalar> dkc = dinput.rightCols(cfg_.kernels);
      g.kernels.points += kc_backward(params_.kernels, cloud, graph, dkc, &ws.kc_cache);
    } else {
      // Coordinates and fixed descriptors are inputs; no gradient flows past the first layer.
      g.point[0].weight.noalias() += ws.input.transpose() * dh1;
      g.point[0].bias += dh1.colwise().sum();
    }
  }

 private:
  static Rng* dropout_rng_or_dummy(Rng* rng) {
    thread_local Rng dummy{0};
    return rng ? rng : &dummy;
  }

  TrainingConfig cfg_;
  int dim_;
  int num_classes_;
  ClassifierParams<Scalar> params_;
  ClassifierParams<Scalar> grads_;
};

}  // namespace kcnet::nn
