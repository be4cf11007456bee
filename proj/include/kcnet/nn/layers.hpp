#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kcnet/error.hpp"
#include "kcnet/features.hpp"
#include "kcnet/random.hpp"

namespace kcnet::nn {

enum class Mode { train, eval };

/// Affine map shared by every point: Y = X W + b, W is C_in x C_out.
template <class Scalar>
struct LinearParams {
  FeatureMatrix<Scalar> weight;
  RowVector<Scalar> bias;

  Eigen::Index in() const noexcept { return weight.rows(); }
  Eigen::Index out() const noexcept { return weight.cols(); }
  Eigen::Index parameter_count() const noexcept { return weight.size() + bias.size(); }

  static LinearParams zeros(Eigen::Index in, Eigen::Index out) {
    return {FeatureMatrix<Scalar>::Zero(in, out), RowVector<Scalar>::Zero(out)};
  }
};

/// Uniform init with bound sqrt(6 / fan_in) (He) or sqrt(6 / (fan_in + fan_out)) (Glorot).
template <class Scalar>
LinearParams<Scalar> init_linear(Eigen::Index in, Eigen::Index out, Rng& rng, bool relu_follows = true) {
  const double bound = relu_follows ? std::sqrt(6.0 / static_cast<double>(in))
                                    : std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto p = LinearParams<Scalar>::zeros(in, out);
  for (Eigen::Index r = 0; r < in; ++r)
    for (Eigen::Index c = 0; c < out; ++c) p.weight(r, c) = static_cast<Scalar>(dist(rng));
  return p;
}

template <class Derived>
auto linear_forward(const Eigen::MatrixBase<Derived>& x, const LinearParams<typename Derived::Scalar>& p)
    -> FeatureMatrix<typename Derived::Scalar> {
  if (x.cols() != p.in())
    throw InvalidInput("linear: input has " + std::to_string(x.cols()) + " channels, layer expects " +
                       std::to_string(p.in()));
  FeatureMatrix<typename Derived::Scalar> y = x * p.weight;
  y.rowwise() += p.bias;
  return y;
}

/// Accumulates dW += X^T dY and db += column sums of dY into `grad`; returns dX = dY W^T.
template <class DerivedX, class DerivedG>
auto linear_backward(const Eigen::MatrixBase<DerivedX>& x, const LinearParams<typename DerivedX::Scalar>& p,
                     const Eigen::MatrixBase<DerivedG>& dy, LinearParams<typename DerivedX::Scalar>& grad)
    -> FeatureMatrix<typename DerivedX::Scalar> {
  if (dy.rows() != x.rows() || dy.cols() != p.out() || x.cols() != p.in())
    throw InvalidInput("linear_backward: shape mismatch");
  if (grad.weight.rows() != p.in() || grad.weight.cols() != p.out()) throw InvalidInput("linear_backward: grad shape");
  grad.weight.noalias() += x.transpose() * dy;
  grad.bias += dy.colwise().sum();
  return dy * p.weight.transpose();
}

template <class Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return FeatureMatrix<Scalar>(x.cwiseMax(Scalar(0)));
}

/// Gradient through relu given its output.
template <class DerivedY, class DerivedG>
auto relu_backward(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedG>& dy) {
  using Scalar = typename DerivedY::Scalar;
  return FeatureMatrix<Scalar>((y.array() > Scalar(0)).select(dy, Scalar(0)));
}

/// Inverted dropout. `mask` holds 0 or 1/(1-rate) per element in train mode and is empty in
/// eval mode.
template <class Scalar>
struct Dropout {
  double rate = 0.0;
  FeatureMatrix<Scalar> mask;

  explicit Dropout(double r = 0.0) : rate(r) {
    if (!(r >= 0.0 && r < 1.0)) throw InvalidInput("dropout rate must lie in [0, 1)");
  }

  template <class Derived>
  FeatureMatrix<Scalar> forward(const Eigen::MatrixBase<Derived>& x, Mode mode, Rng& rng) {
    if (mode == Mode::eval || rate == 0.0) {
      mask.resize(0, 0);
      return x;
    }
    mask.resize(x.rows(), x.cols());
    std::bernoulli_distribution keep(1.0 - rate);
    const auto scale = static_cast<Scalar>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : Scalar(0);
    return x.cwiseProduct(mask);
  }

  template <class Derived>
  FeatureMatrix<Scalar> backward(const Eigen::MatrixBase<Derived>& dy) const {
    if (mask.size() == 0) return dy;
    if (dy.rows() != mask.rows() || dy.cols() != mask.cols()) throw InvalidInput("dropout backward: shape mismatch");
    return dy.cwiseProduct(mask);
  }
};

template <class Scalar>
struct GlobalMaxResult {
  RowVector<Scalar> values;
  std::vector<Eigen::Index> argmax;
};

/// Channel-wise maximum over all points; ties resolve to the lowest row.
template <class Derived>
auto global_max_pool(const Eigen::MatrixBase<Derived>& x) -> GlobalMaxResult<typename Derived::Scalar> {
  if (x.rows() < 1) throw InvalidInput("global_max_pool: empty input");
  GlobalMaxResult<typename Derived::Scalar> r;
  r.values = x.row(0);
  r.argmax.assign(static_cast<std::size_t>(x.cols()), 0);
  for (Eigen::Index i = 1; i < x.rows(); ++i)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (x(i, c) > r.values[c]) {
        r.values[c] = x(i, c);
        r.argmax[static_cast<std::size_t>(c)] = i;
      }
  return r;
}

template <class Derived>
auto global_max_pool_backward(const std::vector<Eigen::Index>& argmax, Eigen::Index rows,
                              const Eigen::MatrixBase<Derived>& dg) -> FeatureMatrix<typename Derived::Scalar> {
  if (static_cast<Eigen::Index>(argmax.size()) != dg.size()) throw InvalidInput("global_max_pool_backward: shape");
  FeatureMatrix<typename Derived::Scalar> dx = FeatureMatrix<typename Derived::Scalar>::Zero(rows, dg.size());
  for (Eigen::Index c = 0; c < dg.size(); ++c) dx(argmax[static_cast<std::size_t>(c)], c) += dg[c];
  return dx;
}

template <class Scalar>
struct LossResult {
  double loss = 0.0;
  RowVector<Scalar> dlogits;
};

/// Softmax cross-entropy through log-sum-exp; gradient is softmax - onehot.
template <class Derived>
auto softmax_cross_entropy(const Eigen::MatrixBase<Derived>& logits, int label) -> LossResult<typename Derived::Scalar> {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index classes = logits.size();
  if (label < 0 || label >= classes)
    throw InvalidInput("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  if (!logits.allFinite()) throw InvalidInput("softmax_cross_entropy: non-finite logits");
  double peak = static_cast<double>(logits.maxCoeff());
  std::vector<double> shifted(static_cast<std::size_t>(classes));
  double denom = 0.0;
  for (Eigen::Index c = 0; c < classes; ++c) {
    shifted[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(logits[c]) - peak);
    denom += shifted[static_cast<std::size_t>(c)];
  }
  LossResult<Scalar> r;
  r.loss = std::log(denom) + peak - static_cast<double>(logits[label]);
  r.dlogits.resize(classes);
  for (Eigen::Index c = 0; c < classes; ++c)
    r.dlogits[c] = static_cast<Scalar>(shifted[static_cast<std::size_t>(c)] / denom - (c == label ? 1.0 : 0.0));
  return r;
}

}  // namespace kcnet::nn
