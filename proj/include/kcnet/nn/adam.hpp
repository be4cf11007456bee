#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kcnet/error.hpp"

namespace kcnet::nn {

/// One learnable tensor as seen by the optimizer.
template <class Scalar>
struct ParamView {
  std::string name;
  std::span<Scalar> value;
  bool weight_decay = true;
};

struct AdamSettings {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;
};

/// Moment estimates, one slot per parameter tensor in registration order.
struct OptimizerState {
  std::int64_t step = 0;
  std::vector<std::string> names;
  std::vector<bool> decay;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  template <class Scalar>
  static OptimizerState for_params(const std::vector<ParamView<Scalar>>& params) {
    OptimizerState s;
    for (const auto& p : params) {
      s.names.push_back(p.name);
      s.decay.push_back(p.weight_decay);
      s.first_moment.emplace_back(p.value.size(), 0.0);
      s.second_moment.emplace_back(p.value.size(), 0.0);
    }
    return s;
  }
};

/// Bias-corrected ADAM. Weight decay enters as an L2 term added to the gradient, and only for
/// tensors whose group allows it.
template <class Scalar>
void adam_step(const std::vector<ParamView<Scalar>>& params, const std::vector<ParamView<Scalar>>& grads,
               OptimizerState& state, const AdamSettings& cfg) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw InvalidInput("adam_step: parameter, gradient and state counts differ");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto value = params[p].value;
    auto grad = grads[p].value;
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    if (grad.size() != value.size() || m.size() != value.size())
      throw InvalidInput("adam_step: shape mismatch for '" + params[p].name + "'");
    const double decay = state.decay[p] ? cfg.weight_decay : 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = static_cast<double>(grad[i]) + decay * static_cast<double>(value[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] = static_cast<Scalar>(static_cast<double>(value[i]) - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

}  // namespace kcnet::nn
