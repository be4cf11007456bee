#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

#include "kcnet/dataset.hpp"
#include "kcnet/error.hpp"
#include "kcnet/nn/adam.hpp"
#include "kcnet/nn/classifier.hpp"
#include "kcnet/random.hpp"

namespace kcnet::nn {

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

inline AdamSettings adam_settings(const TrainingConfig& cfg) {
  return {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay};
}

/// Kernel width the classifier should use: the configured value, or the mean edge length of the
/// training graphs when the config asks for it.
inline double resolve_sigma(const TrainingConfig& cfg, const LabeledDataset& train) {
  if (!cfg.sigma_auto) return cfg.sigma;
  const auto graphs = train.graphs();
  return average_neighbor_distance(std::span<const NeighborGraph* const>(graphs));
}

/// Fraction of samples whose arg-max logit equals the label. Dropout is off.
template <class Scalar>
double evaluate(const Classifier<Scalar>& net, const LabeledDataset& data) {
  if (data.empty()) throw InvalidInput("evaluate: empty dataset");
  Workspace<Scalar> ws;
  std::size_t correct = 0;
  for (const auto& s : data.samples) {
    const RowVector<Scalar> logits = net.forward(s.cloud, s.graph, ws, Mode::eval);
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Mean cross-entropy in eval mode.
template <class Scalar>
double mean_loss(const Classifier<Scalar>& net, const LabeledDataset& data) {
  if (data.empty()) throw InvalidInput("mean_loss: empty dataset");
  Workspace<Scalar> ws;
  double total = 0.0;
  for (const auto& s : data.samples) total += softmax_cross_entropy(net.forward(s.cloud, s.graph, ws, Mode::eval), s.label).loss;
  return total / static_cast<double>(data.size());
}

/// Mini-batch training state that can be resumed from a checkpoint.
template <class Scalar>
struct Trainer {
  Classifier<Scalar>& net;
  OptimizerState state;
  int epochs_done = 0;

  explicit Trainer(Classifier<Scalar>& n) : net(n), state(OptimizerState::for_params(n.params().views())) {}

  /// One pass over `train` in a seeded shuffled order; returns the mean training loss.
  double run_epoch(const LabeledDataset& train) {
    const auto& cfg = net.config();
    const std::size_t n = train.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(cfg.seed, Stream::shuffle, static_cast<std::uint64_t>(epochs_done));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    const AdamSettings adam = adam_settings(cfg);
    Workspace<Scalar> ws;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      net.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const Sample& s = train.samples[order[b]];
        Rng dropout_rng = make_rng(cfg.seed, Stream::dropout,
                                   static_cast<std::uint64_t>(epochs_done) * n + b);
        const RowVector<Scalar> logits = net.forward(s.cloud, s.graph, ws, Mode::train, &dropout_rng);
        auto loss = softmax_cross_entropy(logits, s.label);
        loss_sum += loss.loss;
        loss.dlogits /= static_cast<Scalar>(stop - start);
        net.backward(s.cloud, s.graph, ws, loss.dlogits);
      }
      adam_step(net.params().views(), net.grads().views(), state, adam);
    }
    ++epochs_done;
    return loss_sum / static_cast<double>(n);
  }
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Trains for `cfg.epochs` epochs and records the loss and test accuracy after each one.
/// The result depends only on the data, the config and its seed.
template <class Scalar>
std::vector<EpochMetrics> train(Trainer<Scalar>& trainer, const LabeledDataset& train_set,
                                const LabeledDataset* test_set, const EpochCallback& on_epoch = {}) {
  if (train_set.empty()) throw InvalidInput("train: empty dataset");
  std::vector<EpochMetrics> history;
  const int epochs = trainer.net.config().epochs;
  while (trainer.epochs_done < epochs) {
    EpochMetrics m;
    m.train_loss = trainer.run_epoch(train_set);
    m.epoch = trainer.epochs_done;
    if (test_set && !test_set->empty()) m.test_accuracy = evaluate(trainer.net, *test_set);
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

inline void write_metrics_header(std::ostream& out) { out << "epoch,train_loss,test_accuracy\n"; }

inline void write_metrics_row(std::ostream& out, const EpochMetrics& m) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << m.epoch << ',' << m.train_loss << ',';
  if (!std::isnan(m.test_accuracy)) out << m.test_accuracy;
  out << '\n';
  out.precision(old);
}

}  // namespace kcnet::nn
