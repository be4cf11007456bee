#pragma once

#include <cstdint>
#include <vector>

#include "kcnet/cloud.hpp"
#include "kcnet/dataset.hpp"
#include "kcnet/error.hpp"
#include "kcnet/nn/classifier.hpp"
#include "kcnet/random.hpp"

namespace kcnet::nn {

inline const std::vector<int> kDefaultNoiseLevels{0, 1, 5, 10, 20, 50, 100};

/// Accuracy on `data` after replacing `noise_points` points of every cloud with uniform noise.
/// Graphs are rebuilt for perturbed clouds. Sample i of trial t draws from
/// derive_seed(seed, noise, t * size + i) whatever the level, so a larger level perturbs a
/// superset of the points a smaller one does. Results are averaged over `trials`.
template <class Scalar>
double noisy_accuracy(const Classifier<Scalar>& net, const LabeledDataset& data, int noise_points, std::uint64_t seed,
                      int trials = 1) {
  if (data.empty()) throw InvalidInput("noisy_accuracy: empty dataset");
  if (trials < 1) throw InvalidInput("noisy_accuracy: trials must be positive");
  Workspace<Scalar> ws;
  std::size_t correct = 0;
  for (int t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Sample& s = data.samples[i];
      Eigen::Index best = 0;
      if (noise_points == 0) {
        net.forward(s.cloud, s.graph, ws, Mode::eval).maxCoeff(&best);
      } else {
        const auto index = static_cast<std::uint64_t>(t) * data.size() + i;
        const PointCloud cloud = perturb_noise(s.cloud, noise_points, derive_seed(seed, Stream::noise, index));
        net.forward(cloud, build_knn_graph(cloud, s.graph.k()), ws, Mode::eval).maxCoeff(&best);
      }
      if (best == s.label) ++correct;
    }
    if (noise_points == 0) {
      correct *= static_cast<std::size_t>(trials);
      break;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size() * static_cast<std::size_t>(trials));
}

}  // namespace kcnet::nn
