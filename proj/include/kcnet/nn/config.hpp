#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kcnet/error.hpp"

namespace kcnet::nn {

/// Per-point local descriptor concatenated with the raw coordinates.
enum class LocalFeatures { kernel_correlation, normals, none };

/// Neighborhood aggregation applied to the first MLP's output. `none` passes features through.
enum class PoolingKind { max, average, none };

/// Optimizer, schedule and architecture hyperparameters. Defaults are the published
/// classification settings.
struct TrainingConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;
  int batch_size = 64;
  int epochs = 400;
  double dropout = 0.5;
  std::uint64_t seed = 0;

  int k = 16;
  int kernels = 32;
  int kernel_points = 16;
  double sigma = 0.005;
  bool sigma_auto = false;  // use the average neighbor distance of the training graphs
  int points = 128;

  LocalFeatures local_features = LocalFeatures::kernel_correlation;
  PoolingKind pooling = PoolingKind::max;
  std::array<int, 2> mlp1{64, 64};
  std::array<int, 2> mlp2{64, 128};
  int lift = 1024;
  std::array<int, 2> head{512, 256};

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

inline std::string to_string(LocalFeatures f) {
  switch (f) {
    case LocalFeatures::kernel_correlation: return "kc";
    case LocalFeatures::normals: return "normals";
    case LocalFeatures::none: return "none";
  }
  return "?";
}

inline std::string to_string(PoolingKind p) {
  switch (p) {
    case PoolingKind::max: return "max";
    case PoolingKind::average: return "avg";
    case PoolingKind::none: return "none";
  }
  return "?";
}

namespace detail {

inline std::string format_real(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

template <class T>
T parse_number(const std::string& key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "cannot parse '" + std::string(text) + "'");
  return value;
}

inline double parse_positive(const std::string& key, std::string_view text) {
  const double v = parse_number<double>(key, text);
  if (!(v > 0.0)) throw ConfigError(key, "must be positive");
  return v;
}

inline int parse_count(const std::string& key, std::string_view text) {
  const int v = parse_number<int>(key, text);
  if (v < 1) throw ConfigError(key, "must be at least 1");
  return v;
}

inline std::array<int, 2> parse_pair(const std::string& key, std::string_view text) {
  const auto comma = text.find(',');
  if (comma == std::string_view::npos) throw ConfigError(key, "expected two comma-separated widths");
  return {parse_count(key, text.substr(0, comma)), parse_count(key, text.substr(comma + 1))};
}

}  // namespace detail

/// Applies one "key = value" setting. Returns false when the key is not a training key.
inline bool apply_training_setting(TrainingConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "lr") cfg.learning_rate = parse_positive(key, value);
  else if (key == "beta1") cfg.beta1 = parse_number<double>(key, value);
  else if (key == "beta2") cfg.beta2 = parse_number<double>(key, value);
  else if (key == "epsilon") cfg.epsilon = parse_positive(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_number<double>(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_count(key, value);
  else if (key == "epochs") cfg.epochs = parse_number<int>(key, value);
  else if (key == "dropout") cfg.dropout = parse_number<double>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "k") cfg.k = parse_count(key, value);
  else if (key == "kernels") cfg.kernels = parse_count(key, value);
  else if (key == "kernel_points") cfg.kernel_points = parse_count(key, value);
  else if (key == "sigma") {
    if (value == "auto") {
      cfg.sigma_auto = true;
    } else {
      cfg.sigma = parse_positive(key, value);
      cfg.sigma_auto = false;
    }
  } else if (key == "points") cfg.points = parse_count(key, value);
  else if (key == "local_features") {
    if (value == "kc") cfg.local_features = LocalFeatures::kernel_correlation;
    else if (value == "normals") cfg.local_features = LocalFeatures::normals;
    else if (value == "none") cfg.local_features = LocalFeatures::none;
    else throw ConfigError(key, "expected kc, normals or none");
  } else if (key == "pooling") {
    if (value == "max") cfg.pooling = PoolingKind::max;
    else if (value == "avg") cfg.pooling = PoolingKind::average;
    else if (value == "none") cfg.pooling = PoolingKind::none;
    else throw ConfigError(key, "expected max, avg or none");
  } else if (key == "mlp1") cfg.mlp1 = parse_pair(key, value);
  else if (key == "mlp2") cfg.mlp2 = parse_pair(key, value);
  else if (key == "lift") cfg.lift = parse_count(key, value);
  else if (key == "head") cfg.head = parse_pair(key, value);
  else return false;

  if (key == "dropout" && !(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError(key, "must lie in [0, 1)");
  if ((key == "beta1" || key == "beta2") && !((key == "beta1" ? cfg.beta1 : cfg.beta2) >= 0.0 &&
                                              (key == "beta1" ? cfg.beta1 : cfg.beta2) < 1.0))
    throw ConfigError(key, "must lie in [0, 1)");
  if (key == "weight_decay" && cfg.weight_decay < 0.0) throw ConfigError(key, "must be non-negative");
  if (key == "epochs" && cfg.epochs < 0) throw ConfigError(key, "must be non-negative");
  return true;
}

/// Every training key with its current value, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> training_settings(const TrainingConfig& cfg) {
  using detail::format_real;
  auto pair = [](const std::array<int, 2>& p) { return std::to_string(p[0]) + "," + std::to_string(p[1]); };
  return {
      {"lr", format_real(cfg.learning_rate)},
      {"beta1", format_real(cfg.beta1)},
      {"beta2", format_real(cfg.beta2)},
      {"epsilon", format_real(cfg.epsilon)},
      {"weight_decay", format_real(cfg.weight_decay)},
      {"batch_size", std::to_string(cfg.batch_size)},
      {"epochs", std::to_string(cfg.epochs)},
      {"dropout", format_real(cfg.dropout)},
      {"seed", std::to_string(cfg.seed)},
      {"k", std::to_string(cfg.k)},
      {"kernels", std::to_string(cfg.kernels)},
      {"kernel_points", std::to_string(cfg.kernel_points)},
      {"sigma", cfg.sigma_auto ? std::string("auto") : format_real(cfg.sigma)},
      {"points", std::to_string(cfg.points)},
      {"local_features", to_string(cfg.local_features)},
      {"pooling", to_string(cfg.pooling)},
      {"mlp1", pair(cfg.mlp1)},
      {"mlp2", pair(cfg.mlp2)},
      {"lift", std::to_string(cfg.lift)},
      {"head", pair(cfg.head)},
  };
}

}  // namespace kcnet::nn
