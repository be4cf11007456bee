#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kcnet/dataset.hpp"
#include "kcnet/error.hpp"
#include "kcnet/nn/config.hpp"
#include "kcnet/nn/robustness.hpp"

namespace kcnet::cli {

/// File and path keys understood next to the training keys. Relative paths are taken as
/// given, i.e. relative to the working directory of the process.
inline const std::vector<std::string> kPathKeys{
    "train_images", "train_labels", "test_images", "test_labels", "train_list",
    "test_list",    "metrics",      "checkpoint",  "graph_dump",  "perturb_csv",
};

struct CliConfig {
  nn::TrainingConfig training;
  std::string dataset = "mnist";  // mnist or xyz
  std::map<std::string, std::string> paths;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  int threshold = 0;
  int eval_every = 1;  // 0 evaluates only after the last epoch
  std::vector<int> noise_levels = nn::kDefaultNoiseLevels;
  int noise_trials = 1;

  /// Throws a ConfigError naming `key` when the path was not configured.
  const std::string& path(const std::string& key) const {
    const auto it = paths.find(key);
    if (it == paths.end() || it->second.empty()) throw ConfigError(key, "required path is not set");
    return it->second;
  }
  bool has_path(const std::string& key) const {
    const auto it = paths.find(key);
    return it != paths.end() && !it->second.empty();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<int> parse_levels(const std::string& key, const std::string& text) {
  std::vector<int> levels;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    const std::string item = trim(text.substr(start, comma - start));
    const int v = nn::detail::parse_number<int>(key, item);
    if (v < 0) throw ConfigError(key, "noise levels must be non-negative");
    levels.push_back(v);
    start = comma + 1;
  }
  return levels;
}

inline std::string join_levels(const std::vector<int>& levels) {
  std::string s;
  for (std::size_t i = 0; i < levels.size(); ++i) s += (i ? "," : "") + std::to_string(levels[i]);
  return s;
}

}  // namespace detail

/// Applies one setting; unknown keys are rejected.
inline void apply_setting(CliConfig& cfg, const std::string& key, const std::string& value) {
  using nn::detail::parse_number;
  if (nn::apply_training_setting(cfg.training, key, value)) return;
  if (std::find(kPathKeys.begin(), kPathKeys.end(), key) != kPathKeys.end()) {
    cfg.paths[key] = value;
  } else if (key == "dataset") {
    if (value != "mnist" && value != "xyz") throw ConfigError(key, "expected mnist or xyz");
    cfg.dataset = value;
  } else if (key == "train_limit") {
    cfg.train_limit = parse_number<std::size_t>(key, value);
  } else if (key == "test_limit") {
    cfg.test_limit = parse_number<std::size_t>(key, value);
  } else if (key == "threshold") {
    cfg.threshold = parse_number<int>(key, value);
    if (cfg.threshold < 0 || cfg.threshold > 255) throw ConfigError(key, "must lie in [0, 255]");
  } else if (key == "eval_every") {
    cfg.eval_every = parse_number<int>(key, value);
    if (cfg.eval_every < 0) throw ConfigError(key, "must be non-negative");
  } else if (key == "noise_levels") {
    cfg.noise_levels = detail::parse_levels(key, value);
  } else if (key == "noise_trials") {
    cfg.noise_trials = nn::detail::parse_count(key, value);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

/// Reads "key = value" lines ('#' starts a comment), then applies `overrides` in order.
/// An empty `path` means no file.
inline CliConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  CliConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
      apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
  }
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  return cfg;
}

/// Every resolved setting in a fixed order.
inline std::vector<std::pair<std::string, std::string>> settings(const CliConfig& cfg) {
  auto out = nn::training_settings(cfg.training);
  out.emplace_back("dataset", cfg.dataset);
  for (const auto& key : kPathKeys)
    if (cfg.has_path(key)) out.emplace_back(key, cfg.paths.at(key));
  out.emplace_back("train_limit", std::to_string(cfg.train_limit));
  out.emplace_back("test_limit", std::to_string(cfg.test_limit));
  out.emplace_back("threshold", std::to_string(cfg.threshold));
  out.emplace_back("eval_every", std::to_string(cfg.eval_every));
  out.emplace_back("noise_levels", detail::join_levels(cfg.noise_levels));
  out.emplace_back("noise_trials", std::to_string(cfg.noise_trials));
  return out;
}

inline IngestOptions ingest_options(const nn::TrainingConfig& training, const CliConfig& cfg, const std::string& split) {
  IngestOptions opt;
  opt.points = training.points;
  opt.k = training.k;
  opt.threshold = static_cast<std::uint8_t>(cfg.threshold);
  opt.seed = training.seed;
  opt.limit = split == "train" ? cfg.train_limit : cfg.test_limit;
  return opt;
}

/// Loads the train or test split named by the config. Graph and sampling settings come from
/// `training`, which for evaluation commands is the configuration stored with the network.
inline LabeledDataset load_split(const CliConfig& cfg, const nn::TrainingConfig& training, const std::string& split) {
  const auto opt = ingest_options(training, cfg, split);
  if (cfg.dataset == "xyz") return load_xyz_list(cfg.path(split + "_list"), opt, split);
  const std::string images = cfg.path(split + "_images");
  return load_mnist(images, cfg.path(split + "_labels"), opt, split);
}

}  // namespace kcnet::cli
