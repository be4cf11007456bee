#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "kcnet/cli/config.hpp"
#include "kcnet/descriptors.hpp"
#include "kcnet/io/ply.hpp"
#include "kcnet/io/xyz.hpp"
#include "kcnet/nn/checkpoint.hpp"
#include "kcnet/nn/robustness.hpp"
#include "kcnet/nn/train.hpp"

namespace kcnet::cli {

namespace fs = std::filesystem;

/// Networks are trained and evaluated in single precision; checkpoints store doubles.
using NetScalar = float;

namespace detail {

inline std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
    out.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return out;
}

inline std::string real17(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

inline std::ofstream open_output(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline void dump_training_inputs(const LabeledDataset& train, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < train.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "train_%06zu", i);
    io::write_xyz((fs::path(dir) / (std::string(stem) + ".xyz")).string(), train.samples[i].cloud);
    auto out = open_output((fs::path(dir) / (std::string(stem) + ".graph")).string());
    write_graph_dump(out, train.samples[i].graph);
  }
}

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::string checkpoint;
  std::string noise;
  std::string in, out;
  int k = 0;
  int trials = 0;
  bool normalize = false;
  std::string kind = "both";
};

inline CliConfig resolve(const Options& o, const CLI::App& sub) {
  auto overrides = parse_overrides(o.sets);
  auto given = [&sub](const char* name) {
    const auto* opt = sub.get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--seed")) overrides.emplace_back("seed", std::to_string(o.seed));
  if (given("--checkpoint")) overrides.emplace_back("checkpoint", o.checkpoint);
  if (given("--noise")) overrides.emplace_back("noise_levels", o.noise);
  if (given("--trials")) overrides.emplace_back("noise_trials", std::to_string(o.trials));
  return load_config(o.config, overrides);
}

inline int cmd_graph(const Options& o, std::ostream& out) {
  if (!fs::is_directory(o.in)) throw IoError("'" + o.in + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.in))
    if (e.is_regular_file() && e.path().extension() == ".xyz") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  fs::create_directories(o.out);
  for (const auto& f : files) {
    const PointCloud cloud = io::read_xyz(f.string());
    auto dump = open_output((fs::path(o.out) / f.stem()).string() + ".graph");
    write_graph_dump(dump, build_knn_graph(cloud, o.k));
  }
  out << "wrote " << files.size() << " graph dumps to " << o.out << '\n';
  return 0;
}

inline int cmd_train(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::string metrics_path = cfg.path("metrics");
  const auto t0 = std::chrono::steady_clock::now();
  auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  const LabeledDataset train_set = load_split(cfg, cfg.training, "train");
  const bool has_test = cfg.dataset == "xyz" ? cfg.has_path("test_list") : cfg.has_path("test_images");
  const LabeledDataset test_set = has_test ? load_split(cfg, cfg.training, "test") : LabeledDataset{};
  const auto graphs = train_set.graphs();
  const double mean_edge = average_neighbor_distance(std::span<const NeighborGraph* const>(graphs));
  const double sigma = nn::resolve_sigma(cfg.training, train_set);
  err << "ingested " << train_set.size() << " train / " << test_set.size() << " test clouds, mean edge "
      << real17(mean_edge) << ", sigma " << real17(sigma) << " [" << seconds() << " s]\n";
  if (cfg.has_path("graph_dump")) dump_training_inputs(train_set, cfg.path("graph_dump"));

  const int classes = std::max(train_set.num_classes, test_set.num_classes);
  nn::Classifier<NetScalar> net(cfg.training, train_set.dim(), classes, sigma);
  nn::Trainer<NetScalar> trainer(net);

  auto metrics = open_output(metrics_path);
  for (const auto& [k, v] : settings(cfg)) metrics << "# " << k << " = " << v << '\n';
  metrics << "# average_neighbor_distance = " << real17(mean_edge) << '\n';
  metrics << "# resolved_sigma = " << real17(sigma) << '\n';
  metrics << "# parameters = " << net.parameter_count() << '\n';
  nn::write_metrics_header(metrics);

  nn::EpochMetrics last;
  const int epochs = cfg.training.epochs;
  for (int e = 1; e <= epochs; ++e) {
    nn::EpochMetrics m;
    m.train_loss = trainer.run_epoch(train_set);
    m.epoch = e;
    const bool eval_now = cfg.eval_every > 0 ? e % cfg.eval_every == 0 || e == epochs : e == epochs;
    if (!test_set.empty() && eval_now) m.test_accuracy = nn::evaluate(net, test_set);
    nn::write_metrics_row(metrics, m);
    metrics.flush();
    err << "epoch " << e << '/' << epochs << " loss " << m.train_loss;
    if (!std::isnan(m.test_accuracy)) err << " test_accuracy " << m.test_accuracy;
    err << " [" << seconds() << " s]\n";
    last = m;
  }
  if (cfg.has_path("checkpoint")) nn::save_checkpoint(cfg.path("checkpoint"), net, trainer.state, trainer.epochs_done);
  out << "train_loss " << real17(last.train_loss) << '\n';
  if (!std::isnan(last.test_accuracy)) out << "test_accuracy " << real17(last.test_accuracy) << '\n';
  return 0;
}

inline nn::LoadedCheckpoint<NetScalar> checkpoint_for(const CliConfig& cfg) {
  return nn::load_checkpoint<NetScalar>(cfg.path("checkpoint"));
}

inline void check_compatible(const nn::Classifier<NetScalar>& net, const LabeledDataset& data) {
  if (data.dim() != net.dim()) throw InvalidInput("dataset dimension does not match the checkpoint");
  for (const auto& s : data.samples)
    if (s.label >= net.num_classes()) throw InvalidInput("dataset label outside the checkpoint's classes");
}

inline int cmd_eval(const CliConfig& cfg, std::ostream& out) {
  const auto ckpt = checkpoint_for(cfg);
  const LabeledDataset test = load_split(cfg, ckpt.net.config(), "test");
  check_compatible(ckpt.net, test);
  out << "accuracy " << real17(nn::evaluate(ckpt.net, test)) << '\n';
  return 0;
}

inline int cmd_perturb_eval(const CliConfig& cfg, bool seed_given, std::ostream& out) {
  const auto ckpt = checkpoint_for(cfg);
  const LabeledDataset test = load_split(cfg, ckpt.net.config(), "test");
  check_compatible(ckpt.net, test);
  const std::uint64_t seed = seed_given ? cfg.training.seed : ckpt.net.config().seed;
  std::ostringstream csv;
  csv << "noise_points,accuracy\n";
  for (int level : cfg.noise_levels)
    csv << level << ',' << real17(nn::noisy_accuracy(ckpt.net, test, level, seed, cfg.noise_trials)) << '\n';
  if (cfg.has_path("perturb_csv")) open_output(cfg.path("perturb_csv")) << csv.str();
  out << csv.str();
  return 0;
}

inline int cmd_kc_viz(const Options& o, std::ostream& out) {
  const auto ckpt = nn::load_checkpoint<NetScalar>(o.checkpoint);
  const auto& kernels = ckpt.net.params().kernels;
  if (!ckpt.net.params().has_kernels()) throw InvalidInput("checkpoint has no kernel correlation layer");
  PointCloud cloud = io::read_xyz(o.in);
  if (o.normalize) cloud = normalize_unit_ball(cloud);
  if (cloud.dim() != ckpt.net.dim()) throw InvalidInput("cloud dimension does not match the checkpoint");
  const int k = o.k > 0 ? o.k : ckpt.net.config().k;
  const auto responses = kc_forward(kernels, cloud, build_knn_graph(cloud, k));
  fs::create_directories(o.out);
  for (int l = 0; l < kernels.num_kernels; ++l) {
    std::vector<double> r(static_cast<std::size_t>(cloud.size()));
    for (Eigen::Index i = 0; i < cloud.size(); ++i) r[static_cast<std::size_t>(i)] = responses(i, l);
    char name[32];
    std::snprintf(name, sizeof name, "kernel_%03d.ply", l);
    io::write_ply_response((fs::path(o.out) / name).string(), cloud, r);
  }
  auto bank = open_output((fs::path(o.out) / "kernels.txt").string());
  write_kernel_bank(bank, kernels);
  out << "wrote " << kernels.num_kernels << " response clouds to " << o.out << '\n';
  return 0;
}

inline int cmd_descriptors(const Options& o, std::ostream& out) {
  if (o.kind != "normals" && o.kind != "covariance" && o.kind != "both")
    throw ConfigError("kind", "expected normals, covariance or both");
  const PointCloud cloud = io::read_xyz(o.in, 3);
  const NeighborGraph graph = build_knn_graph(cloud, o.k);
  DescriptorMatrix normals, cov;
  std::vector<std::string> header;
  std::vector<Eigen::Index> ambiguous;
  if (o.kind != "covariance") {
    normals = estimate_normals(cloud, graph, &ambiguous);
    header.insert(header.end(), {"nx", "ny", "nz"});
  }
  if (o.kind != "normals") {
    cov = covariance_features(cloud, graph);
    header.insert(header.end(), {"cxx", "cxy", "cxz", "cyy", "cyz", "czz"});
  }
  auto csv = open_output(o.out);
  csv.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t h = 0; h < header.size(); ++h) csv << (h ? "," : "") << header[h];
  csv << '\n';
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    bool first = true;
    auto emit = [&](const DescriptorMatrix& m) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        csv << (first ? "" : ",") << m(i, c);
        first = false;
      }
    };
    if (normals.size()) emit(normals);
    if (cov.size()) emit(cov);
    csv << '\n';
  }
  out << "wrote descriptors for " << cloud.size() << " points to " << o.out;
  if (!ambiguous.empty()) out << " (" << ambiguous.size() << " points with near-degenerate normals)";
  out << '\n';
  return 0;
}

}  // namespace detail

/// Runs one subcommand. Returns 0 on success, 2 for usage or configuration errors and 1 for
/// failures while running.
inline int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kernel-correlation point-cloud classifier", "kcnet"};
  app.require_subcommand(1);
  detail::Options o;

  auto* graph = app.add_subcommand("graph", "Build kNN graph dumps for every .xyz file in a directory");
  graph->add_option("--k", o.k, "Neighbors per point")->default_val(16)->check(CLI::PositiveNumber);
  graph->add_option("--in", o.in, "Directory of .xyz clouds")->required();
  graph->add_option("--out", o.out, "Output directory")->required();

  auto add_config = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--set", o.sets, "Override one key (key=value); repeatable");
  };
  auto* train = app.add_subcommand("train", "Train a classifier and log per-epoch metrics");
  add_config(train);
  train->add_option("--seed", o.seed, "Root seed");

  auto* eval = app.add_subcommand("eval", "Test accuracy of a checkpoint");
  add_config(eval);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file");

  auto* perturb = app.add_subcommand("perturb-eval", "Accuracy as test points are replaced by noise");
  add_config(perturb);
  perturb->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  perturb->add_option("--seed", o.seed, "Noise seed (defaults to the checkpoint's seed)");
  perturb->add_option("--noise", o.noise, "Comma-separated noise point counts");
  perturb->add_option("--trials", o.trials, "Noise draws per level")->check(CLI::PositiveNumber);

  auto* viz = app.add_subcommand("kc-viz", "Write one colored PLY per learned kernel");
  viz->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  viz->add_option("--in", o.in, "Input .xyz cloud")->required();
  viz->add_option("--out", o.out, "Output directory")->required();
  viz->add_option("--k", o.k, "Neighbors per point (defaults to the checkpoint's)")->check(CLI::PositiveNumber);
  viz->add_flag("--normalize", o.normalize, "Center and scale the cloud into the unit ball first");

  auto* desc = app.add_subcommand("descriptors", "Write PCA normals and covariance features as CSV");
  desc->add_option("--in", o.in, "Input 3-D .xyz cloud")->required();
  desc->add_option("--out", o.out, "Output CSV")->required();
  desc->add_option("--k", o.k, "Neighbors per point")->default_val(16)->check(CLI::PositiveNumber);
  desc->add_option("--kind", o.kind, "normals, covariance or both")->default_val("both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n' << "run 'kcnet --help' for usage\n";
    return 2;
  }

  try {
    if (graph->parsed()) return detail::cmd_graph(o, out);
    if (viz->parsed()) return detail::cmd_kc_viz(o, out);
    if (desc->parsed()) return detail::cmd_descriptors(o, out);
    if (train->parsed()) return detail::cmd_train(detail::resolve(o, *train), out, err);
    if (eval->parsed()) return detail::cmd_eval(detail::resolve(o, *eval), out);
    if (perturb->parsed()) return detail::cmd_perturb_eval(detail::resolve(o, *perturb), perturb->count("--seed") > 0, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"kcnet"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_command(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace kcnet::cli
