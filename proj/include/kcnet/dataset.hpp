#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kcnet/cloud.hpp"
#include "kcnet/error.hpp"
#include "kcnet/io/idx.hpp"
#include "kcnet/io/xyz.hpp"
#include "kcnet/knn_graph.hpp"
#include "kcnet/random.hpp"

namespace kcnet {

/// A cloud with its offline-built neighbor graph and class label.
struct Sample {
  PointCloud cloud;
  NeighborGraph graph;
  int label = 0;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  int num_classes = 0;
  std::string split;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  int dim() const { return samples.empty() ? 0 : samples.front().cloud.dim(); }

  std::vector<const NeighborGraph*> graphs() const {
    std::vector<const NeighborGraph*> g;
    g.reserve(samples.size());
    for (const auto& s : samples) g.push_back(&s.graph);
    return g;
  }
};

struct IngestOptions {
  int points = 128;            // resampled size of every cloud
  int k = 16;
  std::uint8_t threshold = 0;  // pixels strictly above this become points
  std::uint64_t seed = 0;
  std::size_t limit = 0;       // 0 keeps every sample
};

/// Above-threshold pixels become 2-D points. Pixel (r, c) maps to (c/(W-1) - 0.5, 0.5 - r/(H-1)),
/// so x grows rightward and y upward inside [-0.5, 0.5]^2.
inline PointCloud image_to_points(std::span<const std::uint8_t> pixels, int rows, int cols,
                                  std::uint8_t threshold = 0) {
  if (rows < 1 || cols < 1) throw InvalidInput("image_to_points: image must be at least 1x1");
  if (pixels.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw InvalidInput("image_to_points: pixel buffer does not match H*W");
  const double sx = cols > 1 ? 1.0 / (cols - 1) : 0.0;
  const double sy = rows > 1 ? 1.0 / (rows - 1) : 0.0;
  std::vector<double> coords;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (pixels[static_cast<std::size_t>(r) * cols + c] > threshold) {
        coords.push_back(cols > 1 ? c * sx - 0.5 : 0.0);
        coords.push_back(rows > 1 ? 0.5 - r * sy : 0.0);
      }
  if (coords.empty()) throw InvalidInput("image_to_points: no pixel above threshold " + std::to_string(threshold));
  PointCloud cloud;
  cloud.points = Eigen::Map<const PointMatrix>(coords.data(), static_cast<Eigen::Index>(coords.size() / 2), 2);
  return cloud;
}

/// Builds a dataset from MNIST image and label tensors: threshold, resample to a fixed size,
/// then build each cloud's graph once.
inline LabeledDataset mnist_dataset(const io::IdxTensor& images, const io::IdxTensor& labels,
                                    const IngestOptions& opt, std::string split) {
  if (images.dims.size() != 3) throw FormatError("MNIST images must be a rank-3 IDX tensor");
  if (labels.dims.size() != 1) throw FormatError("MNIST labels must be a rank-1 IDX tensor");
  if (images.count() != labels.count()) throw FormatError("MNIST image and label counts differ");
  const int rows = static_cast<int>(images.dims[1]);
  const int cols = static_cast<int>(images.dims[2]);
  std::size_t count = images.count();
  if (opt.limit > 0 && opt.limit < count) count = opt.limit;
  if (count == 0) throw InvalidInput("MNIST dataset is empty");

  const std::uint64_t split_seed = splitmix64(opt.seed ^ stable_hash(split));
  LabeledDataset ds;
  ds.num_classes = 10;
  ds.split = std::move(split);
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = labels.data[i];
    if (label >= ds.num_classes) throw FormatError("MNIST label " + std::to_string(label) + " out of range");
    PointCloud cloud = image_to_points(images.item(i), rows, cols, opt.threshold);
    cloud = resample_fixed(cloud, opt.points, derive_seed(split_seed, Stream::resample, i));
    cloud.label = label;
    NeighborGraph graph = build_knn_graph(cloud, opt.k);
    ds.samples.push_back({std::move(cloud), std::move(graph), label});
  }
  return ds;
}

inline LabeledDataset load_mnist(const std::string& images_path, const std::string& labels_path,
                                 const IngestOptions& opt, std::string split) {
  return mnist_dataset(io::read_idx_file(images_path, io::kIdxImagesMagic),
                       io::read_idx_file(labels_path, io::kIdxLabelsMagic), opt, std::move(split));
}

/// Reads a list file of "<xyz path> <label>" lines (paths relative to the list file). Clouds are
/// normalized into the unit ball and resampled.
inline LabeledDataset load_xyz_list(const std::string& list_path, const IngestOptions& opt, std::string split) {
  std::ifstream in(list_path);
  if (!in) throw IoError("cannot open '" + list_path + "'");
  const auto base = std::filesystem::path(list_path).parent_path();
  const std::uint64_t split_seed = splitmix64(opt.seed ^ stable_hash(split));
  LabeledDataset ds;
  ds.split = std::move(split);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream f(line);
    std::string rel;
    int label = -1;
    if (!(f >> rel >> label) || label < 0)
      throw FormatError(list_path + " line " + std::to_string(line_no) + ": expected '<path> <label>'");
    PointCloud cloud = normalize_unit_ball(io::read_xyz((base / rel).string()));
    cloud = resample_fixed(cloud, opt.points, derive_seed(split_seed, Stream::resample, ds.samples.size()));
    cloud.label = label;
    NeighborGraph graph = build_knn_graph(cloud, opt.k);
    ds.num_classes = std::max(ds.num_classes, label + 1);
    ds.samples.push_back({std::move(cloud), std::move(graph), label});
    if (opt.limit > 0 && ds.samples.size() == opt.limit) break;
  }
  if (ds.samples.empty()) throw InvalidInput("dataset list '" + list_path + "' has no samples");
  return ds;
}

}  // namespace kcnet
