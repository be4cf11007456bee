#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kcnet/dataset.hpp"
#include "kcnet/io/idx.hpp"
#include "kcnet/io/ply.hpp"
#include "kcnet/io/xyz.hpp"
#include "oracles.hpp"

using kcnet::PointCloud;
using kcnet::PointMatrix;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> idx_bytes(std::uint32_t magic, std::vector<std::uint32_t> dims, std::vector<std::uint8_t> payload) {
  std::vector<std::uint8_t> b;
  auto put = [&b](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
  };
  put(magic);
  for (auto d : dims) put(d);
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kcnet_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Idx, ParsesImages) {
  std::vector<std::uint8_t> payload(2 * 3 * 4);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<std::uint8_t>(i);
  const auto t = kcnet::io::parse_idx(idx_bytes(0x803, {2, 3, 4}, payload));
  EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{2, 3, 4}));
  EXPECT_EQ(t.count(), 2u);
  EXPECT_EQ(t.item_size(), 12u);
  EXPECT_EQ(t.item(1)[0], 12);
}

TEST(Idx, ParsesLabels) {
  const auto t = kcnet::io::parse_idx(idx_bytes(0x801, {3}, {7, 0, 9}));
  EXPECT_EQ(t.dims.size(), 1u);
  EXPECT_EQ(t.data, (std::vector<std::uint8_t>{7, 0, 9}));
}

TEST(Idx, BadMagicReportsOffset) {
  try {
    kcnet::io::parse_idx(idx_bytes(0x12340803, {1}, {0}));
    FAIL();
  } catch (const kcnet::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("0x12340803"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos);
  }
  EXPECT_THROW(kcnet::io::parse_idx(idx_bytes(0x0d03, {1, 1, 1}, {0})), kcnet::FormatError);
}

TEST(Idx, TruncationThrows) {
  auto bytes = idx_bytes(0x803, {2, 2, 2}, std::vector<std::uint8_t>(8, 1));
  bytes.pop_back();
  try {
    kcnet::io::parse_idx(bytes);
    FAIL();
  } catch (const kcnet::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 23"), std::string::npos);
  }
  EXPECT_THROW(kcnet::io::parse_idx(std::vector<std::uint8_t>{0, 0, 8}), kcnet::FormatError);
  EXPECT_THROW(kcnet::io::parse_idx(idx_bytes(0x803, {0xffffffff, 0xffffffff, 0xffffffff}, {})), kcnet::FormatError);
}

TEST(ImageToPoints, SinglePixel) {
  const std::vector<std::uint8_t> img{200, 0, 0, 0};
  const auto c = kcnet::image_to_points(img, 2, 2);
  ASSERT_EQ(c.size(), 1);
  EXPECT_EQ(c.points(0, 0), -0.5);
  EXPECT_EQ(c.points(0, 1), 0.5);
}

TEST(ImageToPoints, FullSupportCorners) {
  const std::vector<std::uint8_t> img(784, 1);
  const auto c = kcnet::image_to_points(img, 28, 28);
  EXPECT_EQ(c.size(), 784);
  EXPECT_EQ(c.points.col(0).minCoeff(), -0.5);
  EXPECT_EQ(c.points.col(0).maxCoeff(), 0.5);
  EXPECT_EQ(c.points.col(1).minCoeff(), -0.5);
  EXPECT_EQ(c.points.col(1).maxCoeff(), 0.5);
  // Last pixel is bottom-right.
  EXPECT_EQ(c.points.row(783), Eigen::RowVector2d(0.5, -0.5));
}

TEST(ImageToPoints, ThresholdAndErrors) {
  const std::vector<std::uint8_t> img{0, 10, 255, 40};
  EXPECT_EQ(kcnet::image_to_points(img, 2, 2, 10).size(), 2);
  EXPECT_THROW(kcnet::image_to_points(img, 2, 2, 255), kcnet::InvalidInput);
  EXPECT_THROW(kcnet::image_to_points(img, 3, 2), kcnet::InvalidInput);
}

TEST(MnistDataset, BuildsResampledCloudsWithGraphs) {
  std::vector<std::uint8_t> pixels(3 * 4 * 4, 0);
  for (int i = 0; i < 3; ++i)
    for (int p = 0; p <= 5 + i; ++p) pixels[static_cast<std::size_t>(i * 16 + p)] = 90;
  const auto images = kcnet::io::parse_idx(idx_bytes(0x803, {3, 4, 4}, pixels));
  const auto labels = kcnet::io::parse_idx(idx_bytes(0x801, {3}, {4, 1, 9}));
  kcnet::IngestOptions opt;
  opt.points = 12;
  opt.k = 3;
  const auto ds = kcnet::mnist_dataset(images, labels, opt, "train");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.num_classes, 10);
  EXPECT_EQ(ds.samples[2].label, 9);
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.cloud.size(), 12);
    EXPECT_LE(s.cloud.points.cwiseAbs().maxCoeff(), 0.5);
    EXPECT_EQ(s.graph, kcnet::build_knn_graph(s.cloud, 3));
  }
  const auto again = kcnet::mnist_dataset(images, labels, opt, "train");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(again.samples[i].cloud.points, ds.samples[i].cloud.points);
    EXPECT_EQ(again.samples[i].graph, ds.samples[i].graph);
  }
  const auto bad = kcnet::io::parse_idx(idx_bytes(0x801, {3}, {4, 1, 10}));
  EXPECT_THROW(kcnet::mnist_dataset(images, bad, opt, "train"), kcnet::FormatError);
  const auto short_labels = kcnet::io::parse_idx(idx_bytes(0x801, {2}, {4, 1}));
  EXPECT_THROW(kcnet::mnist_dataset(images, short_labels, opt, "train"), kcnet::FormatError);
}

TEST(MnistDataset, DeskSubsetOnDisk) {
  const std::string dir = std::string(KCNET_DATA_DIR) + "/mnist-desk";
  const auto images = kcnet::io::read_idx_file(dir + "/train-images-idx3-ubyte", kcnet::io::kIdxImagesMagic);
  const auto labels = kcnet::io::read_idx_file(dir + "/train-labels-idx1-ubyte", kcnet::io::kIdxLabelsMagic);
  EXPECT_EQ(images.dims, (std::vector<std::uint32_t>{5000, 28, 28}));
  EXPECT_EQ(labels.count(), 5000u);
  const auto test = kcnet::io::read_idx_file(dir + "/t10k-labels-idx1-ubyte", kcnet::io::kIdxLabelsMagic);
  EXPECT_EQ(test.count(), 1000u);
  // Point count before resampling equals the number of above-threshold pixels.
  const auto item = images.item(0);
  const auto lit = std::count_if(item.begin(), item.end(), [](std::uint8_t v) { return v > 0; });
  EXPECT_EQ(kcnet::image_to_points(item, 28, 28).size(), lit);
  EXPECT_THROW(kcnet::io::read_idx_file(dir + "/train-labels-idx1-ubyte", kcnet::io::kIdxImagesMagic),
               kcnet::FormatError);
  EXPECT_THROW(kcnet::io::read_idx_file(dir + "/missing", kcnet::io::kIdxImagesMagic), kcnet::IoError);
}

TEST(Xyz, ReadsSimpleText) {
  std::istringstream in("0 0 0\n1 0 0\n");
  const auto c = kcnet::io::read_xyz(in);
  EXPECT_EQ(c.size(), 2);
  EXPECT_EQ(c.dim(), 3);
  EXPECT_EQ(c.points(1, 0), 1.0);
}

TEST(Xyz, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  const PointCloud cloud(oracle::random_points(rng, 50, 3, 10.0));
  std::stringstream ss;
  kcnet::io::write_xyz(ss, cloud);
  EXPECT_EQ(kcnet::io::read_xyz(ss).points, cloud.points);
}

TEST(Xyz, ErrorsNameTheLine) {
  std::istringstream in("# header\n0 0 0\n1 2\n");
  try {
    kcnet::io::read_xyz(in, 3);
    FAIL();
  } catch (const kcnet::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream junk("0 0 x\n");
  EXPECT_THROW(kcnet::io::read_xyz(junk), kcnet::FormatError);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(kcnet::io::read_xyz(empty), kcnet::FormatError);
  EXPECT_THROW(kcnet::io::read_xyz(std::string("/nonexistent/cloud.xyz")), kcnet::IoError);
}

TEST(Ply, ColorRamp) {
  const std::vector<double> r{0.0, 1.0};
  const auto c = kcnet::io::response_colors(r);
  EXPECT_EQ(c[0], (kcnet::io::Rgb{255, 255, 255}));
  EXPECT_EQ(c[1], (kcnet::io::Rgb{255, 0, 0}));
  const std::vector<double> flat{3.0, 3.0, 3.0};
  for (const auto& col : kcnet::io::response_colors(flat)) EXPECT_EQ(col, (kcnet::io::Rgb{255, 255, 255}));
  const std::vector<double> mid{-2.0, 0.0, 2.0};
  EXPECT_EQ(kcnet::io::response_colors(mid)[1], (kcnet::io::Rgb{255, 128, 128}));
}

TEST(Ply, RoundTrip) {
  std::mt19937_64 rng(2);
  const PointCloud cloud(oracle::random_points(rng, 25, 2, 0.5));
  std::vector<double> responses(25);
  for (auto& v : responses) v = std::uniform_real_distribution<double>(0, 5)(rng);
  const auto dir = scratch_dir("ply");
  const auto path = (dir / "r.ply").string();
  kcnet::io::write_ply_response(path, cloud, responses);
  std::ifstream in(path);
  const auto verts = kcnet::io::read_ply_vertices(in);
  ASSERT_EQ(verts.size(), 25u);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(static_cast<float>(verts[i].position[0]), static_cast<float>(cloud.points(static_cast<Eigen::Index>(i), 0)));
    EXPECT_EQ(verts[i].position[2], 0.0);
    EXPECT_EQ(verts[i].color[0], 255);
    EXPECT_EQ(verts[i].color[1], verts[i].color[2]);
  }
  EXPECT_THROW(kcnet::io::write_ply_response((dir / "missing" / "x.ply").string(), cloud, responses), kcnet::IoError);
  EXPECT_THROW(kcnet::io::write_ply_response(path, cloud, std::vector<double>(3)), kcnet::InvalidInput);
  fs::remove_all(dir);
}

TEST(XyzList, LoadsLabeledClouds) {
  const auto dir = scratch_dir("list");
  std::mt19937_64 rng(3);
  for (int i = 0; i < 3; ++i)
    kcnet::io::write_xyz((dir / ("c" + std::to_string(i) + ".xyz")).string(),
                         PointCloud(oracle::random_points(rng, 30 + i, 3, 4.0)));
  std::ofstream(dir / "list.txt") << "c0.xyz 0\n# comment\nc1.xyz 2\nc2.xyz 1\n";
  kcnet::IngestOptions opt;
  opt.points = 20;
  opt.k = 4;
  const auto ds = kcnet::load_xyz_list((dir / "list.txt").string(), opt, "train");
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.num_classes, 3);
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.cloud.size(), 20);
    EXPECT_LE(s.cloud.points.rowwise().norm().maxCoeff(), 1.0 + 1e-12);
  }
  std::ofstream(dir / "bad.txt") << "c0.xyz\n";
  EXPECT_THROW(kcnet::load_xyz_list((dir / "bad.txt").string(), opt, "train"), kcnet::FormatError);
  fs::remove_all(dir);
}
