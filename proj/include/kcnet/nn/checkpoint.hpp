#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kcnet/error.hpp"
#include "kcnet/nn/adam.hpp"
#include "kcnet/nn/classifier.hpp"
#include "kcnet/nn/config.hpp"

namespace kcnet::nn {

// Binary container, all integers and reals little-endian:
//   "KCNETCKP" u32 version
//   u32 dim, u32 classes, f64 sigma, i64 epochs_done, i64 optimizer step
//   u32 length + training config as "key = value" lines
//   u32 tensor count, then per tensor: u32 length + name, u8 decay flag, u64 count,
//   count f64 values, count f64 first moments, count f64 second moments
inline constexpr char kCheckpointMagic[8] = {'K', 'C', 'N', 'E', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <class T>
  void put(T value) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
    out_.write(reinterpret_cast<const char*>(&value), sizeof value);
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <class T>
  T get() {
    T value{};
    if (!in_.read(reinterpret_cast<char*>(&value), sizeof value))
      throw FormatError("checkpoint: truncated at byte offset " + std::to_string(offset_));
    offset_ += sizeof value;
    return value;
  }
  std::string get_string(std::size_t max_len = 1 << 20) {
    const auto len = get<std::uint32_t>();
    if (len > max_len) throw FormatError("checkpoint: implausible string length at byte offset " + std::to_string(offset_));
    std::string s(len, '\0');
    if (!in_.read(s.data(), len)) throw FormatError("checkpoint: truncated string at byte offset " + std::to_string(offset_));
    offset_ += len;
    return s;
  }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

inline std::string settings_text(const TrainingConfig& cfg) {
  std::string text;
  for (const auto& [k, v] : training_settings(cfg)) text += k + " = " + v + "\n";
  return text;
}

inline TrainingConfig parse_settings_text(const std::string& text) {
  TrainingConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    if (!apply_training_setting(cfg, key, line.substr(eq + 3)))
      throw FormatError("checkpoint: unknown config key '" + key + "'");
  }
  return cfg;
}

}  // namespace detail

template <class Scalar>
void save_checkpoint(std::ostream& out, const Classifier<Scalar>& net, const OptimizerState& state, int epochs_done) {
  ClassifierParams<Scalar> params = net.params();
  const auto views = params.views();
  if (!state.first_moment.empty() && state.first_moment.size() != views.size())
    throw InvalidInput("save_checkpoint: optimizer state does not match the network");
  detail::Writer w(out);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(net.dim()));
  w.put(static_cast<std::uint32_t>(net.num_classes()));
  w.put(params.has_kernels() ? params.kernels.sigma : 0.0);
  w.put(static_cast<std::int64_t>(epochs_done));
  w.put(static_cast<std::int64_t>(state.step));
  w.put_string(detail::settings_text(net.config()));
  w.put(static_cast<std::uint32_t>(views.size()));
  for (std::size_t t = 0; t < views.size(); ++t) {
    const auto& v = views[t];
    w.put_string(v.name);
    w.put(static_cast<std::uint8_t>(v.weight_decay ? 1 : 0));
    w.put(static_cast<std::uint64_t>(v.value.size()));
    for (Scalar x : v.value) w.put(static_cast<double>(x));
    for (std::size_t i = 0; i < v.value.size(); ++i) w.put(state.first_moment.empty() ? 0.0 : state.first_moment[t][i]);
    for (std::size_t i = 0; i < v.value.size(); ++i) w.put(state.second_moment.empty() ? 0.0 : state.second_moment[t][i]);
  }
  if (!out) throw IoError("checkpoint: write failed");
}

template <class Scalar>
void save_checkpoint(const std::string& path, const Classifier<Scalar>& net, const OptimizerState& state,
                     int epochs_done) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  save_checkpoint(out, net, state, epochs_done);
}

template <class Scalar>
struct LoadedCheckpoint {
  Classifier<Scalar> net;
  OptimizerState state;
  int epochs_done = 0;
};

template <class Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw FormatError("checkpoint: bad magic at byte offset 0");
  detail::Reader r(in);
  if (const auto version = r.get<std::uint32_t>(); version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto dim = static_cast<int>(r.get<std::uint32_t>());
  const auto classes = static_cast<int>(r.get<std::uint32_t>());
  const double sigma = r.get<double>();
  const auto epochs_done = static_cast<int>(r.get<std::int64_t>());
  const auto step = r.get<std::int64_t>();
  const TrainingConfig cfg = detail::parse_settings_text(r.get_string());

  Classifier<Scalar> net(cfg, dim, classes, sigma > 0.0 ? sigma : cfg.sigma);
  auto views = net.params().views();
  OptimizerState state = OptimizerState::for_params(views);
  state.step = step;
  if (r.get<std::uint32_t>() != views.size()) throw FormatError("checkpoint: tensor count does not match the network");
  for (std::size_t t = 0; t < views.size(); ++t) {
    const std::string name = r.get_string();
    if (name != views[t].name) throw FormatError("checkpoint: expected tensor '" + views[t].name + "', found '" + name + "'");
    state.decay[t] = r.get<std::uint8_t>() != 0;
    if (r.get<std::uint64_t>() != views[t].value.size()) throw FormatError("checkpoint: size mismatch for '" + name + "'");
    for (auto& x : views[t].value) x = static_cast<Scalar>(r.get<double>());
    for (auto& m : state.first_moment[t]) m = r.get<double>();
    for (auto& v : state.second_moment[t]) v = r.get<double>();
  }
  return {std::move(net), std::move(state), epochs_done};
}

template <class Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_checkpoint<Scalar>(in);
}

}  // namespace kcnet::nn
