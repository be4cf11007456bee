#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "kcnet/error.hpp"

namespace kcnet::io {

/// Unsigned-byte IDX tensor (the MNIST container). `dims` is outermost first.
struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t count() const { return dims.empty() ? 0 : dims.front(); }
  /// Bytes per outer item (rows*cols for images, 1 for labels).
  std::size_t item_size() const {
    std::size_t s = 1;
    for (std::size_t i = 1; i < dims.size(); ++i) s *= dims[i];
    return s;
  }
  std::span<const std::uint8_t> item(std::size_t i) const { return {data.data() + i * item_size(), item_size()}; }
};

inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;

namespace detail {
inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size())
    throw FormatError("IDX: truncated header at byte offset " + std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}
}  // namespace detail

/// Parses a big-endian IDX buffer holding unsigned bytes. Throws without partial output on
/// a bad magic number or a truncated payload.
inline IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  const std::uint32_t magic = detail::read_be32(bytes, 0);
  if ((magic >> 16) != 0) {
    char hex[11];
    std::snprintf(hex, sizeof hex, "0x%08x", static_cast<unsigned>(magic));
    throw FormatError(std::string("IDX: bad magic ") + hex + " at byte offset 0");
  }
  if (((magic >> 8) & 0xff) != 0x08) throw FormatError("IDX: only unsigned-byte payloads are supported (byte offset 2)");
  const std::uint32_t rank = magic & 0xff;
  if (rank < 1 || rank > 4) throw FormatError("IDX: unsupported rank " + std::to_string(rank) + " at byte offset 3");

  IdxTensor t;
  std::size_t payload = 1;
  for (std::uint32_t d = 0; d < rank; ++d) {
    t.dims.push_back(detail::read_be32(bytes, 4 + 4 * d));
    // Clamp so absurd dimension sizes report as truncation instead of overflowing.
    payload = std::min<std::size_t>(payload * t.dims.back(), bytes.size() + 1);
  }
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header + payload)
    throw FormatError("IDX: payload truncated at byte offset " + std::to_string(bytes.size()) + ", expected " +
                      std::to_string(header + payload) + " bytes");
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                bytes.begin() + static_cast<std::ptrdiff_t>(header + payload));
  return t;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline IdxTensor read_idx_file(const std::string& path, std::uint32_t expected_magic) {
  const auto bytes = read_file_bytes(path);
  if (detail::read_be32(bytes, 0) != expected_magic)
    throw FormatError("IDX '" + path + "': unexpected magic at byte offset 0");
  return parse_idx(bytes);
}

}  // namespace kcnet::io
