// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Self-describing binary container for named 2-D tensors.
//
//   magic "SEGTENS\0" | u32 version | u32 count
//   per tensor: u32 name_len | name | u32 dtype (0 f32, 1 f64)
//               | u64 rows | u64 cols | rows*cols little-endian values

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "segan/errors.hpp"
#include "segan/nn.hpp"

namespace segan {

inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr char kTensorMagic[8] = {'S', 'E', 'G', 'T', 'E', 'N', 'S', '\0'};

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, nn::Mat<T>>>;

namespace detail {

template <typename V>
void put_pod(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get_pod(std::istream& in, const std::string& origin) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw DataError(origin + ": truncated tensor file");
  return v;
}

}  // namespace detail

template <typename T>
void write_tensors(const std::filesystem::path& path, const NamedTensors<T>& tensors) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(kTensorMagic, sizeof(kTensorMagic));
  detail::put_pod<std::uint32_t>(out, kTensorFormatVersion);
  detail::put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    detail::put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_pod<std::uint32_t>(out, std::is_same_v<T, float> ? 0u : 1u);
    detail::put_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    detail::put_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(T)));
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

// Reads every tensor, converting to T. Shapes are validated by the caller.
template <typename T>
std::map<std::string, nn::Mat<T>> read_tensors(const std::filesystem::path& path) {
  const std::string origin = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(origin + ": cannot open for reading");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0) throw DataError(origin + ": bad magic");
  const auto version = detail::get_pod<std::uint32_t>(in, origin);
  if (version != kTensorFormatVersion) {
    throw DataError(origin + ": unsupported format_version " + std::to_string(version));
  }
  const auto count = detail::get_pod<std::uint32_t>(in, origin);
  std::map<std::string, nn::Mat<T>> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::get_pod<std::uint32_t>(in, origin);
    if (name_len > 4096) throw DataError(origin + ": implausible tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto dtype = detail::get_pod<std::uint32_t>(in, origin);
    const auto rows = detail::get_pod<std::uint64_t>(in, origin);
    const auto cols = detail::get_pod<std::uint64_t>(in, origin);
    if (dtype > 1) throw DataError(origin + ": tensor '" + name + "' has unknown dtype " + std::to_string(dtype));
    if (rows * cols > (std::uint64_t{1} << 34)) throw DataError(origin + ": tensor '" + name + "' too large");
    nn::Mat<T> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (dtype == 0) {
      nn::Mat<float> raw(m.rows(), m.cols());
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
      m = raw.cast<T>();
    } else {
      nn::Mat<double> raw(m.rows(), m.cols());
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(double)));
      m = raw.cast<T>();
    }
    if (!in) throw DataError(origin + ": truncated data for tensor '" + name + "'");
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

}  // namespace segan
