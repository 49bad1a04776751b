// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// 16-bit PCM mono RIFF/WAVE reading and writing.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "segan/errors.hpp"
#include "segan/signal.hpp"

namespace segan {

namespace detail {

inline std::uint32_t read_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_le16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

struct WavInfo {
  int rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::size_t frames = 0;
};

// Parses a RIFF/WAVE buffer. Only PCM 16-bit mono at 16 kHz is accepted;
// anything else raises DataError naming the offending property.
inline Waveform decode_wav(std::span<const unsigned char> bytes, const std::string& origin = "<memory>",
                           WavInfo* info_out = nullptr) {
  auto fail = [&](const std::string& msg) { return DataError(origin + ": " + msg); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  WavInfo info;
  int format = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = detail::read_le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw fail("truncated fmt chunk");
      format = detail::read_le16(bytes.data() + body);
      info.channels = detail::read_le16(bytes.data() + body + 2);
      info.rate = static_cast<int>(detail::read_le32(bytes.data() + body + 4));
      info.bits_per_sample = detail::read_le16(bytes.data() + body + 14);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min(size, bytes.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  if (format == 0) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  info.frames = info.channels > 0 && info.bits_per_sample > 0
                    ? data_size / (static_cast<std::size_t>(info.channels) * (info.bits_per_sample / 8))
                    : 0;
  if (info_out != nullptr) *info_out = info;
  if (format != 1) throw fail("unsupported format tag " + std::to_string(format) + " (need PCM)");
  if (info.bits_per_sample != 16) throw fail("unsupported bit depth " + std::to_string(info.bits_per_sample));
  if (info.channels != 1) throw fail("expected mono, got " + std::to_string(info.channels) + " channels");
  if (info.rate != kSampleRate) {
    throw fail("sample rate " + std::to_string(info.rate) + " Hz, expected " + std::to_string(kSampleRate));
  }
  Waveform w;
  w.samples.resize(data_size / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto s = static_cast<std::int16_t>(detail::read_le16(data + 2 * i));
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

inline Waveform read_wav(const std::filesystem::path& path, WavInfo* info_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string(), info_out);
}

inline std::int16_t quantize_sample(double x) {
  const double clipped = std::clamp(x, -1.0, 1.0);
  const double scaled = std::nearbyint(clipped * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

// Samples outside [-1, 1] are clipped before quantization.
inline std::string encode_wav(std::span<const double> samples, int rate = kSampleRate) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_le32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_le32(out, 16);
  detail::put_le16(out, 1);
  detail::put_le16(out, 1);
  detail::put_le32(out, static_cast<std::uint32_t>(rate));
  detail::put_le32(out, static_cast<std::uint32_t>(rate * 2));
  detail::put_le16(out, 2);
  detail::put_le16(out, 16);
  out += "data";
  detail::put_le32(out, data_bytes);
  for (double x : samples) detail::put_le16(out, static_cast<std::uint16_t>(quantize_sample(x)));
  return out;
}

inline void write_wav(const std::filesystem::path& path, std::span<const double> samples, int rate = kSampleRate) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  const std::string bytes = encode_wav(samples, rate);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) { write_wav(path, w.samples, w.rate); }

// Round-trips samples through 16-bit quantization without touching disk.
inline std::vector<double> quantize_waveform(std::span<const double> samples) {
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [](double x) { return static_cast<double>(quantize_sample(x)) / 32768.0; });
  return out;
}

}  // namespace segan
