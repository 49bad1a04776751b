// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Deterministic waveform arithmetic shared by training, inference and
// evaluation: preemphasis, fixed-length segmentation, SNR mixing.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segan/errors.hpp"
#include "segan/rng.hpp"

namespace segan {

inline constexpr int kSampleRate = 16000;
inline constexpr std::int64_t kSegmentLength = 16384;
inline constexpr double kPreemphasis = 0.95;

struct Waveform {
  std::vector<double> samples;
  int rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double operator[](std::size_t i) const { return samples[i]; }
};

// A fixed-length window cut from a waveform. pad_length counts the zeros
// appended at the end when the window ran past the source.
struct Segment {
  std::vector<double> samples;
  std::int64_t source_offset = 0;
  std::int64_t pad_length = 0;

  std::size_t size() const { return samples.size(); }
};

inline void require_finite(std::span<const double> x, const char* what) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw DataError(std::string(what) + ": non-finite sample at index " + std::to_string(i));
    }
  }
}

inline void require_coef(double coef) {
  if (!(coef >= 0.0 && coef < 1.0)) {
    throw ConfigError("coef", "emphasis coefficient must lie in [0, 1), got " + std::to_string(coef));
  }
}

inline std::vector<double> preemphasize(std::span<const double> x, double coef = kPreemphasis) {
  require_coef(coef);
  require_finite(x, "preemphasize");
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  out[0] = x[0];
  for (std::size_t t = 1; t < x.size(); ++t) out[t] = x[t] - coef * x[t - 1];
  return out;
}

inline std::vector<double> deemphasize(std::span<const double> x, double coef = kPreemphasis) {
  require_coef(coef);
  require_finite(x, "deemphasize");
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  out[0] = x[0];
  for (std::size_t t = 1; t < x.size(); ++t) out[t] = x[t] + coef * out[t - 1];
  return out;
}

inline Waveform preemphasize(const Waveform& w, double coef = kPreemphasis) {
  return {preemphasize(std::span<const double>(w.samples), coef), w.rate};
}

inline Waveform deemphasize(const Waveform& w, double coef = kPreemphasis) {
  return {deemphasize(std::span<const double>(w.samples), coef), w.rate};
}

namespace detail {

inline Segment cut_window(std::span<const double> x, std::int64_t offset, std::int64_t length) {
  Segment s;
  s.source_offset = offset;
  s.samples.assign(static_cast<std::size_t>(length), 0.0);
  const auto total = static_cast<std::int64_t>(x.size());
  const std::int64_t avail = std::clamp<std::int64_t>(total - offset, 0, length);
  std::copy_n(x.begin() + offset, avail, s.samples.begin());
  s.pad_length = length - avail;
  return s;
}

}  // namespace detail

// Number of windows produced by segment_for_training for T samples.
inline std::int64_t training_segment_count(std::int64_t total, std::int64_t length, std::int64_t hop) {
  if (total <= length) return 1;
  return (total - length + hop - 1) / hop + 1;
}

inline std::int64_t overlap_hop(std::int64_t length, double overlap_fraction) {
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw ConfigError("overlap_fraction", "must lie in [0, 1)");
  }
  return std::max<std::int64_t>(1, std::llround(static_cast<double>(length) * (1.0 - overlap_fraction)));
}

inline std::vector<Segment> segment_for_training(std::span<const double> x, std::int64_t length = kSegmentLength,
                                                 double overlap_fraction = 0.5) {
  if (x.empty()) throw DataError("segment_for_training: empty waveform");
  if (length <= 0) throw ConfigError("length", "segment length must be positive");
  const std::int64_t hop = overlap_hop(length, overlap_fraction);
  const std::int64_t count = training_segment_count(static_cast<std::int64_t>(x.size()), length, hop);
  std::vector<Segment> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(detail::cut_window(x, i * hop, length));
  return out;
}

inline std::vector<Segment> segment_for_inference(std::span<const double> x, std::int64_t length = kSegmentLength) {
  if (x.empty()) throw DataError("segment_for_inference: empty waveform");
  if (length <= 0) throw ConfigError("length", "segment length must be positive");
  const auto total = static_cast<std::int64_t>(x.size());
  const std::int64_t count = (total + length - 1) / length;
  std::vector<Segment> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.push_back(detail::cut_window(x, i * length, length));
  return out;
}

// Inverse of segment_for_inference: concatenates the windows and drops the
// trailing padding.
inline std::vector<double> reassemble(std::span<const Segment> segments, std::int64_t original_length) {
  if (segments.empty()) throw DataError("reassemble: no segments");
  if (original_length < 1) throw DataError("reassemble: original_length must be positive");
  const auto length = static_cast<std::int64_t>(segments.front().size());
  const auto count = static_cast<std::int64_t>(segments.size());
  if ((original_length + length - 1) / length != count) {
    throw DataError("reassemble: original_length " + std::to_string(original_length) +
                    " inconsistent with " + std::to_string(count) + " segments of length " +
                    std::to_string(length));
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count * length));
  for (std::int64_t i = 0; i < count; ++i) {
    const Segment& s = segments[static_cast<std::size_t>(i)];
    if (static_cast<std::int64_t>(s.size()) != length) throw DataError("reassemble: segment lengths differ");
    if (s.source_offset != i * length) {
      throw DataError("reassemble: non-contiguous offset " + std::to_string(s.source_offset) + " at segment " +
                      std::to_string(i));
    }
    out.insert(out.end(), s.samples.begin(), s.samples.end());
  }
  if (segments.back().pad_length != count * length - original_length) {
    throw DataError("reassemble: final pad_length does not match original_length");
  }
  out.resize(static_cast<std::size_t>(original_length));
  return out;
}

inline double mean_power(std::span<const double> x) {
  if (x.empty()) throw DataError("mean_power: empty waveform");
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

inline double snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(mean_power(signal) / mean_power(noise));
}

struct Mixture {
  Waveform noisy;
  double noise_gain = 0.0;       // alpha applied to the noise crop
  std::int64_t crop_offset = 0;  // start of the noise crop
};

// Scales a noise crop so that 10*log10(P_clean / P_noise) == snr_db and adds
// it to clean. The crop position is drawn from seed when noise is longer.
inline Mixture mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db, std::uint64_t seed) {
  if (clean.empty()) throw DataError("mix_at_snr: empty clean signal");
  if (noise.size() < clean.size()) {
    throw DataError("mix_at_snr: noise (" + std::to_string(noise.size()) + " samples) shorter than clean (" +
                    std::to_string(clean.size()) + ")");
  }
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db", "must be finite");
  require_finite(clean.samples, "mix_at_snr clean");
  require_finite(noise.samples, "mix_at_snr noise");

  Mixture m;
  const auto slack = static_cast<std::int64_t>(noise.size() - clean.size());
  if (slack > 0) {
    Rng rng(seed);
    m.crop_offset = std::uniform_int_distribution<std::int64_t>(0, slack)(rng);
  }
  std::span<const double> crop(noise.samples.data() + m.crop_offset, clean.size());

  const double p_clean = mean_power(clean.samples);
  const double p_noise = mean_power(crop);
  if (p_clean == 0.0) throw DataError("mix_at_snr: clean signal has zero power");
  if (p_noise == 0.0) throw DataError("mix_at_snr: noise crop has zero power");

  m.noise_gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  m.noisy.rate = clean.rate;
  m.noisy.samples.resize(clean.size());
  for (std::size_t t = 0; t < clean.size(); ++t) m.noisy.samples[t] = clean.samples[t] + m.noise_gain * crop[t];
  return m;
}

}  // namespace segan
