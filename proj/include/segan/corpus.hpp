// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Corpus construction and ingestion: a synthetic desk-scale stand-in for
// a clean/noisy speech database, TSV manifests, and deterministic
// minibatch iteration over 50%-overlapping training segments.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "segan/config.hpp"
#include "segan/errors.hpp"
#include "segan/rng.hpp"
#include "segan/signal.hpp"
#include "segan/wav.hpp"

namespace segan {

namespace fs = std::filesystem;

enum class Split { kTrain, kTest };

inline std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ConfigError("split", "expected train or test, got '" + s + "'");
}

struct ManifestEntry {
  std::string source_id;
  std::string clean_path;  // relative to the manifest directory
  std::string noisy_path;
  std::string noise_type;
  double snr_db = 0.0;
  Split split = Split::kTrain;
  std::int64_t noise_crop_offset = 0;
};

struct Manifest {
  fs::path base_dir;  // directory the relative paths resolve against
  std::vector<ManifestEntry> entries;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
  std::vector<ManifestEntry> select(Split split) const {
    std::vector<ManifestEntry> out;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                 [&](const ManifestEntry& e) { return e.split == split; });
    return out;
  }
};

inline const char* kManifestHeader = "source_id\tclean_path\tnoisy_path\tnoise_type\tsnr_db\tsplit\tnoise_crop_offset";

inline std::string format_manifest(const Manifest& m) {
  std::ostringstream out;
  out << kManifestHeader << "\n";
  for (const auto& e : m.entries) {
    out << e.source_id << '\t' << e.clean_path << '\t' << e.noisy_path << '\t' << e.noise_type << '\t'
        << format_double(e.snr_db) << '\t' << to_string(e.split) << '\t' << e.noise_crop_offset << "\n";
  }
  return out.str();
}

inline void write_manifest(const fs::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << format_manifest(m);
  if (!out) throw DataError(path.string() + ": write failed");
}

inline Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open manifest");
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != kManifestHeader) throw DataError(path.string() + ": unexpected manifest header");
      continue;
    }
    const auto f = split(line, '\t');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 7) throw DataError(where + ": expected 7 tab-separated fields");
    try {
      ManifestEntry e;
      e.source_id = f[0];
      e.clean_path = f[1];
      e.noisy_path = f[2];
      e.noise_type = f[3];
      e.snr_db = KeyValueConfig::parse_double("snr_db", f[4]);
      e.split = parse_split(f[5]);
      e.noise_crop_offset = KeyValueConfig::parse_int<std::int64_t>("noise_crop_offset", f[6]);
      m.entries.push_back(std::move(e));
    } catch (const ConfigError& err) {
      throw DataError(where + ": " + err.what());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct CorpusSpec {
  int n_speakers_train = 2;
  int n_speakers_test = 1;
  int utterances_per_condition = 1;
  std::vector<std::string> noise_types{"white", "pink", "babble", "hum"};
  std::vector<double> train_snrs_db{15, 10, 5, 0};
  std::vector<double> test_snrs_db{17.5, 12.5, 7.5, 2.5};
  double utterance_seconds = 1.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_speakers_train < 0) throw ConfigError("n_speakers_train", "must be non-negative");
    if (n_speakers_test < 0) throw ConfigError("n_speakers_test", "must be non-negative");
    if (n_speakers_train + n_speakers_test < 1) throw ConfigError("n_speakers_train", "need at least one speaker");
    if (utterances_per_condition < 1) throw ConfigError("utterances_per_condition", "must be at least 1");
    if (noise_types.empty()) throw ConfigError("noise_types", "must not be empty");
    for (const auto& n : noise_types) {
      if (n != "white" && n != "pink" && n != "babble" && n != "hum") {
        throw ConfigError("noise_types", "unknown noise type '" + n + "'");
      }
    }
    if (n_speakers_train > 0 && train_snrs_db.empty()) throw ConfigError("train_snrs_db", "must not be empty");
    if (n_speakers_test > 0 && test_snrs_db.empty()) throw ConfigError("test_snrs_db", "must not be empty");
    if (!(utterance_seconds > 0.0)) throw ConfigError("utterance_seconds", "must be positive");
  }
};

// Reads "corpus.*" keys; seed is required.
inline CorpusSpec corpus_spec_from_config(const KeyValueConfig& kv) {
  CorpusSpec s;
  s.seed = kv.get_int<std::uint64_t>("corpus.seed");
  s.n_speakers_train = kv.get_int<int>("corpus.n_speakers_train", s.n_speakers_train);
  s.n_speakers_test = kv.get_int<int>("corpus.n_speakers_test", s.n_speakers_test);
  s.utterances_per_condition = kv.get_int<int>("corpus.utterances_per_condition", s.utterances_per_condition);
  s.noise_types = kv.get_list("corpus.noise_types", s.noise_types);
  auto numbers = [&](const std::string& key, std::vector<double> fallback) {
    if (!kv.has(key)) return fallback;
    std::vector<double> out;
    for (const auto& v : kv.get_list(key)) out.push_back(KeyValueConfig::parse_double(key, v));
    return out;
  };
  s.train_snrs_db = numbers("corpus.train_snrs_db", s.train_snrs_db);
  s.test_snrs_db = numbers("corpus.test_snrs_db", s.test_snrs_db);
  s.utterance_seconds = kv.get_double("corpus.utterance_seconds", s.utterance_seconds);
  s.validate();
  return s;
}

inline std::string speaker_id(int speaker) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%02d", speaker);
  return buf;
}

inline std::string speaker_of(const std::string& source_id) { return source_id.substr(0, source_id.find('_')); }

// Harmonic complex with a per-speaker pitch range, syllable-rate amplitude
// envelopes, moving formant-like resonances and silent gaps.
inline std::vector<double> synth_speech(int speaker, int utterance, std::size_t length, std::uint64_t seed) {
  Rng spk_rng = make_rng(seed, "corpus:speaker:" + std::to_string(speaker));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double base_f0 = 95.0 + 130.0 * unit(spk_rng);
  const double formant_shift = 0.85 + 0.3 * unit(spk_rng);

  Rng rng = make_rng(seed, "corpus:utterance:" + std::to_string(speaker) + ":" + std::to_string(utterance));
  std::vector<double> out(length, 0.0);
  const double fs = kSampleRate;
  std::size_t pos = static_cast<std::size_t>((0.05 + 0.1 * unit(rng)) * fs);
  while (pos < length) {
    const auto syl_len = static_cast<std::size_t>((0.12 + 0.2 * unit(rng)) * fs);
    const double f0 = base_f0 * (0.85 + 0.3 * unit(rng));
    const double glide = (unit(rng) - 0.5) * 0.3;
    const double f1 = formant_shift * (300.0 + 500.0 * unit(rng));
    const double f2 = formant_shift * (900.0 + 1300.0 * unit(rng));
    const double level = 0.5 + 0.5 * unit(rng);
    double phase = 0.0;
    for (std::size_t i = 0; i < syl_len && pos + i < length; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(syl_len);
      const double f = f0 * (1.0 + glide * u + 0.02 * std::sin(2.0 * std::numbers::pi * 5.0 * i / fs));
      phase += 2.0 * std::numbers::pi * f / fs;
      double v = 0.0;
      for (int k = 1; k * f < 4000.0; ++k) {
        const double hk = k * f;
        const double g1 = 1.0 / (1.0 + std::pow((hk - f1) / 120.0, 2));
        const double g2 = 0.6 / (1.0 + std::pow((hk - f2) / 180.0, 2));
        v += (0.15 / k + g1 + g2) * std::sin(k * phase);
      }
      const double env = std::sin(std::numbers::pi * u);
      out[pos + i] += level * env * env * v;
    }
    pos += syl_len + static_cast<std::size_t>((0.02 + 0.15 * unit(rng)) * fs);
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : out) v *= 0.25 / peak;
  }
  return out;
}

inline std::vector<double> synth_noise(const std::string& type, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(length, 0.0);
  if (type == "white") {
    for (double& v : out) v = normal(rng);
  } else if (type == "pink") {
    // Paul Kellet's refined pink filter applied to white noise.
    double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
    for (double& v : out) {
      const double w = normal(rng);
      b0 = 0.99886 * b0 + w * 0.0555179;
      b1 = 0.99332 * b1 + w * 0.0750759;
      b2 = 0.96900 * b2 + w * 0.1538520;
      b3 = 0.86650 * b3 + w * 0.3104856;
      b4 = 0.55000 * b4 + w * 0.5329522;
      b5 = -0.7616 * b5 - w * 0.0168980;
      v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
      b6 = w * 0.115926;
    }
  } else if (type == "babble") {
    std::uniform_int_distribution<int> talker(1000, 100000);
    for (int k = 0; k < 6; ++k) {
      const auto voice = synth_speech(talker(rng), k, length, seed);
      for (std::size_t i = 0; i < length; ++i) out[i] += voice[i];
    }
    for (double& v : out) v += 0.01 * normal(rng);
  } else if (type == "hum") {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double mains = unit(rng) < 0.5 ? 50.0 : 60.0;
    double phases[8];
    for (double& p : phases) p = 2.0 * std::numbers::pi * unit(rng);
    for (std::size_t i = 0; i < length; ++i) {
      const double t = static_cast<double>(i) / kSampleRate;
      double v = 0.0;
      for (int k = 1; k <= 8; ++k) v += std::sin(2.0 * std::numbers::pi * mains * k * t + phases[k - 1]) / k;
      out[i] = v + 0.05 * normal(rng);
    }
  } else {
    throw ConfigError("noise_types", "unknown noise type '" + type + "'");
  }
  return out;
}

inline std::string snr_tag(double snr) {
  std::string s = format_double(snr);
  std::replace(s.begin(), s.end(), '.', 'p');
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

// Generates clean utterances and noisy mixtures for every (noise, SNR)
// condition of the speaker's split, writes WAVs under out_dir and returns
// the manifest (also written to out_dir/manifest.tsv).
inline Manifest build_synthetic_corpus(const CorpusSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "clean", ec);
  fs::create_directories(out_dir / "noisy", ec);
  if (ec) throw DataError(out_dir.string() + ": cannot create corpus directories: " + ec.message());

  Manifest m;
  m.base_dir = out_dir;
  const auto length = static_cast<std::size_t>(std::llround(spec.utterance_seconds * kSampleRate));
  const int n_speakers = spec.n_speakers_train + spec.n_speakers_test;
  for (int spk = 0; spk < n_speakers; ++spk) {
    const Split split = spk < spec.n_speakers_train ? Split::kTrain : Split::kTest;
    const auto& snrs = split == Split::kTrain ? spec.train_snrs_db : spec.test_snrs_db;
    for (int utt = 0; utt < spec.utterances_per_condition; ++utt) {
      char utt_id[32];
      std::snprintf(utt_id, sizeof(utt_id), "_u%03d", utt);
      const std::string base = speaker_id(spk) + utt_id;
      const std::string clean_rel = "clean/" + base + ".wav";
      Waveform clean{quantize_waveform(synth_speech(spk, utt, length, spec.seed)), kSampleRate};
      write_wav(out_dir / clean_rel, clean);
      for (const auto& noise_type : spec.noise_types) {
        const std::uint64_t noise_seed = derive_seed(spec.seed, "corpus:noise:" + base + ":" + noise_type);
        Waveform noise{synth_noise(noise_type, length + kSampleRate / 2, noise_seed), kSampleRate};
        for (double snr : snrs) {
          const std::string id = base + "_" + noise_type + "_" + snr_tag(snr);
          const Mixture mix = mix_at_snr(clean, noise, snr, derive_seed(spec.seed, "corpus:crop:" + id));
          double peak = 0.0;
          for (double v : mix.noisy.samples) peak = std::max(peak, std::abs(v));
          if (peak >= 1.0) throw DataError(id + ": mixture at " + format_double(snr) + " dB would clip");
          const std::string noisy_rel = "noisy/" + id + ".wav";
          write_wav(out_dir / noisy_rel, mix.noisy);
          m.entries.push_back({id, clean_rel, noisy_rel, noise_type, snr, split, mix.crop_offset});
        }
      }
    }
  }
  write_manifest(out_dir / "manifest.tsv", m);
  return m;
}

// ---------------------------------------------------------------------------
// Ingestion of user-supplied corpora

struct IngestResult {
  Manifest manifest;
  std::vector<std::string> diagnostics;
};

// Pairs <clean_dir>/<name>.wav with <noisy_dir>/<name>.wav. Pairs that fail
// validation (format, rate, finiteness, equal length) are reported and
// skipped. Paths are stored relative to manifest_dir.
inline IngestResult ingest_corpus(const fs::path& clean_dir, const fs::path& noisy_dir, Split split,
                                  const fs::path& manifest_dir) {
  if (!fs::is_directory(clean_dir)) throw DataError(clean_dir.string() + ": not a directory");
  if (!fs::is_directory(noisy_dir)) throw DataError(noisy_dir.string() + ": not a directory");
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(clean_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") names.insert(e.path().stem().string());
  }
  IngestResult r;
  r.manifest.base_dir = manifest_dir;
  int pairs = 0;
  for (const auto& name : names) {
    const fs::path clean_path = clean_dir / (name + ".wav");
    const fs::path noisy_path = noisy_dir / (name + ".wav");
    if (!fs::exists(noisy_path)) {
      r.diagnostics.push_back(name + ": no noisy counterpart in " + noisy_dir.string());
      continue;
    }
    ++pairs;
    try {
      const Waveform clean = read_wav(clean_path);
      const Waveform noisy = read_wav(noisy_path);
      if (clean.size() != noisy.size()) {
        r.diagnostics.push_back(name + ": length mismatch (clean " + std::to_string(clean.size()) + ", noisy " +
                                std::to_string(noisy.size()) + ")");
        continue;
      }
      if (clean.empty()) {
        r.diagnostics.push_back(name + ": empty file");
        continue;
      }
      std::vector<double> noise(clean.size());
      for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = noisy[i] - clean[i];
      const double p_noise = mean_power(noise);
      const double snr = p_noise > 0.0 ? 10.0 * std::log10(mean_power(clean.samples) / p_noise)
                                       : std::numeric_limits<double>::infinity();
      r.manifest.entries.push_back({name, fs::relative(fs::absolute(clean_path), fs::absolute(manifest_dir)).string(),
                                    fs::relative(fs::absolute(noisy_path), fs::absolute(manifest_dir)).string(),
                                    "unknown", snr, split, 0});
    } catch (const DataError& e) {
      r.diagnostics.push_back(name + ": " + e.what());
    }
  }
  if (pairs == 0) throw DataError("ingest: no clean/noisy pairs found");
  return r;
}

// ---------------------------------------------------------------------------
// Training batches

struct LoadedPair {
  std::string source_id;
  Waveform clean;
  Waveform noisy;
};

struct SegmentPair {
  std::string source_id;
  Segment clean;  // preemphasized
  Segment noisy;  // preemphasized, cut at the same offset
};

inline std::vector<LoadedPair> load_pairs(const Manifest& m, Split split) {
  std::vector<LoadedPair> out;
  for (const auto& e : m.select(split)) {
    LoadedPair p{e.source_id, read_wav(m.resolve(e.clean_path)), read_wav(m.resolve(e.noisy_path))};
    if (p.clean.size() != p.noisy.size() || p.clean.empty()) {
      throw DataError(e.source_id + ": clean/noisy lengths differ or are empty");
    }
    out.push_back(std::move(p));
  }
  return out;
}

// All training segments of one epoch in shuffled order, materialized one
// batch at a time.
class BatchPlan {
 public:
  BatchPlan(const std::vector<LoadedPair>& pairs, std::size_t batch_size, std::uint64_t epoch_seed,
            std::int64_t length = kSegmentLength, double overlap = 0.5)
      : pairs_(&pairs), batch_size_(batch_size), length_(length) {
    if (pairs.empty()) throw DataError("iterate_batches: no training pairs");
    if (batch_size < 1) throw ConfigError("batch_size", "must be at least 1");
    const std::int64_t hop = overlap_hop(length, overlap);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto count = training_segment_count(static_cast<std::int64_t>(pairs[p].clean.size()), length, hop);
      for (std::int64_t i = 0; i < count; ++i) order_.push_back({p, i * hop});
    }
    Rng rng(epoch_seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }

  std::size_t segment_count() const { return order_.size(); }
  std::size_t size() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

  std::vector<SegmentPair> batch(std::size_t i) const {
    std::vector<SegmentPair> out;
    const std::size_t begin = i * batch_size_;
    const std::size_t end = std::min(order_.size(), begin + batch_size_);
    for (std::size_t k = begin; k < end; ++k) {
      const auto& [p, offset] = order_[k];
      const LoadedPair& src = (*pairs_)[p];
      Segment c = detail::cut_window(src.clean.samples, offset, length_);
      Segment n = detail::cut_window(src.noisy.samples, offset, length_);
      c.samples = preemphasize(std::span<const double>(c.samples));
      n.samples = preemphasize(std::span<const double>(n.samples));
      out.push_back({src.source_id, std::move(c), std::move(n)});
    }
    return out;
  }

 private:
  const std::vector<LoadedPair>* pairs_;
  std::size_t batch_size_;
  std::int64_t length_;
  std::vector<std::pair<std::size_t, std::int64_t>> order_;
};

inline std::vector<std::vector<SegmentPair>> iterate_batches(const std::vector<LoadedPair>& pairs,
                                                             std::size_t batch_size, std::uint64_t epoch_seed,
                                                             std::int64_t length = kSegmentLength) {
  BatchPlan plan(pairs, batch_size, epoch_seed, length);
  std::vector<std::vector<SegmentPair>> out;
  for (std::size_t i = 0; i < plan.size(); ++i) out.push_back(plan.batch(i));
  return out;
}

}  // namespace segan
