// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Inference: noisy utterance in, the output of every chain stage out.
// Utterances are cut into non-overlapping segments, each segment runs
// through the chain once, and each stage's segments are stitched back.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "segan/chain.hpp"
#include "segan/checkpoint.hpp"
#include "segan/corpus.hpp"
#include "segan/errors.hpp"
#include "segan/rng.hpp"
#include "segan/signal.hpp"
#include "segan/wav.hpp"

namespace segan {

struct EnhanceOptions {
  std::uint64_t seed = 0;
  bool zero_latent = false;
};

struct EnhancementResult {
  Waveform final;
  std::vector<Waveform> per_stage;  // per_stage.back() == final
  std::string source_id;
  std::string checkpoint_id;
};

inline std::uint64_t file_seed(std::uint64_t run_seed, const std::string& source_id) {
  return derive_seed(run_seed, "enhance:file:" + source_id);
}

// Chain is anything exposing n_stages(), spec() and
// forward(const Mat<T>& noisy, const std::vector<Mat<T>>& latents).
template <typename T, typename Chain>
EnhancementResult enhance(const Chain& chain, const Waveform& noisy, const EnhanceOptions& options,
                          const std::string& source_id = {}, const std::string& checkpoint_id = {}) {
  if (noisy.rate != kSampleRate) {
    throw DataError(source_id + ": sample rate " + std::to_string(noisy.rate) + " Hz, expected " +
                    std::to_string(kSampleRate));
  }
  const GeneratorSpec& spec = chain.spec();
  const int n_stages = chain.n_stages();
  const auto total = static_cast<std::int64_t>(noisy.size());
  const std::vector<double> emphasized = preemphasize(std::span<const double>(noisy.samples));
  const std::vector<Segment> segments = segment_for_inference(emphasized, spec.input_length);

  std::vector<std::vector<Segment>> stage_segments(static_cast<std::size_t>(n_stages));
  Rng rng(options.seed);
  for (const Segment& seg : segments) {
    Mat<T> x(1, spec.input_length);
    for (std::int64_t i = 0; i < spec.input_length; ++i) x(0, i) = static_cast<T>(seg.samples[static_cast<std::size_t>(i)]);
    std::vector<Mat<T>> latents;
    for (int n = 0; n < n_stages; ++n) {
      latents.push_back(options.zero_latent ? Mat<T>(Mat<T>::Zero(spec.code_channels(), spec.code_length()))
                                            : sample_latent<T>(spec, rng));
    }
    const std::vector<Mat<T>> outputs = chain.forward(x, latents);
    for (int n = 0; n < n_stages; ++n) {
      const Mat<T>& y = outputs[static_cast<std::size_t>(n)];
      Segment out{std::vector<double>(static_cast<std::size_t>(spec.input_length)), seg.source_offset, seg.pad_length};
      for (std::int64_t i = 0; i < spec.input_length; ++i) out.samples[static_cast<std::size_t>(i)] = static_cast<double>(y(0, i));
      stage_segments[static_cast<std::size_t>(n)].push_back(std::move(out));
    }
  }

  EnhancementResult r;
  r.source_id = source_id;
  r.checkpoint_id = checkpoint_id;
  for (const auto& segs : stage_segments) {
    const std::vector<double> joined = reassemble(segs, total);
    r.per_stage.push_back({deemphasize(std::span<const double>(joined)), kSampleRate});
  }
  r.final = r.per_stage.back();
  return r;
}

struct IndexEntry {
  std::string source_id;
  std::string stage;  // "1".."N" or "final"
  std::string path;   // relative to the index directory
};

struct EnhancedIndex {
  std::filesystem::path base_dir;
  std::string checkpoint_id;
  std::vector<IndexEntry> entries;
};

inline std::string format_index(const std::vector<IndexEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += e.source_id + "\t" + e.stage + "\t" + e.path + "\n";
  return out;
}

inline EnhancedIndex read_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open enhanced index");
  EnhancedIndex idx;
  idx.base_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 3) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
    idx.entries.push_back({f[0], f[1], f[2]});
  }
  return idx;
}

struct BatchInput {
  std::string source_id;
  std::filesystem::path noisy_path;
};

inline std::vector<BatchInput> batch_inputs(const Manifest& m, Split split) {
  std::vector<BatchInput> out;
  for (const auto& e : m.select(split)) out.push_back({e.source_id, m.resolve(e.noisy_path)});
  return out;
}

struct BatchEnhanceOptions {
  std::uint64_t seed = 0;
  bool zero_latent = false;
  bool per_stage = true;  // false keeps only the final stage's file
  int workers = 1;
  std::string checkpoint_id;
};

struct BatchEnhanceSummary {
  std::vector<IndexEntry> index;
  std::vector<std::string> diagnostics;
  std::size_t processed = 0;
  std::size_t failed = 0;
};

// Writes <out>/<id>.stage<k>.wav for every stage, <out>/final/<id>.wav and
// <out>/index.tsv. Inputs that cannot be read are skipped and counted.
template <typename T, typename Chain>
BatchEnhanceSummary batch_enhance(const Chain& chain, const std::vector<BatchInput>& inputs,
                                  const std::filesystem::path& out_dir, const BatchEnhanceOptions& options) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "final", ec);
  if (ec) throw DataError(out_dir.string() + ": cannot create output directory: " + ec.message());

  const int n_stages = chain.n_stages();
  std::vector<std::vector<IndexEntry>> per_input(inputs.size());
  std::vector<std::string> errors(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      const BatchInput& in = inputs[i];
      try {
        const Waveform noisy = read_wav(in.noisy_path);
        const EnhancementResult r =
            enhance<T>(chain, noisy, {file_seed(options.seed, in.source_id), options.zero_latent}, in.source_id,
                       options.checkpoint_id);
        for (int n = 0; n < n_stages; ++n) {
          if (!options.per_stage && n != n_stages - 1) continue;
          const std::string name = in.source_id + ".stage" + std::to_string(n + 1) + ".wav";
          write_wav(out_dir / name, r.per_stage[static_cast<std::size_t>(n)]);
          per_input[i].push_back({in.source_id, std::to_string(n + 1), name});
        }
        const std::string final_name = "final/" + in.source_id + ".wav";
        write_wav(out_dir / final_name, r.final);
        per_input[i].push_back({in.source_id, "final", final_name});
      } catch (const Error& e) {
        errors[i] = in.source_id + ": " + e.what();
        per_input[i].clear();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(inputs.size())));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BatchEnhanceSummary s;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!errors[i].empty()) {
      s.diagnostics.push_back(errors[i]);
      ++s.failed;
      continue;
    }
    ++s.processed;
    s.index.insert(s.index.end(), per_input[i].begin(), per_input[i].end());
  }
  detail::write_text(out_dir / "index.tsv", format_index(s.index));
  return s;
}

}  // namespace segan
