// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Synthetic enhanced-output trees for evaluation tests: reference
// utterances plus per-checkpoint directories of degraded copies.

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "segan/enhance.hpp"
#include "segan/metrics.hpp"
#include "segan/wav.hpp"
#include "support.hpp"

namespace segan::testing {

struct RunFixture {
  Manifest manifest;
  std::vector<EnhancedIndex> runs;
};

inline std::vector<double> degraded(const std::vector<double>& x, double gain, std::uint64_t seed) {
  const auto n = random_signal(x.size(), seed, 0.01);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + gain * n[i];
  return quantize_waveform(y);
}

// Two test utterances and k checkpoint directories with two stages each;
// later checkpoints and stages are cleaner.
inline RunFixture make_run(const fs::path& dir, int checkpoints, int n_stages = 2) {
  RunFixture f;
  f.manifest.base_dir = dir;
  for (int u = 0; u < 2; ++u) {
    const std::string id = "spk09_u00" + std::to_string(u);
    const auto clean = quantize_waveform(synth_speech(9, u, 24000, 3));
    write_wav(dir / "clean" / (id + ".wav"), clean);
    write_wav(dir / "noisy" / (id + ".wav"), degraded(clean, 4.0, 50 + static_cast<std::uint64_t>(u)));
    f.manifest.entries.push_back({id, "clean/" + id + ".wav", "noisy/" + id + ".wav", "white", 0.0, Split::kTest, 0});
  }
  for (int c = 1; c <= checkpoints; ++c) {
    EnhancedIndex idx;
    idx.checkpoint_id = "ckpt-" + std::to_string(100 * c);
    idx.base_dir = dir / "enh" / idx.checkpoint_id;
    for (const auto& e : f.manifest.entries) {
      const auto clean = read_wav(f.manifest.resolve(e.clean_path)).samples;
      for (int s = 1; s <= n_stages; ++s) {
        const std::string name = e.source_id + ".stage" + std::to_string(s) + ".wav";
        const auto y = degraded(clean, 3.0 / (c * s), 1000 + 10 * static_cast<std::uint64_t>(c) + static_cast<std::uint64_t>(s));
        write_wav(idx.base_dir / name, y);
        idx.entries.push_back({e.source_id, std::to_string(s), name});
        if (s == n_stages) {
          write_wav(idx.base_dir / "final" / (e.source_id + ".wav"), y);
          idx.entries.push_back({e.source_id, "final", "final/" + e.source_id + ".wav"});
        }
      }
    }
    detail::write_text(idx.base_dir / "index.tsv", format_index(idx.entries));
    f.runs.push_back(idx);
  }
  return f;
}

// Prints PESQ according to which checkpoint directory the file is in.
inline std::string stub_adapter(const fs::path& dir, const std::vector<double>& values) {
  std::string body = "#!/bin/sh\ncase \"$2\" in\n";
  for (std::size_t c = 0; c < values.size(); ++c) {
    body += "  */ckpt-" + std::to_string(100 * (c + 1)) + "/*) echo \"PESQ " + format_double(values[c]) + "\" ;;\n";
  }
  body += "  *) echo \"PESQ 1.0\" ;;\nesac\n";
  const fs::path p = dir / "adapter.sh";
  std::ofstream(p) << body;
  fs::permissions(p, fs::perms::owner_all);
  return p.string();
}

}  // namespace segan::testing
