// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Shared fixtures for the test binaries.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "segan/chain.hpp"
#include "segan/corpus.hpp"
#include "segan/generator.hpp"
#include "segan/signal.hpp"

namespace segan::testing {

namespace fs = std::filesystem;

// Fresh, empty directory under the build tree.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::path(SEGAN_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every regular file under dir, keyed by relative path, with its bytes.
inline std::map<std::string, std::string> tree_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

// Two-layer generator small enough for finite differences.
inline GeneratorSpec miniature_spec() {
  GeneratorSpec s;
  s.encoder_channels = {2, 4};
  s.filter_width = 3;
  s.stride = 2;
  s.input_length = 16;
  return s;
}

// Reduced model used by training smoke and determinism tests: five
// encoder layers (8, 16, 16, 32, 32 channels), width-15 kernels and
// 2048-sample segments.
inline GeneratorSpec reduced_spec() {
  GeneratorSpec s;
  s.encoder_channels = {8, 16, 16, 32, 32};
  s.filter_width = 15;
  s.stride = 2;
  s.input_length = 2048;
  return s;
}

inline std::vector<double> random_signal(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

template <typename T>
Mat<T> random_mat(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(normal(rng));
  return m;
}

// Speech-like fixture: voiced bursts with silent gaps.
inline std::vector<double> speech_fixture(std::size_t n = 48000, std::uint64_t seed = 7) {
  return synth_speech(0, 0, n, seed);
}

// Chain test double whose every stage returns its input unchanged.
struct IdentityChain {
  GeneratorSpec spec_value;
  int stages = 1;

  const GeneratorSpec& spec() const { return spec_value; }
  int n_stages() const { return stages; }
  template <typename T>
  std::vector<Mat<T>> forward(const Mat<T>& noisy, const std::vector<Mat<T>>& latents) const {
    return std::vector<Mat<T>>(latents.size(), noisy);
  }
};

}  // namespace segan::testing
