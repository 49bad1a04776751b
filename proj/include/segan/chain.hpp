// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// A chain of N generators where stage n refines the output of stage n-1.
// With tied parameters every stage shares one weight set (iterated
// refinement); untied stages own independent weights (deep refinement).

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "segan/errors.hpp"
#include "segan/generator.hpp"

namespace segan {

struct ChainConfig {
  int n_stages = 1;
  bool tied_parameters = false;

  void validate() const {
    if (n_stages < 1) throw ConfigError("n_stages", "must be at least 1");
  }
  // Stage counts the reference experiments cover.
  bool within_tested_range() const { return n_stages >= 1 && n_stages <= 4; }

  friend bool operator==(const ChainConfig&, const ChainConfig&) = default;
};

inline std::uint64_t stage_seed(std::uint64_t seed, int stage) {
  return derive_seed(seed, "chain:stage:" + std::to_string(stage));
}

template <typename T>
class GeneratorChain {
 public:
  GeneratorChain(ChainConfig config, GeneratorSpec spec, std::vector<std::shared_ptr<GeneratorWeights<T>>> stages)
      : config_(config), spec_(std::move(spec)), stages_(std::move(stages)) {
    config_.validate();
    if (static_cast<int>(stages_.size()) != config_.n_stages) {
      throw ConfigError("n_stages", "stage weight count does not match the chain configuration");
    }
    for (const auto& s : stages_) {
      auto it = std::find(stores_.begin(), stores_.end(), s);
      store_index_.push_back(static_cast<int>(it - stores_.begin()));
      if (it == stores_.end()) stores_.push_back(s);
    }
  }

  const ChainConfig& config() const { return config_; }
  const GeneratorSpec& spec() const { return spec_; }
  int n_stages() const { return config_.n_stages; }

  Generator<T> stage(int n) const { return Generator<T>(spec_, stages_.at(static_cast<std::size_t>(n))); }

  // Distinct weight sets: one when tied, N when untied.
  const std::vector<std::shared_ptr<GeneratorWeights<T>>>& stores() const { return stores_; }
  int store_of_stage(int n) const { return store_index_.at(static_cast<std::size_t>(n)); }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& s : stores_) n += s->parameter_count();
    return n;
  }

  std::vector<GeneratorWeights<T>> zero_gradients() const {
    std::vector<GeneratorWeights<T>> grads;
    for (const auto& s : stores_) grads.push_back(s->zeros_like());
    return grads;
  }

  // Runs x_n = G_n(z_n, x_{n-1}) with x_0 = noisy; returns all N outputs,
  // the last one being the enhanced segment.
  std::vector<Mat<T>> forward(const Mat<T>& noisy, const std::vector<Mat<T>>& latents,
                              std::vector<GeneratorCache<T>>* caches = nullptr) const {
    if (static_cast<int>(latents.size()) != n_stages()) {
      throw ConfigError("latents", "expected " + std::to_string(n_stages()) + " latent samples, got " +
                                       std::to_string(latents.size()));
    }
    if (caches != nullptr) caches->assign(static_cast<std::size_t>(n_stages()), {});
    std::vector<Mat<T>> outputs;
    outputs.reserve(static_cast<std::size_t>(n_stages()));
    const Mat<T>* input = &noisy;
    for (int n = 0; n < n_stages(); ++n) {
      const auto un = static_cast<std::size_t>(n);
      outputs.push_back(generator_forward(spec_, *stages_[un], *input, latents[un],
                                          caches != nullptr ? &(*caches)[un] : nullptr));
      input = &outputs.back();
    }
    return outputs;
  }

  // d_outputs[n] is d(loss)/d(x_n) from terms that read x_n directly;
  // gradient arriving through later stages is added here.
  void backward(const std::vector<GeneratorCache<T>>& caches, const std::vector<Mat<T>>& d_outputs,
                std::vector<GeneratorWeights<T>>& grads) const {
    Mat<T> carry;
    for (int n = n_stages() - 1; n >= 0; --n) {
      const auto un = static_cast<std::size_t>(n);
      Mat<T> d = d_outputs[un];
      if (carry.size() > 0) d += carry;
      carry = generator_backward(spec_, *stages_[un], caches[un], d,
                                 grads[static_cast<std::size_t>(store_index_[un])]);
    }
  }

 private:
  ChainConfig config_;
  GeneratorSpec spec_;
  std::vector<std::shared_ptr<GeneratorWeights<T>>> stages_;
  std::vector<std::shared_ptr<GeneratorWeights<T>>> stores_;
  std::vector<int> store_index_;
};

template <typename T>
GeneratorChain<T> build_chain(const ChainConfig& config, const GeneratorSpec& spec, std::uint64_t seed) {
  config.validate();
  spec.validate();
  std::vector<std::shared_ptr<GeneratorWeights<T>>> stages;
  if (config.tied_parameters) {
    auto shared = std::make_shared<GeneratorWeights<T>>(init_generator_weights<T>(spec, stage_seed(seed, 0)));
    stages.assign(static_cast<std::size_t>(config.n_stages), shared);
  } else {
    for (int n = 0; n < config.n_stages; ++n) {
      stages.push_back(std::make_shared<GeneratorWeights<T>>(init_generator_weights<T>(spec, stage_seed(seed, n))));
    }
  }
  return GeneratorChain<T>(config, spec, std::move(stages));
}

}  // namespace segan
