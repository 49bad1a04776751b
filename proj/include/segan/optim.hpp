// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "segan/errors.hpp"
#include "segan/nn.hpp"

namespace segan {

struct RmsPropOptions {
  double learning_rate = 2e-4;
  double decay = 0.9;
  double epsilon = 1e-8;
};

// Running mean of squared gradients for one weight set, in visit order.
template <typename T>
struct RmsPropState {
  std::vector<nn::Mat<T>> mean_square;
};

// p <- p - lr * g / (sqrt(E[g^2]) + eps), E[g^2] <- decay E[g^2] + (1 - decay) g^2
template <typename T, typename Weights>
void rmsprop_step(Weights& params, const Weights& grads, RmsPropState<T>& state, const RmsPropOptions& opt) {
  std::vector<const nn::Mat<T>*> g;
  grads.visit([&](const std::string&, const nn::Mat<T>& m) { g.push_back(&m); });
  if (state.mean_square.empty()) {
    for (const auto* m : g) state.mean_square.push_back(nn::Mat<T>::Zero(m->rows(), m->cols()));
  }
  if (state.mean_square.size() != g.size()) throw ConfigError("rmsprop", "state does not match parameter layout");
  const auto decay = static_cast<T>(opt.decay);
  const auto lr = static_cast<T>(opt.learning_rate);
  const auto eps = static_cast<T>(opt.epsilon);
  std::size_t i = 0;
  params.visit([&](const std::string&, nn::Mat<T>& p) {
    auto& ms = state.mean_square[i];
    const auto& gi = *g[i];
    ms = decay * ms + (T(1) - decay) * gi.cwiseAbs2();
    p.array() -= lr * gi.array() / (ms.array().sqrt() + eps);
    ++i;
  });
}

}  // namespace segan
