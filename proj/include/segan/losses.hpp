// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Least-squares adversarial objectives for a chain of N generators and
// the per-stage l1 curriculum. Expectations are minibatch means; the l1
// distance is the plain sum over the samples of a segment.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "segan/errors.hpp"
#include "segan/signal.hpp"

namespace segan {

inline constexpr double kFinalLambda = 100.0;

struct Curriculum {
  std::vector<double> lambdas;  // lambda_1 .. lambda_N
  double balance = 0.5;         // 1 / (2N)

  int n_stages() const { return static_cast<int>(lambdas.size()); }
};

// lambda_n = 100 / 2^(N-n): doubles stage by stage and ends at 100.
inline Curriculum lambda_curriculum(int n_stages) {
  if (n_stages < 1) throw ConfigError("n_stages", "curriculum needs at least one stage");
  Curriculum c;
  c.lambdas.resize(static_cast<std::size_t>(n_stages));
  for (int n = 1; n <= n_stages; ++n) {
    c.lambdas[static_cast<std::size_t>(n - 1)] = std::ldexp(kFinalLambda, -(n_stages - n));
  }
  c.balance = 1.0 / (2.0 * n_stages);
  return c;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("l1", "length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

// 1/2 (D(x, x~) - 1)^2 + sum_n 1/(2N) D(x_n, x~)^2 for a single example.
inline double discriminator_loss(double d_real, std::span<const double> d_fakes) {
  if (d_fakes.empty()) throw ConfigError("d_fakes", "need at least one fake score");
  const double w = 1.0 / (2.0 * static_cast<double>(d_fakes.size()));
  double loss = 0.5 * (d_real - 1.0) * (d_real - 1.0);
  for (double f : d_fakes) loss += w * f * f;
  return loss;
}

// Minibatch form: d_real[b], d_fakes[n][b].
inline double discriminator_loss(std::span<const double> d_real, const std::vector<std::vector<double>>& d_fakes) {
  if (d_fakes.empty()) throw ConfigError("d_fakes", "need at least one stage");
  if (d_real.empty()) throw ConfigError("d_real", "empty minibatch");
  const auto batch = static_cast<double>(d_real.size());
  const double w = 1.0 / (2.0 * static_cast<double>(d_fakes.size()));
  double real_term = 0.0;
  for (double r : d_real) real_term += (r - 1.0) * (r - 1.0);
  double loss = 0.5 * real_term / batch;
  for (const auto& stage : d_fakes) {
    if (stage.size() != d_real.size()) throw ConfigError("d_fakes", "stage batch size differs from real batch");
    double acc = 0.0;
    for (double f : stage) acc += f * f;
    loss += w * acc / batch;
  }
  return loss;
}

struct GeneratorLossTerms {
  double adversarial = 0.0;
  std::vector<double> l1;  // per stage, minibatch mean of the summed l1
  double total = 0.0;
};

// Minibatch form: d_fakes[n][b] and l1[n][b] = ||x_n - x||_1 per example.
inline GeneratorLossTerms generator_loss_terms(const std::vector<std::vector<double>>& d_fakes,
                                               const std::vector<std::vector<double>>& l1,
                                               const Curriculum& curriculum) {
  const auto n_stages = static_cast<std::size_t>(curriculum.n_stages());
  if (d_fakes.size() != n_stages || l1.size() != n_stages) {
    throw ConfigError("generator_loss", "expected " + std::to_string(n_stages) + " stages, got " +
                                            std::to_string(d_fakes.size()) + " scores and " +
                                            std::to_string(l1.size()) + " reconstructions");
  }
  GeneratorLossTerms t;
  const double w = 1.0 / (2.0 * static_cast<double>(n_stages));
  for (std::size_t n = 0; n < n_stages; ++n) {
    if (d_fakes[n].empty() || d_fakes[n].size() != l1[n].size()) {
      throw ConfigError("generator_loss", "inconsistent minibatch sizes");
    }
    const auto batch = static_cast<double>(d_fakes[n].size());
    double adv = 0.0;
    double rec = 0.0;
    for (double f : d_fakes[n]) adv += (f - 1.0) * (f - 1.0);
    for (double v : l1[n]) rec += v;
    t.adversarial += w * adv / batch;
    t.l1.push_back(rec / batch);
    t.total += curriculum.lambdas[n] * (rec / batch);
  }
  t.total += t.adversarial;
  return t;
}

// sum_n 1/(2N) (D(x_n, x~) - 1)^2 + sum_n lambda_n ||x_n - x||_1 for one example.
inline double generator_loss(std::span<const double> d_fakes, std::span<const Segment> xhats, const Segment& clean,
                             const Curriculum& curriculum) {
  const auto n_stages = static_cast<std::size_t>(curriculum.n_stages());
  if (d_fakes.size() != n_stages || xhats.size() != n_stages) {
    throw ConfigError("generator_loss", "list lengths must equal the curriculum's stage count");
  }
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<double>> dist;
  for (std::size_t n = 0; n < n_stages; ++n) {
    scores.push_back({d_fakes[n]});
    dist.push_back({l1_distance(xhats[n].samples, clean.samples)});
  }
  return generator_loss_terms(scores, dist, curriculum).total;
}

}  // namespace segan
