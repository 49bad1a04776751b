// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Alternating least-squares GAN training of a generator chain against one
// discriminator, plus the run-directory layout:
//
//   <run>/config.txt         resolved configuration
//   <run>/checkpoints.txt    retained checkpoint names, oldest first
//   <run>/loss_history.tsv   one LossRecord per line
//   <run>/ckpt-<step>/       see checkpoint.hpp

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "segan/checkpoint.hpp"
#include "segan/corpus.hpp"
#include "segan/errors.hpp"
#include "segan/losses.hpp"
#include "segan/optim.hpp"
#include "segan/rng.hpp"

namespace segan {

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 2e-4;
  int batch_size = 0;  // 0 selects 100 for one stage, 50 for chains
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::int64_t checkpoint_every = 0;  // steps; 0 checkpoints at epoch ends only
  int keep_last = 5;

  int resolved_batch_size(int n_stages) const {
    if (batch_size > 0) return batch_size;
    return n_stages == 1 ? 100 : 50;
  }
  RmsPropOptions rmsprop() const { return {learning_rate, rmsprop_decay, rmsprop_epsilon}; }

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs", "must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("train.learning_rate", "must be a finite non-negative number");
    }
    if (batch_size < 0) throw ConfigError("train.batch_size", "must be positive (0 selects the default)");
    if (!(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0)) throw ConfigError("train.rmsprop_decay", "must lie in [0, 1)");
    if (!(rmsprop_epsilon > 0.0)) throw ConfigError("train.rmsprop_epsilon", "must be positive");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every", "must be non-negative");
    if (keep_last < 1) throw ConfigError("train.keep_last", "must be at least 1");
  }
};

inline TrainConfig train_config_from(const KeyValueConfig& kv) {
  TrainConfig c;
  c.epochs = kv.get_int<int>("train.epochs", c.epochs);
  c.learning_rate = kv.get_double("train.learning_rate", c.learning_rate);
  c.batch_size = kv.get_int<int>("train.batch_size", c.batch_size);
  c.rmsprop_decay = kv.get_double("train.rmsprop_decay", c.rmsprop_decay);
  c.rmsprop_epsilon = kv.get_double("train.rmsprop_epsilon", c.rmsprop_epsilon);
  c.checkpoint_every = kv.get_int<std::int64_t>("train.checkpoint_every", c.checkpoint_every);
  c.keep_last = kv.get_int<int>("train.keep_last", c.keep_last);
  c.validate();
  return c;
}

struct LossRecord {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double d_loss = 0.0;
  double g_adv_loss = 0.0;
  std::vector<double> g_l1_losses;  // per stage
  double g_total = 0.0;
};

inline std::string loss_history_header() { return "step\tepoch\td_loss\tg_adv_loss\tg_total\tg_l1_losses"; }

inline std::string format_loss_record(const LossRecord& r) {
  std::ostringstream out;
  out << r.step << '\t' << r.epoch << '\t' << format_double(r.d_loss) << '\t' << format_double(r.g_adv_loss) << '\t'
      << format_double(r.g_total) << '\t';
  for (std::size_t i = 0; i < r.g_l1_losses.size(); ++i) out << (i ? "," : "") << format_double(r.g_l1_losses[i]);
  return out.str();
}

inline std::string format_loss_history(const std::vector<LossRecord>& records) {
  std::string out = loss_history_header() + "\n";
  for (const auto& r : records) out += format_loss_record(r) + "\n";
  return out;
}

template <typename T>
struct OptimizerState {
  std::vector<RmsPropState<T>> generator;  // one per distinct weight set
  RmsPropState<T> discriminator;
};

namespace detail {

template <typename T>
Mat<T> to_row(const std::vector<double>& x) {
  Mat<T> m(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = static_cast<T>(x[i]);
  return m;
}

inline void require_finite_loss(double v, const char* what, std::int64_t step) {
  if (!std::isfinite(v)) {
    throw DivergenceError(std::string(what) + " became non-finite at step " + std::to_string(step));
  }
}

}  // namespace detail

// Builds the discriminator's reference pairs (clean, noisy) from a batch.
template <typename T>
std::vector<Mat<T>> reference_pairs(std::span<const SegmentPair> batch) {
  std::vector<Mat<T>> out;
  for (const auto& p : batch) {
    out.push_back(Discriminator<T>::stack(detail::to_row<T>(p.clean.samples), detail::to_row<T>(p.noisy.samples)));
  }
  return out;
}

template <typename T>
struct DiscriminatorGradients {
  double loss = 0.0;
  std::vector<double> reals;               // [b]
  std::vector<std::vector<double>> fakes;  // [n][b]
  DiscriminatorWeights<T> grads;
};

// Gradient of the discriminator objective over one minibatch. latents[b]
// holds the N stage latents for example b.
template <typename T>
DiscriminatorGradients<T> discriminator_gradients(const ParameterStore<T>& models, const std::vector<Mat<T>>& cleans,
                                                  const std::vector<Mat<T>>& noisies,
                                                  const std::vector<std::vector<Mat<T>>>& latents) {
  const auto& chain = models.chain;
  const auto& disc = models.discriminator;
  const auto un = static_cast<std::size_t>(chain.n_stages());
  const auto batch = static_cast<double>(cleans.size());
  DiscriminatorGradients<T> r;
  r.grads = disc.weights().zeros_like();
  r.fakes.resize(un);
  DiscriminatorCache<T> cache;
  for (std::size_t b = 0; b < cleans.size(); ++b) {
    const auto outputs = chain.forward(noisies[b], latents[b]);
    const T real = disc.score(cleans[b], noisies[b], &cache);
    r.reals.push_back(static_cast<double>(real));
    disc.backward(cache, static_cast<T>((real - T(1)) / batch), r.grads);
    for (std::size_t n = 0; n < un; ++n) {
      const T fake = disc.score(outputs[n], noisies[b], &cache);
      r.fakes[n].push_back(static_cast<double>(fake));
      disc.backward(cache, static_cast<T>(fake / (static_cast<double>(un) * batch)), r.grads);
    }
  }
  r.loss = discriminator_loss(r.reals, r.fakes);
  return r;
}

template <typename T>
struct GeneratorGradients {
  GeneratorLossTerms terms;
  std::vector<GeneratorWeights<T>> grads;  // one per distinct weight set
};

// Gradient of the chain objective (adversarial terms plus the l1
// curriculum) over one minibatch, with the discriminator held fixed.
template <typename T>
GeneratorGradients<T> generator_gradients(const ParameterStore<T>& models, const std::vector<Mat<T>>& cleans,
                                          const std::vector<Mat<T>>& noisies,
                                          const std::vector<std::vector<Mat<T>>>& latents) {
  const auto& chain = models.chain;
  const auto& disc = models.discriminator;
  const int n_stages = chain.n_stages();
  const auto un = static_cast<std::size_t>(n_stages);
  const auto batch = static_cast<double>(cleans.size());
  const Curriculum curriculum = lambda_curriculum(n_stages);
  GeneratorGradients<T> r;
  r.grads = chain.zero_gradients();
  DiscriminatorWeights<T> scratch = disc.weights().zeros_like();
  std::vector<std::vector<double>> fakes(un);
  std::vector<std::vector<double>> l1(un);
  std::vector<GeneratorCache<T>> caches;
  DiscriminatorCache<T> dcache;
  for (std::size_t b = 0; b < cleans.size(); ++b) {
    const auto outputs = chain.forward(noisies[b], latents[b], &caches);
    std::vector<Mat<T>> d_outputs(un);
    for (std::size_t n = 0; n < un; ++n) {
      const T fake = disc.score(outputs[n], noisies[b], &dcache);
      fakes[n].push_back(static_cast<double>(fake));
      const Mat<T> dpair =
          disc.backward(dcache, static_cast<T>((fake - T(1)) / (static_cast<double>(n_stages) * batch)), scratch);
      const Mat<T> diff = outputs[n] - cleans[b];
      l1[n].push_back(static_cast<double>(diff.cwiseAbs().sum()));
      const auto w = static_cast<T>(curriculum.lambdas[n] / batch);
      d_outputs[n] = dpair.row(0) + w * diff.unaryExpr([](T v) { return T((v > T(0)) - (v < T(0))); });
    }
    chain.backward(caches, d_outputs, r.grads);
  }
  r.terms = generator_loss_terms(fakes, l1, curriculum);
  return r;
}

// One discriminator update followed by one generator update, each with
// fresh latent samples drawn from step_seed. The discriminator's reference
// batch must already be set.
template <typename T>
LossRecord train_step(ParameterStore<T>& models, OptimizerState<T>& opt_state, std::span<const SegmentPair> batch,
                      const RmsPropOptions& opt, std::uint64_t step_seed) {
  if (batch.empty()) throw DataError("train_step: empty minibatch");
  auto& chain = models.chain;
  auto& disc = models.discriminator;
  if (!disc.has_reference()) throw ConfigError("vbn_reference", "set the reference batch before training");
  const GeneratorSpec& spec = chain.spec();
  const int n_stages = chain.n_stages();

  std::vector<Mat<T>> cleans;
  std::vector<Mat<T>> noisies;
  for (const auto& p : batch) {
    if (static_cast<std::int64_t>(p.clean.size()) != spec.input_length ||
        static_cast<std::int64_t>(p.noisy.size()) != spec.input_length) {
      throw ConfigError("segment length", "training segments must have " + std::to_string(spec.input_length) +
                                              " samples for this model");
    }
    cleans.push_back(detail::to_row<T>(p.clean.samples));
    noisies.push_back(detail::to_row<T>(p.noisy.samples));
  }
  auto draw_latents = [&](const char* purpose) {
    Rng rng = make_rng(step_seed, purpose);
    std::vector<std::vector<Mat<T>>> z(batch.size());
    for (auto& per_example : z) {
      for (int n = 0; n < n_stages; ++n) per_example.push_back(sample_latent<T>(spec, rng));
    }
    return z;
  };

  LossRecord record;
  record.step = models.step;
  record.epoch = models.epoch;

  {
    auto d = discriminator_gradients(models, cleans, noisies, draw_latents("train:latent:discriminator"));
    record.d_loss = d.loss;
    detail::require_finite_loss(record.d_loss, "discriminator loss", models.step);
    rmsprop_step(disc.weights(), d.grads, opt_state.discriminator, opt);
    disc.refresh_reference();
  }
  {
    auto g = generator_gradients(models, cleans, noisies, draw_latents("train:latent:generator"));
    record.g_adv_loss = g.terms.adversarial;
    record.g_l1_losses = g.terms.l1;
    record.g_total = g.terms.total;
    detail::require_finite_loss(record.g_total, "generator loss", models.step);
    opt_state.generator.resize(chain.stores().size());
    for (std::size_t k = 0; k < chain.stores().size(); ++k) {
      rmsprop_step(*chain.stores()[k], g.grads[k], opt_state.generator[k], opt);
    }
  }
  ++models.step;
  return record;
}

inline std::uint64_t step_seed(std::uint64_t seed, std::int64_t step) {
  return derive_seed(seed, "train:step:" + std::to_string(step));
}

inline std::uint64_t epoch_seed(std::uint64_t seed, std::int64_t epoch) {
  return derive_seed(seed, "data:shuffle:" + std::to_string(epoch));
}

inline std::string format_curriculum(const Curriculum& c) {
  std::ostringstream out;
  out << "stage\tlambda\n";
  for (int n = 0; n < c.n_stages(); ++n) out << (n + 1) << '\t' << format_double(c.lambdas[static_cast<std::size_t>(n)]) << "\n";
  out << "balance\t" << format_double(c.balance) << "\n";
  return out.str();
}

inline std::vector<std::string> read_run_manifest(const std::filesystem::path& run_dir) {
  std::vector<std::string> out;
  std::ifstream in(run_dir / "checkpoints.txt");
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

struct TrainResult {
  std::vector<LossRecord> history;
  std::vector<std::string> checkpoints;  // retained, oldest first
};

using TrainObserver = std::function<void(const LossRecord&)>;

// Trains from freshly initialized models and writes checkpoints into
// run_dir. On divergence the last written checkpoint is left intact and
// DivergenceError propagates.
template <typename T>
TrainResult train(ParameterStore<T>& models, const std::vector<LoadedPair>& data, const TrainConfig& config,
                  const std::filesystem::path& run_dir, const std::string& config_echo = {},
                  const TrainObserver& observer = {}) {
  namespace fs = std::filesystem;
  config.validate();
  const GeneratorSpec& spec = models.chain.spec();
  const auto batch_size = static_cast<std::size_t>(config.resolved_batch_size(models.chain.n_stages()));
  const Curriculum curriculum = lambda_curriculum(models.chain.n_stages());
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw DataError(run_dir.string() + ": cannot create run directory: " + ec.message());
  if (!config_echo.empty()) detail::write_text(run_dir / "config.txt", config_echo);

  TrainResult result;
  OptimizerState<T> opt_state;
  std::int64_t last_saved = -1;
  auto save = [&] {
    std::map<std::string, std::string> extras{{"curriculum.tsv", format_curriculum(curriculum)},
                                              {"loss_history.tsv", format_loss_history(result.history)}};
    if (!config_echo.empty()) extras["config.txt"] = config_echo;
    const std::string name = checkpoint_name(models.step);
    save_checkpoint(run_dir / name, models, extras);
    result.checkpoints.push_back(name);
    while (result.checkpoints.size() > static_cast<std::size_t>(config.keep_last)) {
      fs::remove_all(run_dir / result.checkpoints.front(), ec);
      result.checkpoints.erase(result.checkpoints.begin());
    }
    std::string listing;
    for (const auto& c : result.checkpoints) listing += c + "\n";
    detail::write_text(run_dir / "checkpoints.txt.tmp", listing);
    fs::rename(run_dir / "checkpoints.txt.tmp", run_dir / "checkpoints.txt");
    detail::write_text(run_dir / "loss_history.tsv", format_loss_history(result.history));
    last_saved = models.step;
  };

  for (int e = 0; e < config.epochs; ++e) {
    models.epoch = e;
    const BatchPlan plan(data, batch_size, epoch_seed(models.seed, e), spec.input_length);
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const auto batch = plan.batch(i);
      if (!models.discriminator.has_reference()) {
        models.discriminator.set_reference(reference_pairs<T>(batch));
      }
      LossRecord r = train_step(models, opt_state, batch, config.rmsprop(), step_seed(models.seed, models.step));
      result.history.push_back(r);
      if (observer) observer(r);
      if (config.checkpoint_every > 0 && models.step % config.checkpoint_every == 0) save();
    }
    models.epoch = e + 1;
    if (last_saved != models.step) save();
  }
  return result;
}

}  // namespace segan
