// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Two-channel (candidate, noisy) discriminator: the generator's encoder
// ladder with virtual batch norm and LeakyReLU(0.3), a width-one
// convolution down to one feature map, and a linear least-squares head.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segan/errors.hpp"
#include "segan/generator.hpp"
#include "segan/nn.hpp"

namespace segan {

inline constexpr double kLeakySlope = 0.3;

template <typename T>
struct DiscriminatorWeights {
  std::vector<Mat<T>> conv;  // out x (in*K), no bias (VBN follows)
  std::vector<Mat<T>> gamma;
  std::vector<Mat<T>> beta;
  Mat<T> head_weight;  // 1 x C, the width-one convolution
  Mat<T> head_bias;    // 1 x 1
  Mat<T> out_weight;   // 1 x code_length
  Mat<T> out_bias;     // 1 x 1

  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  DiscriminatorWeights zeros_like() const {
    DiscriminatorWeights out = *this;
    out.visit([](const std::string&, Mat<T>& m) { m.setZero(); });
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    visit([&](const std::string&, const Mat<T>& m) { n += m.size(); });
    return n;
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    for (std::size_t i = 0; i < self.conv.size(); ++i) {
      const std::string p = "conv" + std::to_string(i);
      f(p + ".weight", self.conv[i]);
      f(p + ".vbn_gamma", self.gamma[i]);
      f(p + ".vbn_beta", self.beta[i]);
    }
    f(std::string("head.weight"), self.head_weight);
    f(std::string("head.bias"), self.head_bias);
    f(std::string("out.weight"), self.out_weight);
    f(std::string("out.bias"), self.out_bias);
  }
};

template <typename T>
struct DiscriminatorCache {
  std::vector<Mat<T>> conv_in;
  std::vector<nn::VbnCache<T>> vbn;
  std::vector<Mat<T>> vbn_out;
  Mat<T> head_in;
  Mat<T> features;
};

template <typename T>
class Discriminator {
 public:
  // With randomize == false kernels are left at zero (for loading).
  Discriminator(GeneratorSpec spec, std::uint64_t seed, bool randomize = true) : spec_(std::move(spec)) {
    spec_.validate();
    Rng rng = make_rng(seed, "model:init:discriminator");
    int in_ch = 2;
    for (int c : spec_.encoder_channels) {
      Mat<T> w = Mat<T>::Zero(c, static_cast<Eigen::Index>(in_ch) * spec_.filter_width);
      if (randomize) nn::init_truncated_normal(w, kInitStddev, rng);
      weights_.conv.push_back(std::move(w));
      weights_.gamma.push_back(Mat<T>::Ones(c, 1));
      weights_.beta.push_back(Mat<T>::Zero(c, 1));
      in_ch = c;
    }
    weights_.head_weight = Mat<T>::Zero(1, spec_.code_channels());
    if (randomize) nn::init_truncated_normal(weights_.head_weight, kInitStddev, rng);
    weights_.head_bias = Mat<T>::Zero(1, 1);
    weights_.out_weight = Mat<T>::Zero(1, spec_.code_length());
    if (randomize) nn::init_truncated_normal(weights_.out_weight, kInitStddev, rng);
    weights_.out_bias = Mat<T>::Zero(1, 1);
  }

  const GeneratorSpec& spec() const { return spec_; }
  DiscriminatorWeights<T>& weights() { return weights_; }
  const DiscriminatorWeights<T>& weights() const { return weights_; }
  std::int64_t parameter_count() const { return weights_.parameter_count(); }

  bool has_reference() const { return !reference_batch_.empty(); }
  const std::vector<Mat<T>>& reference_batch() const { return reference_batch_; }
  const std::vector<nn::VbnReference<T>>& reference_stats() const { return reference_; }

  // Fixes the virtual-batch-norm reference batch (each entry 2 x L). May be
  // called once per model.
  void set_reference(std::vector<Mat<T>> batch) {
    if (has_reference()) throw ConfigError("vbn_reference", "reference batch already set");
    if (batch.empty()) throw ConfigError("vbn_reference", "reference batch must not be empty");
    for (const auto& x : batch) check_input(x);
    reference_batch_ = std::move(batch);
    refresh_reference();
  }

  // Restores a reference batch and statistics exactly as saved.
  void restore_reference(std::vector<Mat<T>> batch, std::vector<nn::VbnReference<T>> stats) {
    if (has_reference()) throw ConfigError("vbn_reference", "reference batch already set");
    if (batch.empty() || stats.size() != weights_.conv.size()) {
      throw DataError("vbn reference: inconsistent saved batch/statistics");
    }
    reference_batch_ = std::move(batch);
    reference_ = std::move(stats);
  }

  // Recomputes the per-layer reference statistics from the stored
  // reference batch under the current parameters. The reference examples
  // are normalized with their own batch statistics.
  void refresh_reference() {
    if (!has_reference()) throw ConfigError("vbn_reference", "no reference batch set");
    const auto g = spec_.geometry();
    const auto batch = static_cast<std::int64_t>(reference_batch_.size());
    std::vector<Mat<T>> h = reference_batch_;
    reference_.assign(weights_.conv.size(), {});
    for (std::size_t i = 0; i < weights_.conv.size(); ++i) {
      const Mat<T> no_bias;
      for (auto& x : h) x = nn::conv_forward(x, weights_.conv[i], no_bias, g);
      const Eigen::Index channels = h.front().rows();
      const auto count = static_cast<double>(batch) * static_cast<double>(h.front().cols());
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
      Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(channels);
      for (const auto& x : h) {
        sum += x.template cast<double>().rowwise().sum();
        sum_sq += x.template cast<double>().array().square().matrix().rowwise().sum();
      }
      nn::VbnReference<T> ref;
      ref.batch_size = batch;
      ref.mean = (sum / count).cast<T>();
      ref.mean_sq = (sum_sq / count).cast<T>();
      for (auto& x : h) {
        for (Eigen::Index c = 0; c < channels; ++c) {
          const double m = sum(c) / count;
          const double var = std::max(sum_sq(c) / count - m * m, 0.0);
          const T r = static_cast<T>(1.0 / std::sqrt(var + nn::kVbnEpsilon));
          x.row(c) = (x.row(c).array() - static_cast<T>(m)) * (r * weights_.gamma[i](c, 0)) + weights_.beta[i](c, 0);
        }
        x = nn::leaky_relu_forward(x, static_cast<T>(kLeakySlope));
      }
      reference_[i] = std::move(ref);
    }
  }

  // Scores one stacked (candidate, noisy) pair of shape 2 x L.
  T score(const Mat<T>& pair, DiscriminatorCache<T>* cache = nullptr) const {
    check_input(pair);
    if (!has_reference()) throw ConfigError("vbn_reference", "discriminator used before its reference batch was set");
    const auto g = spec_.geometry();
    const auto slope = static_cast<T>(kLeakySlope);
    const std::size_t depth = weights_.conv.size();
    if (cache != nullptr) {
      cache->conv_in.assign(depth, {});
      cache->vbn.assign(depth, {});
      cache->vbn_out.assign(depth, {});
    }
    Mat<T> h = pair;
    for (std::size_t i = 0; i < depth; ++i) {
      Mat<T> pre = nn::conv_forward(h, weights_.conv[i], Mat<T>(), g);
      Mat<T> normed = nn::vbn_forward(pre, reference_[i], weights_.gamma[i], weights_.beta[i],
                                      cache != nullptr ? &cache->vbn[i] : nullptr);
      Mat<T> act = nn::leaky_relu_forward(normed, slope);
      if (cache != nullptr) {
        cache->conv_in[i] = std::move(h);
        cache->vbn_out[i] = std::move(normed);
      }
      h = std::move(act);
    }
    Mat<T> features = weights_.head_weight * h;
    features.array() += weights_.head_bias(0, 0);
    const T s = features.row(0).dot(weights_.out_weight.row(0)) + weights_.out_bias(0, 0);
    if (cache != nullptr) {
      cache->head_in = std::move(h);
      cache->features = std::move(features);
    }
    return s;
  }

  T score(const Mat<T>& candidate, const Mat<T>& noisy, DiscriminatorCache<T>* cache = nullptr) const {
    return score(stack(candidate, noisy), cache);
  }

  // Accumulates parameter gradients for d(loss)/d(score) = dscore and
  // returns d(loss)/d(input pair), 2 x L.
  Mat<T> backward(const DiscriminatorCache<T>& cache, T dscore, DiscriminatorWeights<T>& grads) const {
    const auto g = spec_.geometry();
    const auto slope = static_cast<T>(kLeakySlope);
    grads.out_weight += dscore * cache.features;
    grads.out_bias(0, 0) += dscore;
    const Mat<T> dfeatures = dscore * weights_.out_weight;
    grads.head_weight.noalias() += dfeatures * cache.head_in.transpose();
    grads.head_bias(0, 0) += dfeatures.sum();
    Mat<T> dh = weights_.head_weight.transpose() * dfeatures;
    for (std::size_t i = weights_.conv.size(); i-- > 0;) {
      Mat<T> dn = nn::leaky_relu_backward(cache.vbn_out[i], slope, dh);
      Mat<T> dpre = nn::vbn_backward(cache.vbn[i], reference_[i], weights_.gamma[i], dn, grads.gamma[i], grads.beta[i]);
      dh = nn::conv_backward<T>(cache.conv_in[i], weights_.conv[i], dpre, g, grads.conv[i], nullptr);
    }
    return dh;
  }

  static Mat<T> stack(const Mat<T>& candidate, const Mat<T>& noisy) { return nn::concat_channels(candidate, noisy); }

 private:
  void check_input(const Mat<T>& pair) const {
    if (pair.rows() != 2 || pair.cols() != spec_.input_length) {
      throw ConfigError("discriminator input", "expected 2 x " + std::to_string(spec_.input_length) + ", got " +
                                                   std::to_string(pair.rows()) + " x " + std::to_string(pair.cols()));
    }
  }

  GeneratorSpec spec_;
  DiscriminatorWeights<T> weights_;
  std::vector<Mat<T>> reference_batch_;
  std::vector<nn::VbnReference<T>> reference_;
};

template <typename T>
Discriminator<T> build_discriminator(const GeneratorSpec& spec, std::uint64_t seed) {
  return Discriminator<T>(spec, seed);
}

}  // namespace segan
