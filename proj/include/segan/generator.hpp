// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Fully convolutional encoder-decoder generator operating on raw
// waveform segments, with encoder-to-decoder skip connections and a
// latent tensor concatenated to the code at the bottleneck.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "segan/errors.hpp"
#include "segan/nn.hpp"
#include "segan/rng.hpp"

namespace segan {

using nn::Mat;

struct GeneratorSpec {
  std::vector<int> encoder_channels{16, 32, 32, 64, 64, 128, 128, 256, 256, 512, 1024};
  int filter_width = 31;
  int stride = 2;
  std::int64_t input_length = 16384;

  int depth() const { return static_cast<int>(encoder_channels.size()); }
  nn::ConvGeometry geometry() const { return {filter_width, stride}; }

  // Temporal length after encoder layer i (0-based).
  std::int64_t encoder_length(int layer) const {
    std::int64_t len = input_length;
    for (int i = 0; i <= layer; ++i) len /= stride;
    return len;
  }
  int code_channels() const { return encoder_channels.back(); }
  std::int64_t code_length() const { return encoder_length(depth() - 1); }

  // Decoder layer j consumes [previous decoder output | mirrored encoder
  // output] (or [code | latent] for j == 0) and emits the channel count of
  // the encoder layer two levels below its input, or 1 at the end.
  int decoder_in_channels(int j) const { return 2 * encoder_channels[static_cast<std::size_t>(depth() - 1 - j)]; }
  int decoder_out_channels(int j) const {
    return j == depth() - 1 ? 1 : encoder_channels[static_cast<std::size_t>(depth() - 2 - j)];
  }

  void validate() const {
    if (encoder_channels.empty()) throw ConfigError("encoder_channels", "must not be empty");
    for (int c : encoder_channels) {
      if (c < 1) throw ConfigError("encoder_channels", "channel counts must be positive");
    }
    if (filter_width < 1 || filter_width % 2 == 0) throw ConfigError("filter_width", "must be a positive odd number");
    if (stride < 1) throw ConfigError("stride", "must be positive");
    std::int64_t len = input_length;
    for (int i = 0; i < depth(); ++i) {
      if (len % stride != 0) {
        throw ConfigError("input_length", "must be divisible by stride^depth (" + std::to_string(input_length) + ")");
      }
      len /= stride;
    }
    if (len < 1) throw ConfigError("input_length", "encoder reduces length below one sample");
  }

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

template <typename T>
struct LayerParams {
  Mat<T> weight;
  Mat<T> bias;   // empty when the layer has no bias
  Mat<T> alpha;  // PReLU slopes; empty when the layer is not PReLU-activated
};

inline constexpr double kInitStddev = 0.02;
inline constexpr double kPreluInit = 0.25;

template <typename T>
struct GeneratorWeights {
  std::vector<LayerParams<T>> encoder;
  std::vector<LayerParams<T>> decoder;

  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  // Same shapes, all zeros; used as a gradient accumulator.
  GeneratorWeights zeros_like() const {
    GeneratorWeights out = *this;
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
    auto layer = [&](const std::string& prefix, auto& p) {
      f(prefix + ".weight", p.weight);
      if (p.bias.size() > 0) f(prefix + ".bias", p.bias);
      if (p.alpha.size() > 0) f(prefix + ".alpha", p.alpha);
    };
    for (std::size_t i = 0; i < self.encoder.size(); ++i) layer("enc" + std::to_string(i), self.encoder[i]);
    for (std::size_t j = 0; j < self.decoder.size(); ++j) layer("dec" + std::to_string(j), self.decoder[j]);
  }
};

// Allocates every tensor with its final shape: kernels zero, biases zero,
// PReLU slopes at their initial value.
template <typename T>
GeneratorWeights<T> shaped_generator_weights(const GeneratorSpec& spec) {
  spec.validate();
  const int width = spec.filter_width;
  GeneratorWeights<T> w;
  int in_ch = 1;
  for (int i = 0; i < spec.depth(); ++i) {
    const int out_ch = spec.encoder_channels[static_cast<std::size_t>(i)];
    LayerParams<T> p;
    p.weight = Mat<T>::Zero(out_ch, static_cast<Eigen::Index>(in_ch) * width);
    p.bias = Mat<T>::Zero(out_ch, 1);
    p.alpha = Mat<T>::Constant(out_ch, 1, static_cast<T>(kPreluInit));
    w.encoder.push_back(std::move(p));
    in_ch = out_ch;
  }
  for (int j = 0; j < spec.depth(); ++j) {
    const int dec_in = spec.decoder_in_channels(j);
    const int dec_out = spec.decoder_out_channels(j);
    LayerParams<T> p;
    p.weight = Mat<T>::Zero(dec_in, static_cast<Eigen::Index>(dec_out) * width);
    p.bias = Mat<T>::Zero(dec_out, 1);
    if (j + 1 < spec.depth()) p.alpha = Mat<T>::Constant(dec_out, 1, static_cast<T>(kPreluInit));
    w.decoder.push_back(std::move(p));
  }
  return w;
}

// Kernels ~ truncated N(0, 0.02^2), biases zero.
template <typename T>
GeneratorWeights<T> init_generator_weights(const GeneratorSpec& spec, std::uint64_t seed) {
  GeneratorWeights<T> w = shaped_generator_weights<T>(spec);
  Rng rng = make_rng(seed, "model:init:generator");
  for (auto& p : w.encoder) nn::init_truncated_normal(p.weight, kInitStddev, rng);
  for (auto& p : w.decoder) nn::init_truncated_normal(p.weight, kInitStddev, rng);
  return w;
}

// Everything the backward pass needs from one forward evaluation.
template <typename T>
struct GeneratorCache {
  std::vector<Mat<T>> enc_in;
  std::vector<Mat<T>> enc_pre;
  std::vector<Mat<T>> dec_in;
  std::vector<Mat<T>> dec_pre;
  Mat<T> output;
};

// Callback receiving (layer index, activation) after each encoder layer.
template <typename T>
using EncoderProbe = std::function<void(int, const Mat<T>&)>;

// Forward pass on one segment: x is 1 x L, z is code_channels x code_length.
template <typename T>
Mat<T> generator_forward(const GeneratorSpec& spec, const GeneratorWeights<T>& w, const Mat<T>& x, const Mat<T>& z,
                         GeneratorCache<T>* cache = nullptr, const EncoderProbe<T>& probe = nullptr) {
  if (x.rows() != 1 || x.cols() != spec.input_length) {
    throw ConfigError("generator input", "expected 1 x " + std::to_string(spec.input_length) + ", got " +
                                             std::to_string(x.rows()) + " x " + std::to_string(x.cols()));
  }
  if (z.rows() != spec.code_channels() || z.cols() != spec.code_length()) {
    throw ConfigError("latent", "expected " + std::to_string(spec.code_channels()) + " x " +
                                    std::to_string(spec.code_length()));
  }
  const auto g = spec.geometry();
  const int depth = spec.depth();
  if (cache != nullptr) {
    cache->enc_in.assign(static_cast<std::size_t>(depth), {});
    cache->enc_pre.assign(static_cast<std::size_t>(depth), {});
    cache->dec_in.assign(static_cast<std::size_t>(depth), {});
    cache->dec_pre.assign(static_cast<std::size_t>(depth), {});
  }

  std::vector<Mat<T>> skips(static_cast<std::size_t>(depth));
  Mat<T> h = x;
  for (int i = 0; i < depth; ++i) {
    const auto& p = w.encoder[static_cast<std::size_t>(i)];
    Mat<T> pre = nn::conv_forward(h, p.weight, p.bias, g);
    Mat<T> act = nn::prelu_forward(pre, p.alpha);
    if (probe) probe(i, act);
    if (cache != nullptr) {
      cache->enc_in[static_cast<std::size_t>(i)] = std::move(h);
      cache->enc_pre[static_cast<std::size_t>(i)] = std::move(pre);
    }
    skips[static_cast<std::size_t>(i)] = act;
    h = std::move(act);
  }

  Mat<T> u = nn::concat_channels(h, z);
  Mat<T> out;
  for (int j = 0; j < depth; ++j) {
    const auto& p = w.decoder[static_cast<std::size_t>(j)];
    Mat<T> pre = nn::tconv_forward(u, p.weight, p.bias, g);
    Mat<T> next_u;
    if (j + 1 < depth) {
      Mat<T> act = nn::prelu_forward(pre, p.alpha);
      next_u = nn::concat_channels(act, skips[static_cast<std::size_t>(depth - 2 - j)]);
    } else {
      out = pre.array().tanh().matrix();
    }
    if (cache != nullptr) {
      cache->dec_in[static_cast<std::size_t>(j)] = std::move(u);
      cache->dec_pre[static_cast<std::size_t>(j)] = std::move(pre);
    }
    u = std::move(next_u);
  }
  if (cache != nullptr) cache->output = out;
  return out;
}

// Accumulates parameter gradients into grads; returns d(loss)/d(input).
template <typename T>
Mat<T> generator_backward(const GeneratorSpec& spec, const GeneratorWeights<T>& w, const GeneratorCache<T>& cache,
                          const Mat<T>& dout, GeneratorWeights<T>& grads) {
  const auto g = spec.geometry();
  const int depth = spec.depth();
  std::vector<Mat<T>> d_enc(static_cast<std::size_t>(depth));

  Mat<T> dpre = nn::tanh_backward(cache.output, dout);
  for (int j = depth - 1; j >= 0; --j) {
    const auto uj = static_cast<std::size_t>(j);
    const auto& p = w.decoder[uj];
    auto& gp = grads.decoder[uj];
    Mat<T> du = nn::tconv_backward(cache.dec_in[uj], p.weight, dpre, g, gp.weight, &gp.bias);
    if (j == 0) {
      d_enc[static_cast<std::size_t>(depth - 1)] = du.topRows(spec.code_channels());
      break;
    }
    // dec_in[j] = [decoder j-1 output | encoder output depth-1-j]
    const Eigen::Index half = du.rows() / 2;
    d_enc[static_cast<std::size_t>(depth - 1 - j)] = du.bottomRows(half);
    const auto& prev = w.decoder[uj - 1];
    dpre = nn::prelu_backward(cache.dec_pre[uj - 1], prev.alpha, Mat<T>(du.topRows(half)), grads.decoder[uj - 1].alpha);
  }

  Mat<T> dx;
  for (int i = depth - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto& p = w.encoder[ui];
    auto& gp = grads.encoder[ui];
    Mat<T> dp = nn::prelu_backward(cache.enc_pre[ui], p.alpha, d_enc[ui], gp.alpha);
    Mat<T> dh = nn::conv_backward(cache.enc_in[ui], p.weight, dp, g, gp.weight, &gp.bias);
    if (i > 0) {
      d_enc[ui - 1] += dh;
    } else {
      dx = std::move(dh);
    }
  }
  return dx;
}

// A single generator: spec plus (possibly shared) weights.
template <typename T>
class Generator {
 public:
  Generator(GeneratorSpec spec, std::shared_ptr<GeneratorWeights<T>> weights)
      : spec_(std::move(spec)), weights_(std::move(weights)) {}

  const GeneratorSpec& spec() const { return spec_; }
  GeneratorWeights<T>& weights() { return *weights_; }
  const GeneratorWeights<T>& weights() const { return *weights_; }
  const std::shared_ptr<GeneratorWeights<T>>& shared_weights() const { return weights_; }

  Mat<T> forward(const Mat<T>& x, const Mat<T>& z, GeneratorCache<T>* cache = nullptr) const {
    return generator_forward(spec_, *weights_, x, z, cache);
  }
  Mat<T> backward(const GeneratorCache<T>& cache, const Mat<T>& dout, GeneratorWeights<T>& grads) const {
    return generator_backward(spec_, *weights_, cache, dout, grads);
  }
  std::int64_t parameter_count() const { return weights_->parameter_count(); }

 private:
  GeneratorSpec spec_;
  std::shared_ptr<GeneratorWeights<T>> weights_;
};

template <typename T>
Generator<T> build_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  return Generator<T>(spec, std::make_shared<GeneratorWeights<T>>(init_generator_weights<T>(spec, seed)));
}

// Standard-normal latent of the bottleneck shape.
template <typename T>
Mat<T> sample_latent(const GeneratorSpec& spec, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat<T> z(spec.code_channels(), spec.code_length());
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<T>(normal(rng));
  return z;
}

}  // namespace segan
