// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// One-dimensional layer primitives with explicit backward passes.
// Activations are (channels x time) row-major matrices; a strided
// convolution is lowered to a GEMM over an im2col buffer and the
// transposed convolution is its exact adjoint.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "segan/errors.hpp"
#include "segan/rng.hpp"

namespace segan::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Odd kernel width with symmetric "same" padding; a stride-s convolution
// maps length L to L/s and the transposed convolution maps L to s*L.
struct ConvGeometry {
  int width = 31;
  int stride = 2;
  int pad() const { return (width - 1) / 2; }
};

// cols((c*K + k), t) = x(c, s*t + k - P), zero outside [0, L).
template <typename T>
Mat<T> im2col(const Mat<T>& x, ConvGeometry g, Eigen::Index out_len) {
  const Eigen::Index channels = x.rows();
  const Eigen::Index in_len = x.cols();
  const int k_width = g.width;
  const int s = g.stride;
  const int p = g.pad();
  Mat<T> cols = Mat<T>::Zero(channels * k_width, out_len);
  for (Eigen::Index c = 0; c < channels; ++c) {
    const T* src = x.row(c).data();
    for (int k = 0; k < k_width; ++k) {
      T* dst = cols.row(c * k_width + k).data();
      const Eigen::Index shift = k - p;
      // valid t: 0 <= s*t + shift < in_len
      const Eigen::Index t_lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
      const Eigen::Index t_hi = std::min<Eigen::Index>(out_len, in_len - shift <= 0 ? 0 : (in_len - shift - 1) / s + 1);
      for (Eigen::Index t = t_lo; t < t_hi; ++t) dst[t] = src[s * t + shift];
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-adds columns back into a (channels x in_len) signal.
template <typename T>
Mat<T> col2im(const Mat<T>& cols, Eigen::Index channels, ConvGeometry g, Eigen::Index in_len) {
  const int k_width = g.width;
  const int s = g.stride;
  const int p = g.pad();
  const Eigen::Index out_len = cols.cols();
  Mat<T> x = Mat<T>::Zero(channels, in_len);
  for (Eigen::Index c = 0; c < channels; ++c) {
    T* dst = x.row(c).data();
    for (int k = 0; k < k_width; ++k) {
      const T* src = cols.row(c * k_width + k).data();
      const Eigen::Index shift = k - p;
      const Eigen::Index t_lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
      const Eigen::Index t_hi = std::min<Eigen::Index>(out_len, in_len - shift <= 0 ? 0 : (in_len - shift - 1) / s + 1);
      for (Eigen::Index t = t_lo; t < t_hi; ++t) dst[s * t + shift] += src[t];
    }
  }
  return x;
}

// Strided convolution. weight: out x (in*K); bias: out x 1 (may be empty).
template <typename T>
Mat<T> conv_forward(const Mat<T>& x, const Mat<T>& weight, const Mat<T>& bias, ConvGeometry g) {
  if (x.cols() % g.stride != 0) throw ConfigError("conv", "input length not divisible by stride");
  const Mat<T> cols = im2col(x, g, x.cols() / g.stride);
  Mat<T> y(weight.rows(), cols.cols());
  y.noalias() = weight * cols;
  if (bias.size() > 0) y.colwise() += bias.col(0);
  return y;
}

// Accumulates weight/bias gradients and returns d(loss)/d(x).
template <typename T>
Mat<T> conv_backward(const Mat<T>& x, const Mat<T>& weight, const Mat<T>& dy, ConvGeometry g, Mat<T>& dweight,
                     Mat<T>* dbias) {
  const Mat<T> cols = im2col(x, g, dy.cols());
  dweight.noalias() += dy * cols.transpose();
  if (dbias != nullptr && dbias->size() > 0) dbias->col(0) += dy.rowwise().sum();
  Mat<T> dcols(weight.cols(), dy.cols());
  dcols.noalias() = weight.transpose() * dy;
  return col2im(dcols, x.rows(), g, x.cols());
}

// Fractional-stride (transposed) convolution. weight: in x (out*K).
template <typename T>
Mat<T> tconv_forward(const Mat<T>& x, const Mat<T>& weight, const Mat<T>& bias, ConvGeometry g) {
  const Eigen::Index out_channels = weight.cols() / g.width;
  Mat<T> cols(weight.cols(), x.cols());
  cols.noalias() = weight.transpose() * x;
  Mat<T> y = col2im(cols, out_channels, g, x.cols() * g.stride);
  if (bias.size() > 0) y.colwise() += bias.col(0);
  return y;
}

template <typename T>
Mat<T> tconv_backward(const Mat<T>& x, const Mat<T>& weight, const Mat<T>& dy, ConvGeometry g, Mat<T>& dweight,
                      Mat<T>* dbias) {
  const Mat<T> dcols = im2col(dy, g, x.cols());
  dweight.noalias() += x * dcols.transpose();
  if (dbias != nullptr && dbias->size() > 0) dbias->col(0) += dy.rowwise().sum();
  Mat<T> dx(weight.rows(), x.cols());
  dx.noalias() = weight * dcols;
  return dx;
}

// Per-channel parametric ReLU; alpha: channels x 1.
template <typename T>
Mat<T> prelu_forward(const Mat<T>& x, const Mat<T>& alpha) {
  Mat<T> y = x;
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const T a = alpha(c, 0);
    y.row(c) = x.row(c).unaryExpr([a](T v) { return v > T(0) ? v : a * v; });
  }
  return y;
}

template <typename T>
Mat<T> prelu_backward(const Mat<T>& x, const Mat<T>& alpha, const Mat<T>& dy, Mat<T>& dalpha) {
  Mat<T> dx(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const T a = alpha(c, 0);
    T acc = 0;
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
      const T v = x(c, t);
      if (v > T(0)) {
        dx(c, t) = dy(c, t);
      } else {
        dx(c, t) = a * dy(c, t);
        acc += v * dy(c, t);
      }
    }
    dalpha(c, 0) += acc;
  }
  return dx;
}

template <typename T>
Mat<T> leaky_relu_forward(const Mat<T>& x, T slope) {
  return x.unaryExpr([slope](T v) { return v > T(0) ? v : slope * v; });
}

template <typename T>
Mat<T> leaky_relu_backward(const Mat<T>& x, T slope, const Mat<T>& dy) {
  return dy.binaryExpr(x, [slope](T g, T v) { return v > T(0) ? g : slope * g; });
}

template <typename T>
Mat<T> tanh_backward(const Mat<T>& y, const Mat<T>& dy) {
  return dy.binaryExpr(y, [](T g, T v) { return g * (T(1) - v * v); });
}

// Frozen per-channel statistics of the virtual-batch-norm reference batch.
template <typename T>
struct VbnReference {
  Mat<T> mean;     // channels x 1, E[x]
  Mat<T> mean_sq;  // channels x 1, E[x^2]
  std::int64_t batch_size = 0;
};

template <typename T>
struct VbnCache {
  Mat<T> centered;  // x - m
  Mat<T> inv_std;   // channels x 1
};

inline constexpr double kVbnEpsilon = 1e-5;

// Normalizes one example with statistics that mix the example's own
// moments (weight 1/(B+1)) with the reference moments (weight B/(B+1)).
template <typename T>
Mat<T> vbn_forward(const Mat<T>& x, const VbnReference<T>& ref, const Mat<T>& gamma, const Mat<T>& beta,
                   VbnCache<T>* cache) {
  const T a = T(1) / static_cast<T>(ref.batch_size + 1);
  const auto len = static_cast<T>(x.cols());
  Mat<T> y(x.rows(), x.cols());
  Mat<T> centered(x.rows(), x.cols());
  Mat<T> inv_std(x.rows(), 1);
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const T own_mean = x.row(c).sum() / len;
    const T own_sq = x.row(c).squaredNorm() / len;
    const T m = a * own_mean + (T(1) - a) * ref.mean(c, 0);
    const T s = a * own_sq + (T(1) - a) * ref.mean_sq(c, 0);
    const T var = std::max(s - m * m, T(0));
    const T r = T(1) / std::sqrt(var + static_cast<T>(kVbnEpsilon));
    inv_std(c, 0) = r;
    centered.row(c) = x.row(c).array() - m;
    y.row(c) = (centered.row(c).array() * (r * gamma(c, 0))) + beta(c, 0);
  }
  if (cache != nullptr) {
    cache->centered = std::move(centered);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Mat<T> vbn_backward(const VbnCache<T>& cache, const VbnReference<T>& ref, const Mat<T>& gamma, const Mat<T>& dy,
                    Mat<T>& dgamma, Mat<T>& dbeta) {
  const T a = T(1) / static_cast<T>(ref.batch_size + 1);
  const auto len = static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index c = 0; c < dy.rows(); ++c) {
    const T r = cache.inv_std(c, 0);
    const auto xc = cache.centered.row(c).array();
    const auto g = dy.row(c).array();
    dgamma(c, 0) += (g * xc).sum() * r;
    dbeta(c, 0) += g.sum();
    const auto dxh = g * gamma(c, 0);
    const T sum_dxh = dxh.sum();
    const T sum_dxh_xc = (dxh * xc).sum();
    dx.row(c) = dxh * r - (a * r / len) * sum_dxh - (a * r * r * r / len) * sum_dxh_xc * xc;
  }
  return dx;
}

// Zero-mean normal truncated at two standard deviations.
template <typename T>
void init_truncated_normal(Mat<T>& m, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v;
    do {
      v = normal(rng);
    } while (std::abs(v) > 2.0);
    m.data()[i] = static_cast<T>(v * stddev);
  }
}

template <typename T>
Mat<T> concat_channels(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols() != b.cols()) throw ConfigError("concat", "time lengths differ");
  Mat<T> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace segan::nn
