// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Objective evaluation: segmental SNR, short-time objective
// intelligibility, an adapter for external quality tools, and the
// checkpoint-aggregated report.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unsupported/Eigen/FFT>

#include "segan/config.hpp"
#include "segan/corpus.hpp"
#include "segan/enhance.hpp"
#include "segan/errors.hpp"
#include "segan/signal.hpp"
#include "segan/wav.hpp"

namespace segan {

// ---------------------------------------------------------------------------
// Segmental SNR

struct FrameConfig {
  double frame_ms = 30.0;
  double overlap_fraction = 0.75;
  double snr_floor_db = -10.0;
  double snr_ceil_db = 35.0;
  double silence_db = 40.0;  // frames this far below the loudest frame are skipped

  void validate() const {
    if (!(frame_ms > 0.0)) throw ConfigError("frame_ms", "must be positive");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) throw ConfigError("overlap_fraction", "must lie in [0, 1)");
    if (!(snr_floor_db < snr_ceil_db)) throw ConfigError("snr_floor_db", "floor must be below ceiling");
  }
};

inline double ssnr(std::span<const double> clean, std::span<const double> test, const FrameConfig& cfg = {},
                   int rate = kSampleRate) {
  cfg.validate();
  if (clean.size() != test.size()) {
    throw DataError("ssnr: length mismatch (" + std::to_string(clean.size()) + " vs " + std::to_string(test.size()) + ")");
  }
  if (clean.empty()) throw DataError("ssnr: empty input");
  const auto frame = std::min<std::size_t>(clean.size(), static_cast<std::size_t>(std::llround(cfg.frame_ms * rate / 1000.0)));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frame * (1.0 - cfg.overlap_fraction))));
  std::vector<double> signal_energy;
  std::vector<double> error_energy;
  for (std::size_t start = 0; start + frame <= clean.size(); start += hop) {
    double s = 0.0;
    double e = 0.0;
    for (std::size_t i = start; i < start + frame; ++i) {
      s += clean[i] * clean[i];
      const double d = clean[i] - test[i];
      e += d * d;
    }
    signal_energy.push_back(s);
    error_energy.push_back(e);
  }
  const double peak = *std::max_element(signal_energy.begin(), signal_energy.end());
  if (!(peak > 0.0)) throw DataError("ssnr: reference is silent");
  const double threshold = peak * std::pow(10.0, -cfg.silence_db / 10.0);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < signal_energy.size(); ++f) {
    if (signal_energy[f] <= threshold) continue;
    double snr = error_energy[f] > 0.0 ? 10.0 * std::log10(signal_energy[f] / error_energy[f]) : cfg.snr_ceil_db;
    snr = std::clamp(snr, cfg.snr_floor_db, cfg.snr_ceil_db);
    sum += snr;
    ++count;
  }
  return sum / static_cast<double>(count);
}

inline double ssnr(const Waveform& clean, const Waveform& test, const FrameConfig& cfg = {}) {
  if (clean.rate != test.rate) throw DataError("ssnr: sample rates differ");
  return ssnr(clean.samples, test.samples, cfg, clean.rate);
}

// ---------------------------------------------------------------------------
// STOI

namespace stoi_constants {
inline constexpr int kRate = 10000;
inline constexpr int kFrame = 256;
inline constexpr int kFft = 512;
inline constexpr int kBands = 15;
inline constexpr double kMinFreq = 150.0;
inline constexpr int kSegmentFrames = 30;
inline constexpr double kBeta = -15.0;
inline constexpr double kDynamicRange = 40.0;
}  // namespace stoi_constants

// Centre frequencies of the one-third-octave analysis bands.
inline std::vector<double> third_octave_centers(int bands = stoi_constants::kBands,
                                                double min_freq = stoi_constants::kMinFreq) {
  std::vector<double> cf(static_cast<std::size_t>(bands));
  for (int k = 0; k < bands; ++k) cf[static_cast<std::size_t>(k)] = min_freq * std::pow(2.0, k / 3.0);
  return cf;
}

// Rows are bands, columns FFT bins 0..nfft/2; band edges snap to the
// nearest bin and the upper edge bin is excluded.
inline Eigen::MatrixXd third_octave_matrix(int rate = stoi_constants::kRate, int nfft = stoi_constants::kFft,
                                           int bands = stoi_constants::kBands,
                                           double min_freq = stoi_constants::kMinFreq) {
  const int bins = nfft / 2 + 1;
  Eigen::MatrixXd obm = Eigen::MatrixXd::Zero(bands, bins);
  auto nearest_bin = [&](double f) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int b = 0; b < bins; ++b) {
      const double d = std::abs(static_cast<double>(b) * rate / nfft - f);
      if (d < best_d) {
        best_d = d;
        best = b;
      }
    }
    return best;
  };
  for (int k = 0; k < bands; ++k) {
    const int lo = nearest_bin(min_freq * std::pow(2.0, (2.0 * k - 1.0) / 6.0));
    const int hi = nearest_bin(min_freq * std::pow(2.0, (2.0 * k + 1.0) / 6.0));
    for (int b = lo; b < hi; ++b) obm(k, b) = 1.0;
  }
  return obm;
}

namespace detail {

inline double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// Polyphase rational resampler by up/down with a Kaiser-windowed sinc
// low-pass (half-length 10 input periods, beta 5), delay compensated.
inline std::vector<double> resample(std::span<const double> x, int up, int down) {
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return {x.begin(), x.end()};
  const int m = std::max(up, down);
  const int half = 10 * m;
  const int taps = 2 * half + 1;
  const double fc = 0.5 / m;
  const double beta = 5.0;
  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    const double n = i - half;
    const double sinc = n == 0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * n) / (std::numbers::pi * n);
    const double r = n / half;
    const double win = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / bessel_i0(beta);
    h[static_cast<std::size_t>(i)] = sinc * win;
    sum += h[static_cast<std::size_t>(i)];
  }
  for (double& v : h) v *= up / sum;
  const auto in_len = static_cast<std::int64_t>(x.size());
  const std::int64_t out_len = (in_len * up + down - 1) / down;
  std::vector<double> y(static_cast<std::size_t>(out_len), 0.0);
  for (std::int64_t j = 0; j < out_len; ++j) {
    // y[j] = sum_k h[k] u[j*down + half - k], u the zero-stuffed input.
    const std::int64_t centre = j * down + half;
    std::int64_t k0 = centre % up;  // first k with (centre - k) divisible by up
    double acc = 0.0;
    for (std::int64_t k = k0; k < taps; k += up) {
      const std::int64_t idx = (centre - k) / up;
      if (idx < 0) break;
      if (idx < in_len) acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(idx)];
    }
    y[static_cast<std::size_t>(j)] = acc;
  }
  return y;
}

inline std::vector<double> hann_inner(int n) {
  // Hann window of length n + 2 with both zero endpoints dropped.
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) / (n + 1));
  return w;
}

// Drops frames of x more than dyn_range dB below its loudest frame, from
// both signals, and overlap-adds the surviving windowed frames.
inline std::pair<std::vector<double>, std::vector<double>> remove_silent_frames(std::span<const double> x,
                                                                                std::span<const double> y,
                                                                                double dyn_range, int frame, int hop) {
  const auto w = hann_inner(frame);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + static_cast<std::size_t>(frame) <= x.size(); s += static_cast<std::size_t>(hop)) {
    starts.push_back(s);
  }
  std::vector<double> energy(starts.size());
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double e = 0.0;
    for (int i = 0; i < frame; ++i) {
      const double v = w[static_cast<std::size_t>(i)] * x[starts[f] + static_cast<std::size_t>(i)];
      e += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(e) + std::numeric_limits<double>::epsilon());
  }
  if (starts.empty()) return {};
  const double peak = *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> kept;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (energy[f] > peak - dyn_range) kept.push_back(starts[f]);
  }
  const std::size_t out_len = (kept.size() - 1) * static_cast<std::size_t>(hop) + static_cast<std::size_t>(frame);
  std::vector<double> xs(out_len, 0.0);
  std::vector<double> ys(out_len, 0.0);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    for (int i = 0; i < frame; ++i) {
      const auto o = j * static_cast<std::size_t>(hop) + static_cast<std::size_t>(i);
      xs[o] += w[static_cast<std::size_t>(i)] * x[kept[j] + static_cast<std::size_t>(i)];
      ys[o] += w[static_cast<std::size_t>(i)] * y[kept[j] + static_cast<std::size_t>(i)];
    }
  }
  return {std::move(xs), std::move(ys)};
}

// Band envelopes, bands x frames.
inline Eigen::MatrixXd band_envelopes(const std::vector<double>& x, const Eigen::MatrixXd& obm) {
  using namespace stoi_constants;
  const auto w = hann_inner(kFrame);
  const int hop = kFrame / 2;
  Eigen::FFT<double> fft;
  std::vector<double> buf(kFft);
  std::vector<std::complex<double>> spec;
  std::vector<Eigen::VectorXd> frames;
  for (std::size_t s = 0; s + kFrame < x.size(); s += hop) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int i = 0; i < kFrame; ++i) buf[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] * x[s + static_cast<std::size_t>(i)];
    fft.fwd(spec, buf);
    Eigen::VectorXd power(kFft / 2 + 1);
    for (int b = 0; b <= kFft / 2; ++b) power(b) = std::norm(spec[static_cast<std::size_t>(b)]);
    frames.push_back((obm * power).cwiseSqrt());
  }
  Eigen::MatrixXd out(obm.rows(), static_cast<Eigen::Index>(frames.size()));
  for (std::size_t f = 0; f < frames.size(); ++f) out.col(static_cast<Eigen::Index>(f)) = frames[f];
  return out;
}

}  // namespace detail

// Returns intelligibility in [0, 1] (reports multiply by 100).
inline double stoi(std::span<const double> clean, std::span<const double> test, int rate = kSampleRate) {
  using namespace stoi_constants;
  if (clean.size() != test.size()) {
    throw DataError("stoi: length mismatch (" + std::to_string(clean.size()) + " vs " + std::to_string(test.size()) + ")");
  }
  require_finite(clean, "stoi");
  require_finite(test, "stoi");
  std::vector<double> x(clean.begin(), clean.end());
  std::vector<double> y(test.begin(), test.end());
  if (rate != kRate) {
    x = detail::resample(x, kRate, rate);
    y = detail::resample(y, kRate, rate);
  }
  auto [xs, ys] = detail::remove_silent_frames(x, y, kDynamicRange, kFrame, kFrame / 2);
  const Eigen::MatrixXd obm = third_octave_matrix();
  const Eigen::MatrixXd xt = detail::band_envelopes(xs, obm);
  const Eigen::MatrixXd yt = detail::band_envelopes(ys, obm);
  if (xt.cols() < kSegmentFrames) {
    throw DataError("stoi: only " + std::to_string(xt.cols()) + " non-silent frames, need at least " +
                    std::to_string(kSegmentFrames));
  }
  const double clip = std::pow(10.0, -kBeta / 20.0);
  const double eps = std::numeric_limits<double>::epsilon();
  double total = 0.0;
  std::int64_t count = 0;
  for (Eigen::Index m = kSegmentFrames; m <= xt.cols(); ++m) {
    for (Eigen::Index j = 0; j < xt.rows(); ++j) {
      Eigen::VectorXd xseg = xt.row(j).segment(m - kSegmentFrames, kSegmentFrames).transpose();
      Eigen::VectorXd yseg = yt.row(j).segment(m - kSegmentFrames, kSegmentFrames).transpose();
      const double scale = xseg.norm() / (yseg.norm() + eps);
      Eigen::VectorXd yp = (yseg * scale).cwiseMin(xseg * (1.0 + clip));
      xseg.array() -= xseg.mean();
      yp.array() -= yp.mean();
      total += xseg.dot(yp) / ((xseg.norm() + eps) * (yp.norm() + eps));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

inline double stoi(const Waveform& clean, const Waveform& test) {
  if (clean.rate != test.rate) throw DataError("stoi: sample rates differ");
  return stoi(clean.samples, test.samples, clean.rate);
}

// ---------------------------------------------------------------------------
// External tool adapter

struct ExternalMetricResult {
  bool available = false;
  std::map<std::string, double> values;
  std::string diagnostic;
};

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

inline bool executable_exists(const std::string& command) {
  namespace fs = std::filesystem;
  const std::string exe = command.substr(0, command.find(' '));
  if (exe.empty()) return false;
  auto runnable = [](const fs::path& p) {
    std::error_code ec;
    const auto st = fs::status(p, ec);
    return !ec && fs::is_regular_file(st) && (st.permissions() & fs::perms::owner_exec) != fs::perms::none;
  };
  if (exe.find('/') != std::string::npos) return runnable(exe);
  const char* path = std::getenv("PATH");
  if (path == nullptr) return false;
  for (const auto& dir : split(path, ':')) {
    if (!dir.empty() && runnable(fs::path(dir) / exe)) return true;
  }
  return false;
}

}  // namespace detail

// Parses "name value" lines. Unknown names are kept; a NaN or malformed
// value is an error.
inline std::map<std::string, double> parse_metric_lines(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name;
    std::string value;
    std::string extra;
    if (!(fields >> name >> value) || (fields >> extra)) {
      throw DataError("metric adapter: cannot parse line '" + line + "'");
    }
    double v = 0.0;
    try {
      v = KeyValueConfig::parse_double(name, value);
    } catch (const ConfigError&) {
      throw DataError("metric adapter: non-numeric value for " + name + ": '" + value + "'");
    }
    if (!std::isfinite(v)) throw DataError("metric adapter: non-finite value for " + name);
    out[name] = v;
  }
  return out;
}

// Runs `<command> <clean> <test>` and reads the requested metrics from its
// standard output.
inline ExternalMetricResult external_metric(const std::string& command, const std::filesystem::path& clean_path,
                                            const std::filesystem::path& test_path,
                                            const std::vector<std::string>& metric_names) {
  ExternalMetricResult r;
  if (!detail::executable_exists(command)) {
    r.diagnostic = "metric adapter '" + command + "' not found";
    return r;
  }
  const std::string cmd = command + " " + detail::shell_quote(clean_path.string()) + " " +
                          detail::shell_quote(test_path.string()) + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    r.diagnostic = "metric adapter: cannot start '" + command + "'";
    return r;
  }
  std::string output;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) output.append(buf.data(), n);
  const int status = pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    r.diagnostic = "metric adapter exited with status " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) +
                   " for " + test_path.string();
    return r;
  }
  const auto parsed = parse_metric_lines(output);
  for (const auto& name : metric_names) {
    const auto it = parsed.find(name);
    if (it != parsed.end()) r.values[name] = it->second;
  }
  r.available = true;
  return r;
}

// ---------------------------------------------------------------------------
// Run evaluation

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population: divides by the number of values
  std::size_t count = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  r.count = v.size();
  if (v.empty()) return r;
  double sum = 0.0;
  for (double x : v) sum += x;
  r.mean = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(sq / static_cast<double>(v.size()));
  return r;
}

// "7.36 ± 0.72"
inline std::string format_mean_std(const MeanStd& m, int decimals = 2) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*f \xC2\xB1 %.*f", decimals, m.mean, decimals, m.std);
  return buf;
}

struct EvaluateOptions {
  FrameConfig frame;
  std::string adapter_command;  // empty: no external tool configured
  std::vector<std::string> adapter_metrics{"PESQ", "CSIG", "CBAK", "COVL"};
  bool include_noisy = true;
  int workers = 1;
};

using MetricValues = std::map<std::string, double>;

struct MetricReport {
  std::vector<std::string> checkpoints;
  std::vector<std::string> metrics;          // report order
  std::set<std::string> unavailable;         // metrics with no value anywhere
  int n_stages = 0;
  // checkpoint -> source -> metric, final stage. STOI is stored x100.
  std::map<std::string, std::map<std::string, MetricValues>> per_file;
  // checkpoint -> source -> stage (1-based) -> metric
  std::map<std::string, std::map<std::string, std::map<int, MetricValues>>> per_stage;
  std::map<std::string, MetricValues> noisy;  // source -> metric
  // system ("enhanced", "noisy") -> metric -> mean/std over checkpoint means
  std::map<std::string, std::map<std::string, MeanStd>> aggregate;
  // metric -> per-stage mean/std over checkpoint means
  std::map<std::string, std::vector<MeanStd>> curves;
  std::vector<std::string> diagnostics;
};

namespace detail {

struct EvalJob {
  std::string checkpoint;  // empty for the noisy baseline
  std::string source_id;
  int stage = 0;           // 0 = final / noisy
  std::filesystem::path test_path;
  std::filesystem::path clean_path;
};

inline MetricValues evaluate_pair(const EvalJob& job, const EvaluateOptions& opt, std::vector<std::string>& diags) {
  const Waveform clean = read_wav(job.clean_path);
  const Waveform test = read_wav(job.test_path);
  MetricValues v;
  v["SSNR"] = ssnr(clean, test, opt.frame);
  v["STOI"] = 100.0 * stoi(clean, test);
  if (!opt.adapter_command.empty()) {
    const auto ext = external_metric(opt.adapter_command, job.clean_path, job.test_path, opt.adapter_metrics);
    if (ext.available) {
      for (const auto& [k, x] : ext.values) v[k] = x;
    } else {
      diags.push_back(job.source_id + ": " + ext.diagnostic);
    }
  }
  return v;
}

inline int parse_stage(const std::string& s) {
  if (s == "final") return 0;
  return KeyValueConfig::parse_int<int>("stage", s);
}

}  // namespace detail

// Each enhanced index is one checkpoint's output. Metrics are computed per
// file and stage, averaged over files per checkpoint, and summarized as
// mean and population std over the checkpoint means.
inline MetricReport evaluate_run(const std::vector<EnhancedIndex>& runs, const Manifest& reference,
                                 const EvaluateOptions& opt = {}) {
  namespace fs = std::filesystem;
  opt.frame.validate();
  if (runs.empty()) throw DataError("evaluate: no checkpoints to evaluate");
  std::map<std::string, const ManifestEntry*> refs;
  for (const auto& e : reference.entries) refs[e.source_id] = &e;

  MetricReport report;
  std::vector<detail::EvalJob> jobs;
  std::set<std::string> noisy_sources;
  std::set<std::string> missing;
  for (const auto& run : runs) {
    if (std::find(report.checkpoints.begin(), report.checkpoints.end(), run.checkpoint_id) != report.checkpoints.end()) {
      throw ConfigError("checkpoints", "checkpoint '" + run.checkpoint_id + "' listed twice");
    }
    report.checkpoints.push_back(run.checkpoint_id);
    for (const auto& e : run.entries) {
      const auto it = refs.find(e.source_id);
      if (it == refs.end()) {
        missing.insert(e.source_id);
        continue;
      }
      int stage = 0;
      try {
        stage = detail::parse_stage(e.stage);
      } catch (const ConfigError&) {
        throw DataError(run.checkpoint_id + ": bad stage '" + e.stage + "' in enhanced index");
      }
      report.n_stages = std::max(report.n_stages, stage);
      const fs::path p = fs::path(e.path).is_absolute() ? fs::path(e.path) : run.base_dir / e.path;
      jobs.push_back({run.checkpoint_id, e.source_id, stage, p, reference.resolve(it->second->clean_path)});
      noisy_sources.insert(e.source_id);
    }
  }
  for (const auto& id : missing) report.diagnostics.push_back(id + ": no reference in manifest, excluded");
  if (jobs.empty()) throw DataError("evaluate: no enhanced file has a reference");
  if (opt.include_noisy) {
    for (const auto& id : noisy_sources) {
      const auto* e = refs.at(id);
      jobs.push_back({"", id, 0, reference.resolve(e->noisy_path), reference.resolve(e->clean_path)});
    }
  }

  std::vector<std::optional<MetricValues>> results(jobs.size());
  std::vector<std::vector<std::string>> diags(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = detail::evaluate_pair(jobs[i], opt, diags[i]);
      } catch (const Error& e) {
        diags[i].push_back(jobs[i].source_id + ": " + e.what());
      }
    }
  };
  const int workers = std::max(1, std::min<int>(opt.workers, static_cast<int>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Collect per-file values. A file with a failed stage is dropped from its
  // checkpoint entirely so every stage is averaged over the same files.
  std::set<std::string> metric_names;
  std::map<std::string, std::set<std::string>> failed;  // checkpoint -> sources
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (auto& d : diags[i]) report.diagnostics.push_back(std::move(d));
    if (!results[i]) {
      failed[jobs[i].checkpoint].insert(jobs[i].source_id);
      continue;
    }
    for (const auto& [k, v] : *results[i]) metric_names.insert(k);
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    if (!results[i] || failed[job.checkpoint].count(job.source_id)) continue;
    if (job.checkpoint.empty()) {
      report.noisy[job.source_id] = *results[i];
    } else if (job.stage == 0) {
      report.per_file[job.checkpoint][job.source_id] = *results[i];
    } else {
      report.per_stage[job.checkpoint][job.source_id][job.stage] = *results[i];
    }
  }
  for (const auto& c : report.checkpoints) {
    for (auto it = report.per_stage[c].begin(); it != report.per_stage[c].end();) {
      it = report.per_file[c].count(it->first) ? std::next(it) : report.per_stage[c].erase(it);
    }
  }
  std::size_t evaluable = 0;
  for (const auto& [c, files] : report.per_file) evaluable += files.size();
  if (evaluable == 0) throw DataError("evaluate: zero evaluable files");

  report.metrics = {"SSNR", "STOI"};
  for (const auto& name : opt.adapter_metrics) {
    if (!opt.adapter_command.empty() || metric_names.count(name)) report.metrics.push_back(name);
  }
  if (!opt.adapter_command.empty()) {
    for (const auto& name : opt.adapter_metrics) {
      if (!metric_names.count(name)) report.unavailable.insert(name);
    }
  } else {
    for (const auto& name : opt.adapter_metrics) {
      report.metrics.push_back(name);
      report.unavailable.insert(name);
    }
  }

  auto file_mean = [](const std::map<std::string, MetricValues>& files, const std::string& metric) -> std::optional<double> {
    std::vector<double> v;
    for (const auto& [id, values] : files) {
      const auto it = values.find(metric);
      if (it != values.end()) v.push_back(it->second);
    }
    if (v.empty()) return std::nullopt;
    return mean_std(v).mean;
  };
  for (const auto& metric : report.metrics) {
    if (report.unavailable.count(metric)) continue;
    std::vector<double> checkpoint_means;
    for (const auto& c : report.checkpoints) {
      if (const auto m = file_mean(report.per_file[c], metric)) checkpoint_means.push_back(*m);
    }
    if (!checkpoint_means.empty()) report.aggregate["enhanced"][metric] = mean_std(checkpoint_means);
    if (const auto m = file_mean(report.noisy, metric)) report.aggregate["noisy"][metric] = mean_std({*m});

    auto& curve = report.curves[metric];
    const int stages = std::max(report.n_stages, 1);
    for (int k = 1; k <= stages; ++k) {
      std::vector<double> means;
      for (const auto& c : report.checkpoints) {
        std::map<std::string, MetricValues> at_stage;
        if (report.n_stages == 0) {
          at_stage = report.per_file[c];
        } else {
          for (const auto& [id, by_stage] : report.per_stage[c]) {
            if (const auto it = by_stage.find(k); it != by_stage.end()) at_stage[id] = it->second;
          }
        }
        if (const auto m = file_mean(at_stage, metric)) means.push_back(*m);
      }
      curve.push_back(mean_std(means));
    }
  }
  return report;
}

inline std::string report_header(const MetricReport& r) {
  std::string out;
  out += "# std: population standard deviation (divide by K) across per-checkpoint means\n";
  out += "# scale: STOI reported x100; SSNR in dB\n";
  out += "# checkpoints: " + std::to_string(r.checkpoints.size()) + " (" + join(r.checkpoints, ",") + ")\n";
  return out;
}

// One row per metric x system, columns mean/std.
inline std::string format_report_table(const MetricReport& r) {
  std::string out = report_header(r);
  out += "metric\tsystem\tmean\tstd\tsummary\tcheckpoints\n";
  for (const std::string system : {"noisy", "enhanced"}) {
    if (system == "noisy" && r.noisy.empty()) continue;
    for (const auto& metric : r.metrics) {
      out += metric + "\t" + system + "\t";
      const auto sys = r.aggregate.find(system);
      const MeanStd* m = nullptr;
      if (sys != r.aggregate.end()) {
        const auto it = sys->second.find(metric);
        if (it != sys->second.end()) m = &it->second;
      }
      if (m == nullptr) {
        out += "unavailable\tunavailable\tunavailable\t0\n";
        continue;
      }
      out += format_double(m->mean) + "\t" + format_double(m->std) + "\t" + format_mean_std(*m) + "\t" +
             std::to_string(m->count) + "\n";
    }
  }
  return out;
}

// Stage index -> metric mean, for metric-vs-stage plots.
inline std::string format_curves(const MetricReport& r) {
  std::string out = report_header(r);
  out += "metric\tstage\tmean\tstd\n";
  for (const auto& metric : r.metrics) {
    const auto it = r.curves.find(metric);
    if (it == r.curves.end()) continue;
    for (std::size_t k = 0; k < it->second.size(); ++k) {
      out += metric + "\t" + std::to_string(k + 1) + "\t" + format_double(it->second[k].mean) + "\t" +
             format_double(it->second[k].std) + "\n";
    }
  }
  return out;
}

// Minimal SVG line plot of one metric against the stage index.
inline std::string render_curve_svg(const std::string& metric, const std::vector<MeanStd>& curve) {
  const double width = 480;
  const double height = 320;
  const double margin = 48;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : curve) {
    lo = std::min(lo, p.mean - p.std);
    hi = std::max(hi, p.mean + p.std);
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const auto n = curve.size();
  auto px = [&](std::size_t k) {
    return n <= 1 ? width / 2 : margin + (width - 2 * margin) * static_cast<double>(k) / static_cast<double>(n - 1);
  };
  auto py = [&](double v) { return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo); };
  std::ostringstream svg;
  char buf[256];
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\">" << metric
      << " vs. stage</text>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t k = 0; k < n; ++k) {
    std::snprintf(buf, sizeof(buf), "%s%.2f,%.2f", k ? " " : "", px(k), py(curve[k].mean));
    svg << buf;
  }
  svg << "\"/>\n";
  for (std::size_t k = 0; k < n; ++k) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"steelblue\"/>\n"
                  "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                  "font-size=\"12\">%zu</text>\n",
                  px(k), py(curve[k].mean), px(k), height - margin + 18, k + 1);
    svg << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                  "font-size=\"11\">%.2f</text>\n",
                  px(k), py(curve[k].mean) - 10, curve[k].mean);
    svg << buf;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace segan
