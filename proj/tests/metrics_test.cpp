// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <numbers>

#include "segan/metrics.hpp"
#include "segan/wav.hpp"
#include "support.hpp"

namespace segan {
namespace {

namespace fs = std::filesystem;

std::vector<double> add(const std::vector<double>& x, const std::vector<double>& n, double gain) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + gain * n[i];
  return y;
}

// Noise scaled so the whole-signal SNR against x is snr dB.
std::vector<double> noisy_at(const std::vector<double>& x, double snr, std::uint64_t seed) {
  const auto n = testing::random_signal(x.size(), seed, 1.0);
  return add(x, n, std::sqrt(mean_power(x) / (mean_power(n) * std::pow(10.0, snr / 10.0))));
}

TEST(Ssnr, IdenticalSignalsHitTheCeilingExactly) {
  const auto x = testing::speech_fixture();
  EXPECT_EQ(ssnr(x, x), 35.0);
  const auto w = testing::random_signal(4000, 3);
  EXPECT_EQ(ssnr(w, w), 35.0);
}

TEST(Ssnr, StationaryNoiseAtZeroDbIsNearZero) {
  const auto x = testing::random_signal(32000, 4, 0.1);
  const double v = ssnr(x, noisy_at(x, 0.0, 5));
  EXPECT_GE(v, -3.0);
  EXPECT_LE(v, 3.0);
}

TEST(Ssnr, FloorAndGainInvariance) {
  const auto x = testing::random_signal(16000, 6, 0.1);
  EXPECT_EQ(ssnr(x, noisy_at(x, -60.0, 7)), -10.0);
  const auto y = noisy_at(x, 5.0, 8);
  std::vector<double> xs(x.size());
  std::vector<double> ys(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xs[i] = 0.25 * x[i];
    ys[i] = 0.25 * y[i];
  }
  EXPECT_NEAR(ssnr(xs, ys), ssnr(x, y), 1e-9);
}

TEST(Ssnr, MatchesFrameByFrameOracle) {
  const auto x = testing::random_signal(2400, 9, 0.1);
  const auto y = noisy_at(x, 3.0, 10);
  // 480-sample frames, hop 120, nothing silent.
  double sum = 0.0;
  int count = 0;
  for (std::size_t s = 0; s + 480 <= x.size(); s += 120) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = s; i < s + 480; ++i) {
      num += x[i] * x[i];
      den += (x[i] - y[i]) * (x[i] - y[i]);
    }
    sum += std::clamp(10.0 * std::log10(num / den), -10.0, 35.0);
    ++count;
  }
  EXPECT_NEAR(ssnr(x, y), sum / count, 1e-12);
}

TEST(Ssnr, Errors) {
  const std::vector<double> a(1000, 0.0);
  EXPECT_THROW(ssnr(a, a), DataError);
  EXPECT_THROW(ssnr(std::vector<double>(10, 1.0), std::vector<double>(11, 1.0)), DataError);
  FrameConfig bad;
  bad.snr_floor_db = 40.0;
  EXPECT_THROW(ssnr(testing::random_signal(100, 1), testing::random_signal(100, 2), bad), ConfigError);
}

TEST(Stoi, SelfScoreIsOne) {
  const auto x = testing::speech_fixture();
  EXPECT_GE(stoi(x, x), 1.0 - 1e-6);
}

TEST(Stoi, DecreasesWithNoise) {
  const auto x = testing::speech_fixture();
  const double s20 = stoi(x, noisy_at(x, 20.0, 11));
  const double s0 = stoi(x, noisy_at(x, 0.0, 11));
  const double sm10 = stoi(x, noisy_at(x, -10.0, 11));
  EXPECT_GT(s20, s0);
  EXPECT_GT(s0, sm10);
  EXPECT_LT(s20, 1.0);
}

TEST(Stoi, BandTable) {
  const auto cf = third_octave_centers();
  ASSERT_EQ(cf.size(), 15u);
  for (int k = 0; k < 15; ++k) EXPECT_EQ(cf[static_cast<std::size_t>(k)], 150.0 * std::pow(2.0, k / 3.0));
  EXPECT_NEAR(cf.back(), 3809.76, 0.01);
  const auto obm = third_octave_matrix();
  ASSERT_EQ(obm.rows(), 15);
  ASSERT_EQ(obm.cols(), 257);
  // Band 0 spans 133.6 to 168.4 Hz; at 19.53 Hz per bin that snaps to bins 7 and 8.
  EXPECT_EQ(obm.row(0).sum(), 2.0);
  EXPECT_EQ(obm(0, 7), 1.0);
  EXPECT_EQ(obm(0, 8), 1.0);
  for (int k = 1; k < 15; ++k) EXPECT_GE(obm.row(k).sum(), obm.row(k - 1).sum());
  EXPECT_LE(obm.colwise().sum().maxCoeff(), 1.0);
}

TEST(Stoi, ResamplerPreservesInBandTones) {
  std::vector<double> x(16000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * 1000.0 * i / 16000.0);
  const auto y = detail::resample(x, 10000, 16000);
  ASSERT_EQ(y.size(), 10000u);
  for (std::size_t j = 500; j < 9500; ++j) {
    ASSERT_NEAR(y[j], std::sin(2.0 * std::numbers::pi * 1000.0 * j / 10000.0), 2e-3) << j;
  }
}

TEST(Stoi, TooShortInputIsAnError) {
  const auto x = testing::random_signal(3000, 1);
  EXPECT_THROW(stoi(x, x), DataError);
  EXPECT_THROW(stoi(x, std::vector<double>(10)), DataError);
}

fs::path write_script(const fs::path& dir, const std::string& name, const std::string& body) {
  const fs::path p = dir / name;
  std::ofstream(p) << "#!/bin/sh\n" << body;
  fs::permissions(p, fs::perms::owner_all);
  return p;
}

TEST(ExternalMetric, ReadsRequestedValues) {
  const auto dir = testing::scratch_dir("adapter_ok");
  const auto tool = write_script(dir, "tool.sh", "echo \"PESQ 1.97\"\necho \"CSIG 3.25\"\necho \"EXTRA 9\"\n");
  const auto r = external_metric(tool.string(), dir / "a.wav", dir / "b c.wav", {"PESQ", "CSIG", "CBAK"});
  ASSERT_TRUE(r.available) << r.diagnostic;
  EXPECT_EQ(r.values, (std::map<std::string, double>{{"PESQ", 1.97}, {"CSIG", 3.25}}));
}

TEST(ExternalMetric, MissingToolIsUnavailable) {
  const auto r = external_metric("/nonexistent/pesq-tool", "a.wav", "b.wav", {"PESQ"});
  EXPECT_FALSE(r.available);
  EXPECT_NE(r.diagnostic.find("not found"), std::string::npos);
}

TEST(ExternalMetric, NonFiniteOrMalformedOutputIsAnError) {
  const auto dir = testing::scratch_dir("adapter_nan");
  const auto nan_tool = write_script(dir, "nan.sh", "echo \"PESQ nan\"\n");
  EXPECT_THROW(external_metric(nan_tool.string(), "a", "b", {"PESQ"}), DataError);
  const auto junk_tool = write_script(dir, "junk.sh", "echo \"PESQ is 2\"\n");
  EXPECT_THROW(external_metric(junk_tool.string(), "a", "b", {"PESQ"}), DataError);
}

TEST(ExternalMetric, NonZeroExitIsUnavailable) {
  const auto dir = testing::scratch_dir("adapter_exit");
  const auto tool = write_script(dir, "fail.sh", "echo \"PESQ 2.0\"\nexit 3\n");
  const auto r = external_metric(tool.string(), "a", "b", {"PESQ"});
  EXPECT_FALSE(r.available);
  EXPECT_NE(r.diagnostic.find("status 3"), std::string::npos);
}

TEST(MeanStd, PopulationStatistics) {
  const auto m = mean_std({8, 8.5, 9, 8.5, 8});
  EXPECT_NEAR(m.mean, 8.4, 1e-12);
  EXPECT_NEAR(m.std, std::sqrt(0.14), 1e-12);
  EXPECT_EQ(format_mean_std(m), "8.40 \xC2\xB1 0.37");
  EXPECT_EQ(format_mean_std(m, 3), "8.400 \xC2\xB1 0.374");
  const auto one = mean_std({1.97});
  EXPECT_EQ(one.std, 0.0);
  EXPECT_EQ(mean_std({}).count, 0u);
}

}  // namespace
}  // namespace segan
