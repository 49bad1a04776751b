// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cstring>

#include "segan/wav.hpp"
#include "support.hpp"

namespace segan {
namespace {

std::vector<unsigned char> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

TEST(Wav, RoundTripIsExactOnTheQuantizationGrid) {
  const auto x = quantize_waveform(testing::random_signal(1234, 5, 0.2));
  const auto bytes = bytes_of(encode_wav(x));
  WavInfo info;
  const Waveform w = decode_wav(bytes, "mem", &info);
  EXPECT_EQ(w.samples, x);
  EXPECT_EQ(info.rate, 16000);
  EXPECT_EQ(info.channels, 1);
  EXPECT_EQ(info.bits_per_sample, 16);
  EXPECT_EQ(info.frames, 1234u);
}

TEST(Wav, ScalesByTwoToTheFifteenth) {
  const auto bytes = bytes_of(encode_wav(std::vector<double>{0.5, -1.0, 16384.0 / 32768.0}));
  const Waveform w = decode_wav(bytes);
  EXPECT_EQ(w.samples[0], 0.5);
  EXPECT_EQ(w.samples[1], -1.0);
}

TEST(Wav, ClipsOutOfRangeSamples) {
  const auto bytes = bytes_of(encode_wav(std::vector<double>{1.7, -3.0, 1.0}));
  const Waveform w = decode_wav(bytes);
  EXPECT_EQ(w.samples[0], 32767.0 / 32768.0);
  EXPECT_EQ(w.samples[1], -1.0);
  EXPECT_EQ(w.samples[2], 32767.0 / 32768.0);
}

TEST(Wav, RejectsOtherRates) {
  const auto bytes = bytes_of(encode_wav(std::vector<double>(10, 0.1), 44100));
  try {
    decode_wav(bytes, "x.wav");
    FAIL() << "expected rejection";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("44100"), std::string::npos);
  }
}

TEST(Wav, RejectsStereoAndOtherDepths) {
  std::string s = encode_wav(std::vector<double>(10, 0.1));
  std::string stereo = s;
  stereo[22] = 2;
  EXPECT_THROW(decode_wav(bytes_of(stereo)), DataError);
  std::string eight = s;
  eight[34] = 8;
  EXPECT_THROW(decode_wav(bytes_of(eight)), DataError);
  std::string floaty = s;
  floaty[20] = 3;
  EXPECT_THROW(decode_wav(bytes_of(floaty)), DataError);
  EXPECT_THROW(decode_wav(bytes_of("RIFF....WAVE")), DataError);
  EXPECT_THROW(decode_wav(bytes_of("hello")), DataError);
}

TEST(Wav, SkipsUnknownChunks) {
  std::string s = encode_wav(std::vector<double>{0.25, -0.25});
  std::string extra = "LIST";
  extra += std::string("\x03\x00\x00\x00", 4) + "abc" + std::string(1, '\0');
  s.insert(36, extra);
  const Waveform w = decode_wav(bytes_of(s));
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w.samples[0], 0.25);
}

TEST(Wav, FileRoundTrip) {
  const auto dir = testing::scratch_dir("wav_file");
  const auto x = quantize_waveform(testing::random_signal(100, 2, 0.1));
  write_wav(dir / "sub" / "a.wav", x);
  EXPECT_EQ(read_wav(dir / "sub" / "a.wav").samples, x);
  EXPECT_THROW(read_wav(dir / "missing.wav"), DataError);
}

}  // namespace
}  // namespace segan
