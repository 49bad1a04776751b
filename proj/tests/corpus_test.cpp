// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <set>

#include "segan/corpus.hpp"
#include "segan/wav.hpp"
#include "support.hpp"

namespace segan {
namespace {

namespace fs = std::filesystem;

CorpusSpec small_spec(std::uint64_t seed) {
  CorpusSpec s;
  s.seed = seed;
  s.utterance_seconds = 0.5;
  return s;
}

TEST(SyntheticCorpus, LayoutAndCounts) {
  const auto dir = testing::scratch_dir("corpus_layout");
  const Manifest m = build_synthetic_corpus(small_spec(1), dir);
  EXPECT_EQ(m.select(Split::kTrain).size(), 2u * 4u * 4u);
  EXPECT_EQ(m.select(Split::kTest).size(), 1u * 4u * 4u);
  EXPECT_TRUE(fs::exists(dir / "manifest.tsv"));
  EXPECT_TRUE(fs::exists(dir / "clean" / "spk00_u000.wav"));
  EXPECT_TRUE(fs::exists(dir / "noisy" / "spk02_u000_hum_12p5.wav"));
  const Manifest back = read_manifest(dir / "manifest.tsv");
  EXPECT_EQ(format_manifest(back), format_manifest(m));
  for (const auto& e : m.entries) EXPECT_EQ(read_wav(m.resolve(e.noisy_path)).size(), 8000u);
}

TEST(SyntheticCorpus, FilesHitTheirNominalSnr) {
  const auto dir = testing::scratch_dir("corpus_snr");
  const Manifest m = build_synthetic_corpus(small_spec(2), dir);
  for (const auto& e : m.entries) {
    const Waveform clean = read_wav(m.resolve(e.clean_path));
    const Waveform noisy = read_wav(m.resolve(e.noisy_path));
    std::vector<double> noise(clean.size());
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = noisy[i] - clean[i];
    EXPECT_NEAR(snr_db(clean.samples, noise), e.snr_db, 0.01) << e.source_id;
  }
}

TEST(SyntheticCorpus, SeededAndSpeakerDisjoint) {
  const auto a = testing::scratch_dir("corpus_seed_a");
  const auto b = testing::scratch_dir("corpus_seed_b");
  const auto c = testing::scratch_dir("corpus_seed_c");
  const Manifest m = build_synthetic_corpus(small_spec(3), a);
  build_synthetic_corpus(small_spec(3), b);
  build_synthetic_corpus(small_spec(4), c);
  EXPECT_EQ(testing::tree_bytes(a), testing::tree_bytes(b));
  EXPECT_NE(testing::slurp(a / "clean" / "spk00_u000.wav"), testing::slurp(c / "clean" / "spk00_u000.wav"));
  std::set<std::string> train;
  std::set<std::string> test;
  for (const auto& e : m.entries) (e.split == Split::kTrain ? train : test).insert(speaker_of(e.source_id));
  EXPECT_EQ(train, (std::set<std::string>{"spk00", "spk01"}));
  EXPECT_EQ(test, (std::set<std::string>{"spk02"}));
}

TEST(SyntheticCorpus, ConfigRequiresSeed) {
  KeyValueConfig kv;
  kv.set("corpus.n_speakers_train", "1");
  try {
    corpus_spec_from_config(kv);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("corpus.seed"), std::string::npos);
  }
  kv.set("corpus.seed", "9");
  kv.set("corpus.noise_types", "white,hum");
  kv.set("corpus.train_snrs_db", "5");
  const auto s = corpus_spec_from_config(kv);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.noise_types, (std::vector<std::string>{"white", "hum"}));
  EXPECT_EQ(s.train_snrs_db, std::vector<double>{5});
  kv.set("corpus.noise_types", "traffic");
  EXPECT_THROW(corpus_spec_from_config(kv), ConfigError);
}

TEST(Manifest, RejectsMalformedRows) {
  const auto dir = testing::scratch_dir("manifest_bad");
  std::ofstream(dir / "m.tsv") << kManifestHeader << "\nid\tc.wav\tn.wav\twhite\tten\ttrain\t0\n";
  EXPECT_THROW(read_manifest(dir / "m.tsv"), DataError);
  std::ofstream(dir / "h.tsv") << "id\tpath\n";
  EXPECT_THROW(read_manifest(dir / "h.tsv"), DataError);
  EXPECT_THROW(read_manifest(dir / "none.tsv"), DataError);
}

TEST(Ingest, PairsByNameAndReportsProblems) {
  const auto dir = testing::scratch_dir("ingest");
  const auto x = quantize_waveform(testing::random_signal(1600, 1, 0.1));
  const auto n = quantize_waveform(testing::random_signal(1600, 2, 0.01));
  std::vector<double> noisy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) noisy[i] = x[i] + n[i];
  write_wav(dir / "clean" / "good.wav", x);
  write_wav(dir / "noisy" / "good.wav", noisy);
  write_wav(dir / "clean" / "orphan.wav", x);
  write_wav(dir / "clean" / "short.wav", x);
  write_wav(dir / "noisy" / "short.wav", std::vector<double>(x.begin(), x.begin() + 100));
  write_wav(dir / "clean" / "hifi.wav", x);
  std::ofstream(dir / "noisy" / "hifi.wav", std::ios::binary) << encode_wav(noisy, 44100);

  const auto r = ingest_corpus(dir / "clean", dir / "noisy", Split::kTest, dir);
  ASSERT_EQ(r.manifest.entries.size(), 1u);
  const auto& e = r.manifest.entries[0];
  EXPECT_EQ(e.source_id, "good");
  EXPECT_EQ(e.clean_path, "clean/good.wav");
  EXPECT_EQ(e.split, Split::kTest);
  EXPECT_NEAR(e.snr_db, snr_db(x, n), 1e-9);
  ASSERT_EQ(r.diagnostics.size(), 3u);
  const std::string all = r.diagnostics[0] + r.diagnostics[1] + r.diagnostics[2];
  EXPECT_NE(all.find("44100"), std::string::npos);
  EXPECT_NE(all.find("orphan"), std::string::npos);
  EXPECT_NE(all.find("length mismatch"), std::string::npos);

  fs::create_directories(dir / "empty");
  EXPECT_THROW(ingest_corpus(dir / "clean", dir / "empty", Split::kTrain, dir), DataError);
  EXPECT_THROW(ingest_corpus(dir / "nope", dir / "noisy", Split::kTrain, dir), DataError);
}

std::vector<LoadedPair> scaled_pairs() {
  // 40 samples at length 16, hop 8: 4 windows; 10 samples: 1 padded window.
  std::vector<LoadedPair> out;
  for (std::size_t len : {40u, 10u}) {
    auto x = testing::random_signal(len, len, 0.2);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i];
    out.push_back({"p" + std::to_string(len), Waveform{x}, Waveform{y}});
  }
  return out;
}

TEST(Batches, CoverEverySegmentOnceWithAlignedPairs) {
  const auto pairs = scaled_pairs();
  const auto batches = iterate_batches(pairs, 2, 5, 16);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 2u);
  EXPECT_EQ(batches[2].size(), 1u);
  std::multiset<std::pair<std::string, std::int64_t>> seen;
  for (const auto& b : batches) {
    for (const auto& s : b) {
      ASSERT_EQ(s.clean.size(), 16u);
      ASSERT_EQ(s.noisy.size(), 16u);
      EXPECT_EQ(s.clean.source_offset, s.noisy.source_offset);
      for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(s.noisy.samples[i], 2.0 * s.clean.samples[i], 1e-15);
      seen.insert({s.source_id, s.clean.source_offset});
    }
  }
  const std::multiset<std::pair<std::string, std::int64_t>> expected{
      {"p40", 0}, {"p40", 8}, {"p40", 16}, {"p40", 24}, {"p10", 0}};
  EXPECT_EQ(seen, expected);
}

TEST(Batches, PreemphasizesEachWindow) {
  const auto pairs = scaled_pairs();
  for (const auto& b : iterate_batches(pairs, 5, 1, 16)) {
    for (const auto& s : b) {
      if (s.source_id != "p40") continue;
      const auto& raw = pairs[0].clean.samples;
      const auto off = static_cast<std::size_t>(s.clean.source_offset);
      const auto window = std::vector<double>(raw.begin() + static_cast<std::ptrdiff_t>(off),
                                              raw.begin() + static_cast<std::ptrdiff_t>(off + 16));
      EXPECT_EQ(s.clean.samples, preemphasize(std::span<const double>(window)));
    }
  }
}

TEST(Batches, ShuffleDependsOnlyOnEpochSeed) {
  const auto pairs = scaled_pairs();
  auto order = [&](std::uint64_t seed) {
    std::vector<std::pair<std::string, std::int64_t>> o;
    for (const auto& b : iterate_batches(pairs, 2, seed, 16)) {
      for (const auto& s : b) o.emplace_back(s.source_id, s.clean.source_offset);
    }
    return o;
  };
  EXPECT_EQ(order(7), order(7));
  bool any_differs = false;
  for (std::uint64_t s = 8; s < 20 && !any_differs; ++s) any_differs = order(s) != order(7);
  EXPECT_TRUE(any_differs);
  EXPECT_THROW(iterate_batches({}, 2, 1, 16), DataError);
}

TEST(LoadPairs, ReadsOnlyTheRequestedSplit) {
  const auto dir = testing::scratch_dir("corpus_load");
  CorpusSpec s = small_spec(5);
  s.noise_types = {"white"};
  const Manifest m = build_synthetic_corpus(s, dir);
  const auto train = load_pairs(m, Split::kTrain);
  const auto test = load_pairs(m, Split::kTest);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 4u);
  for (const auto& p : test) EXPECT_EQ(speaker_of(p.source_id), "spk02");
}

}  // namespace
}  // namespace segan
