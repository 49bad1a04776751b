// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <sstream>

#include "segan/cli.hpp"
#include "support.hpp"

namespace segan::cli {
namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "segan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Outcome o;
  o.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

// One training pair and two one-second test mixtures.
fs::path write_corpus_config(const fs::path& dir) {
  std::ofstream(dir / "corpus.cfg") << "[corpus]\n"
                                       "n_speakers_train = 1\n"
                                       "n_speakers_test = 1\n"
                                       "noise_types = white\n"
                                       "train_snrs_db = 5\n"
                                       "test_snrs_db = 2.5, 7.5\n"
                                       "utterance_seconds = 1.0\n";
  return dir / "corpus.cfg";
}

fs::path write_run_config(const fs::path& dir, const std::string& model, int n, const std::string& extra = "") {
  std::ofstream(dir / "run.cfg") << "[run]\nmodel = " << model << "\nn_stages = " << n
                                 << "\ncorpus = corpus/manifest.tsv\noutput_dir = run\n"
                                    "[model]\nencoder_channels = 2,4\nfilter_width = 3\ninput_length = 16\n"
                                    "[train]\nepochs = 1\n"
                                 << extra;
  return dir / "run.cfg";
}

TEST(Cli, MakeCorpusNeedsASeed) {
  const auto dir = testing::scratch_dir("cli_seed");
  const auto cfg = write_corpus_config(dir);
  const auto o = invoke({"--config", cfg.string(), "make-corpus", "--out", (dir / "c").string()});
  EXPECT_EQ(o.code, kExitConfig);
  EXPECT_NE(o.err.find("seed"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "c"));
}

TEST(Cli, MakeCorpusRefusesToOverwrite) {
  const auto dir = testing::scratch_dir("cli_overwrite");
  const auto cfg = write_corpus_config(dir);
  const std::vector<std::string> args{"--seed", "4", "--config", cfg.string(), "make-corpus", (dir / "c").string()};
  const auto first = invoke(args);
  ASSERT_EQ(first.code, kExitOk) << first.err;
  EXPECT_EQ(first.out, (dir / "c" / "manifest.tsv").string() + "\n");
  const auto bytes = testing::tree_bytes(dir / "c");
  EXPECT_EQ(invoke(args).code, kExitOverwrite);
  auto forced = args;
  forced.insert(forced.begin(), "--force");
  EXPECT_EQ(invoke(forced).code, kExitOk);
  EXPECT_EQ(testing::tree_bytes(dir / "c"), bytes);
}

TEST(Cli, ParseErrorsAreConfigErrors) {
  EXPECT_EQ(invoke({}).code, kExitConfig);
  EXPECT_EQ(invoke({"bogus"}).code, kExitConfig);
  EXPECT_EQ(invoke({"enhance", "--manifest", "m"}).code, kExitConfig);
  EXPECT_EQ(invoke({"--workers", "0", "make-corpus"}).code, kExitConfig);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
}

TEST(Cli, SingleStageModelRejectsChains) {
  const auto dir = testing::scratch_dir("cli_segan2");
  const auto cfg = write_run_config(dir, "segan", 2);
  const auto o = invoke({"--seed", "1", "--config", cfg.string(), "train"});
  EXPECT_EQ(o.code, kExitConfig);
  EXPECT_NE(o.err.find("n_stages"), std::string::npos);
}

TEST(Cli, MissingCorpusIsARuntimeFailure) {
  const auto dir = testing::scratch_dir("cli_nocorpus");
  const auto cfg = write_run_config(dir, "segan", 1);
  EXPECT_EQ(invoke({"--seed", "1", "--config", cfg.string(), "train"}).code, kExitRuntime);
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::scratch_dir("cli_pipeline");
    const auto corpus_cfg = write_corpus_config(dir_);
    ASSERT_EQ(invoke({"--seed", "2", "--config", corpus_cfg.string(), "make-corpus", (dir_ / "corpus").string()}).code,
              kExitOk);
    const auto run_cfg = write_run_config(dir_, "dsegan", 2, "checkpoint_every = 15\nkeep_last = 3\n");
    const auto o = invoke({"--seed", "3", "--config", run_cfg.string(), "train"});
    ASSERT_EQ(o.code, kExitOk) << o.err;
    last_checkpoint_ = o.out;
    std::ofstream(dir_ / "adapter.sh") << "#!/bin/sh\necho \"PESQ 1.97\"\n";
    fs::permissions(dir_ / "adapter.sh", fs::perms::owner_all);
  }
  static fs::path dir_;
  static std::string last_checkpoint_;
};
fs::path CliPipeline::dir_;
std::string CliPipeline::last_checkpoint_;

TEST_F(CliPipeline, TrainEchoesResolvedDefaults) {
  const auto echo = testing::slurp(dir_ / "run" / "config.txt");
  EXPECT_NE(echo.find("train.batch_size = 50\n"), std::string::npos);
  EXPECT_NE(echo.find("run.seed = 3\n"), std::string::npos);
  EXPECT_NE(echo.find("train.learning_rate = 2e-04\n"), std::string::npos);
  EXPECT_NE(echo.find("model.encoder_channels = 2,4\n"), std::string::npos);
  const auto names = read_run_manifest(dir_ / "run");
  ASSERT_FALSE(names.empty());
  EXPECT_EQ(last_checkpoint_, (dir_ / "run" / names.back()).string() + "\n");
  EXPECT_LE(names.size(), 3u);
  EXPECT_FALSE(fs::exists(dir_ / "run" / ".lock"));
}

TEST_F(CliPipeline, EnhanceAndEvaluateWithStubAdapter) {
  const auto manifest = (dir_ / "corpus" / "manifest.tsv").string();
  const auto e = invoke({"enhance", "--checkpoint", (dir_ / "run").string(), "--manifest", manifest, "--out",
                         (dir_ / "enh").string(), "--checkpoints", "all", "--per-stage"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const auto names = read_run_manifest(dir_ / "run");
  for (const auto& n : names) {
    EXPECT_TRUE(fs::exists(dir_ / "enh" / n / "index.tsv"));
    EXPECT_TRUE(fs::exists(dir_ / "enh" / n / "spk01_u000_white_2p5.stage1.wav"));
  }
  EXPECT_EQ(invoke({"enhance", "--checkpoint", (dir_ / "run").string(), "--manifest", manifest, "--out",
                    (dir_ / "enh").string()})
                .code,
            kExitOverwrite);

  const auto report = dir_ / "rep" / "report.tsv";
  const auto v = invoke({"evaluate", "--enhanced", (dir_ / "enh").string(), "--manifest", manifest, "--report",
                         report.string(), "--adapter", (dir_ / "adapter.sh").string(), "--per-stage", "--plot"});
  ASSERT_EQ(v.code, kExitOk) << v.err;
  const auto table = testing::slurp(report);
  EXPECT_NE(table.find("PESQ\tenhanced\t1.97\t0\t1.97 \xC2\xB1 0.00\t" + std::to_string(names.size())),
            std::string::npos)
      << table;
  EXPECT_NE(table.find("CSIG\tenhanced\tunavailable"), std::string::npos);
  const auto curves = testing::slurp(dir_ / "rep" / "report.curves.tsv");
  EXPECT_NE(curves.find("SSNR\t2\t"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "rep" / "report.per_file.tsv"));
  EXPECT_TRUE(fs::exists(dir_ / "rep" / "report.STOI.svg"));
  EXPECT_EQ(invoke({"evaluate", "--enhanced", (dir_ / "enh").string(), "--manifest", manifest, "--report",
                    report.string()})
                .code,
            kExitOverwrite);
}

TEST_F(CliPipeline, EnhanceSingleCheckpointIsDeterministic) {
  const auto manifest = (dir_ / "corpus" / "manifest.tsv").string();
  const std::string ckpt = last_checkpoint_.substr(0, last_checkpoint_.size() - 1);
  ASSERT_EQ(invoke({"enhance", "--checkpoint", ckpt, "--manifest", manifest, "--out", (dir_ / "e1").string()}).code,
            kExitOk);
  ASSERT_EQ(invoke({"--workers", "2", "enhance", "--checkpoint", ckpt, "--manifest", manifest, "--out",
                    (dir_ / "e2").string()})
                .code,
            kExitOk);
  EXPECT_EQ(testing::tree_bytes(dir_ / "e1"), testing::tree_bytes(dir_ / "e2"));
  EXPECT_TRUE(fs::exists(dir_ / "e1" / "final" / "spk01_u000_white_7p5.wav"));
  EXPECT_FALSE(fs::exists(dir_ / "e1" / "spk01_u000_white_7p5.stage1.wav"));
}

TEST_F(CliPipeline, BrokenCheckpointIsAConfigError) {
  const auto manifest = (dir_ / "corpus" / "manifest.tsv").string();
  fs::create_directories(dir_ / "fake-ckpt");
  const auto o = invoke({"enhance", "--checkpoint", (dir_ / "fake-ckpt").string(), "--manifest", manifest, "--out",
                         (dir_ / "e3").string()});
  EXPECT_EQ(o.code, kExitConfig);
  EXPECT_FALSE(fs::exists(dir_ / "e3"));
}

TEST_F(CliPipeline, EvaluateWithNoMatchingReferencesFails) {
  const auto manifest = (dir_ / "corpus" / "manifest.tsv").string();
  ASSERT_EQ(invoke({"enhance", "--checkpoint", (dir_ / "run").string(), "--manifest", manifest, "--out",
                    (dir_ / "e4").string()})
                .code,
            kExitOk);
  const auto other = dir_ / "other_manifest.tsv";
  std::ofstream(other) << kManifestHeader << "\nnobody\tclean/x.wav\tnoisy/x.wav\twhite\t5\ttest\t0\n";
  const auto o = invoke({"evaluate", "--enhanced", (dir_ / "e4").string(), "--manifest", other.string(), "--report",
                         (dir_ / "rep2" / "r.tsv").string()});
  EXPECT_EQ(o.code, kExitRuntime);
}

TEST_F(CliPipeline, TrainingIntoALockedDirectoryIsRefused) {
  const auto run_cfg = dir_ / "run.cfg";
  fs::create_directories(dir_ / "locked");
  EXPECT_NO_THROW({ DirectoryLock lock(dir_ / "locked"); });
  DirectoryLock held(dir_ / "locked");
  EXPECT_THROW(DirectoryLock again(dir_ / "locked"), OverwriteError);
  const auto o = invoke({"--seed", "3", "--config", run_cfg.string(), "train", "--out", (dir_ / "locked").string()});
  EXPECT_EQ(o.code, kExitOverwrite);
}

TEST(CliBinary, ExitCodesFromTheExecutable) {
  const auto dir = testing::scratch_dir("cli_binary");
  const auto cfg = write_corpus_config(dir);
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  const std::string exe = SEGAN_CLI_PATH;
  EXPECT_EQ(status(exe + " --config " + cfg.string() + " make-corpus " + (dir / "a").string()), kExitConfig);
  EXPECT_EQ(status(exe + " --seed 1 --config " + cfg.string() + " make-corpus " + (dir / "a").string()), kExitOk);
  EXPECT_EQ(status(exe + " --seed 1 --config " + cfg.string() + " make-corpus " + (dir / "a").string()), kExitOverwrite);
}

}  // namespace
}  // namespace segan::cli
