// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include "eval_fixture.hpp"

namespace segan {
namespace {

namespace fs = std::filesystem;
using testing::make_run;
using testing::stub_adapter;

TEST(EvaluateRun, WorkedExampleFiveCheckpoints) {
  const auto dir = testing::scratch_dir("eval_five");
  const auto f = make_run(dir, 5);
  EvaluateOptions opt;
  opt.adapter_command = stub_adapter(dir, {8, 8.5, 9, 8.5, 8});
  const auto r = evaluate_run(f.runs, f.manifest, opt);
  const auto& pesq = r.aggregate.at("enhanced").at("PESQ");
  EXPECT_NEAR(pesq.mean, 8.4, 1e-12);
  EXPECT_NEAR(pesq.std, 0.374, 5e-4);
  EXPECT_EQ(pesq.count, 5u);
  EXPECT_EQ(format_mean_std(pesq), "8.40 \xC2\xB1 0.37");
  EXPECT_EQ(r.unavailable, (std::set<std::string>{"CSIG", "CBAK", "COVL"}));
  EXPECT_EQ(r.n_stages, 2);
  for (const auto& metric : {"SSNR", "STOI", "PESQ"}) EXPECT_EQ(r.curves.at(metric).size(), 2u) << metric;
  const auto table = format_report_table(r);
  EXPECT_NE(table.find("PESQ\tenhanced\t8.4\t"), std::string::npos);
  EXPECT_NE(table.find("CSIG\tenhanced\tunavailable"), std::string::npos);
  EXPECT_NE(table.find("population"), std::string::npos);
}

TEST(EvaluateRun, WorkedExampleTwoCheckpoints) {
  const auto dir = testing::scratch_dir("eval_two");
  const auto f = make_run(dir, 2, 1);
  EvaluateOptions opt;
  opt.adapter_command = stub_adapter(dir, {4.0, 6.0});
  opt.include_noisy = false;
  const auto r = evaluate_run(f.runs, f.manifest, opt);
  EXPECT_EQ(format_mean_std(r.aggregate.at("enhanced").at("PESQ")), "5.00 \xC2\xB1 1.00");
  EXPECT_TRUE(r.noisy.empty());
  EXPECT_EQ(r.curves.at("SSNR").size(), 1u);
}

TEST(EvaluateRun, AggregatesMatchBruteForce) {
  const auto dir = testing::scratch_dir("eval_brute");
  const auto f = make_run(dir, 3);
  const auto r = evaluate_run(f.runs, f.manifest);
  std::vector<double> ssnr_means;
  std::vector<std::vector<double>> stage_means(2);
  for (const auto& run : f.runs) {
    double total = 0.0;
    std::vector<double> stage_total(2, 0.0);
    for (const auto& e : f.manifest.entries) {
      const auto clean = read_wav(f.manifest.resolve(e.clean_path));
      total += ssnr(clean, read_wav(run.base_dir / "final" / (e.source_id + ".wav")));
      for (int s = 1; s <= 2; ++s) {
        stage_total[static_cast<std::size_t>(s - 1)] +=
            ssnr(clean, read_wav(run.base_dir / (e.source_id + ".stage" + std::to_string(s) + ".wav")));
      }
    }
    ssnr_means.push_back(total / 2.0);
    for (int s = 0; s < 2; ++s) stage_means[static_cast<std::size_t>(s)].push_back(stage_total[static_cast<std::size_t>(s)] / 2.0);
  }
  const auto expected = mean_std(ssnr_means);
  EXPECT_NEAR(r.aggregate.at("enhanced").at("SSNR").mean, expected.mean, 1e-9);
  EXPECT_NEAR(r.aggregate.at("enhanced").at("SSNR").std, expected.std, 1e-9);
  for (int s = 0; s < 2; ++s) {
    EXPECT_NEAR(r.curves.at("SSNR")[static_cast<std::size_t>(s)].mean, mean_std(stage_means[static_cast<std::size_t>(s)]).mean, 1e-9);
  }
  EXPECT_GT(r.curves.at("SSNR")[1].mean, r.curves.at("SSNR")[0].mean);
  EXPECT_GT(r.aggregate.at("enhanced").at("SSNR").mean, r.aggregate.at("noisy").at("SSNR").mean);
  EXPECT_EQ(r.aggregate.at("noisy").at("STOI").std, 0.0);
  const double stoi_pct = r.per_file.at("ckpt-100").at("spk09_u000").at("STOI");
  EXPECT_GT(stoi_pct, 1.0);
  EXPECT_LE(stoi_pct, 100.0);
  EXPECT_TRUE(r.unavailable.count("PESQ"));
  EXPECT_FALSE(r.aggregate.at("enhanced").count("PESQ"));
}

TEST(EvaluateRun, IndependentOfCheckpointOrderAndWorkers) {
  const auto dir = testing::scratch_dir("eval_order");
  auto f = make_run(dir, 3);
  const auto a = evaluate_run(f.runs, f.manifest);
  std::reverse(f.runs.begin(), f.runs.end());
  EvaluateOptions opt;
  opt.workers = 3;
  const auto b = evaluate_run(f.runs, f.manifest, opt);
  EXPECT_EQ(a.per_file, b.per_file);
  EXPECT_EQ(a.per_stage, b.per_stage);
  for (const auto& metric : {"SSNR", "STOI"}) {
    EXPECT_NEAR(a.aggregate.at("enhanced").at(metric).mean, b.aggregate.at("enhanced").at(metric).mean, 1e-12);
    EXPECT_NEAR(a.aggregate.at("enhanced").at(metric).std, b.aggregate.at("enhanced").at(metric).std, 1e-12);
  }
}

TEST(EvaluateRun, ExclusionsAndErrors) {
  const auto dir = testing::scratch_dir("eval_errors");
  auto f = make_run(dir, 2, 1);
  f.runs[0].entries.push_back({"stranger", "final", "final/stranger.wav"});
  const auto r = evaluate_run(f.runs, f.manifest);
  ASSERT_FALSE(r.diagnostics.empty());
  EXPECT_NE(r.diagnostics[0].find("stranger"), std::string::npos);
  EXPECT_EQ(r.per_file.at("ckpt-100").size(), 2u);

  auto dup = f.runs;
  dup.push_back(f.runs[0]);
  EXPECT_THROW(evaluate_run(dup, f.manifest), ConfigError);
  EXPECT_THROW(evaluate_run({}, f.manifest), DataError);
  Manifest other;
  other.base_dir = dir;
  other.entries.push_back({"nobody", "clean/x.wav", "noisy/x.wav", "white", 0.0, Split::kTest, 0});
  EXPECT_THROW(evaluate_run(f.runs, other), DataError);
}

TEST(EvaluateRun, CurvesAndPlotOutput) {
  const auto dir = testing::scratch_dir("eval_curves");
  const auto f = make_run(dir, 2, 3);
  const auto r = evaluate_run(f.runs, f.manifest);
  const auto curves = format_curves(r);
  EXPECT_NE(curves.find("metric\tstage\tmean\tstd\n"), std::string::npos);
  EXPECT_NE(curves.find("SSNR\t3\t"), std::string::npos);
  EXPECT_EQ(curves.find("SSNR\t4\t"), std::string::npos);
  const auto svg = render_curve_svg("SSNR", r.curves.at("SSNR"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 5, true);
  std::size_t circles = 0;
  for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
  EXPECT_EQ(circles, 3u);
}

}  // namespace
}  // namespace segan
