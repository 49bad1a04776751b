// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line front end: make-corpus, train, enhance, evaluate.
//
// Exit status: 0 success, 2 configuration error, 3 refused overwrite,
// 4 runtime or data failure.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>

#include "segan/checkpoint.hpp"
#include "segan/config.hpp"
#include "segan/corpus.hpp"
#include "segan/enhance.hpp"
#include "segan/errors.hpp"
#include "segan/metrics.hpp"
#include "segan/train.hpp"

namespace segan::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitOverwrite = 3;
inline constexpr int kExitRuntime = 4;

// The CLI trains and runs models in single precision.
using Scalar = float;

class OverwriteError : public Error {
 public:
  using Error::Error;
};

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  bool force = false;
  int workers = 1;
};

// Refuses to write into a non-empty directory unless forced, in which
// case the directory is cleared first.
inline void prepare_output_dir(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir) && !fs::is_directory(dir)) throw OverwriteError(dir.string() + " exists and is not a directory");
  if (fs::is_directory(dir) && !fs::is_empty(dir)) {
    if (!force) throw OverwriteError(dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir, ec);
    if (ec) throw DataError(dir.string() + ": cannot clear: " + ec.message());
  }
  fs::create_directories(dir, ec);
  if (ec) throw DataError(dir.string() + ": cannot create: " + ec.message());
}

// Exclusive ownership of a directory for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw OverwriteError(dir.string() + " is locked by another process (" + path_.string() + ")");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

inline KeyValueConfig load_config(const GlobalOptions& g) {
  if (g.config.empty()) return {};
  return KeyValueConfig::load(g.config);
}

// Relative paths inside a config file resolve against the file's directory.
inline fs::path config_relative(const GlobalOptions& g, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || g.config.empty()) return path;
  return fs::path(g.config).parent_path() / path;
}

// ---------------------------------------------------------------------------

inline int cmd_make_corpus(const GlobalOptions& g, const std::string& out_arg, std::ostream& out, std::ostream& err) {
  KeyValueConfig kv = load_config(g);
  if (g.seed) kv.set("corpus.seed", std::to_string(*g.seed));
  if (!kv.has("corpus.seed")) throw ConfigError("seed", "missing required field (corpus.seed or --seed)");
  const CorpusSpec spec = corpus_spec_from_config(kv);
  const std::string out_dir = !out_arg.empty() ? out_arg : kv.get_string("corpus.output_dir", "");
  if (out_dir.empty()) throw ConfigError("output_dir", "missing (corpus.output_dir or --out)");
  const fs::path dir = out_arg.empty() ? config_relative(g, out_dir) : fs::path(out_dir);
  prepare_output_dir(dir, g.force);
  const Manifest m = build_synthetic_corpus(spec, dir);
  out << (dir / "manifest.tsv").string() << "\n";
  err << "wrote " << m.entries.size() << " manifest entries\n";
  return kExitOk;
}

struct RunConfig {
  ModelKind model = ModelKind::kSegan;
  int n_stages = 1;
  TrainConfig train;
  GeneratorSpec spec;
  fs::path corpus;
  fs::path output_dir;
  std::uint64_t seed = 0;
};

inline RunConfig run_config_from(KeyValueConfig& kv, const GlobalOptions& g, const std::string& out_arg) {
  RunConfig rc;
  if (g.seed) kv.set("run.seed", std::to_string(*g.seed));
  if (!kv.has("run.seed")) throw ConfigError("seed", "missing required field (run.seed or --seed)");
  rc.seed = kv.get_int<std::uint64_t>("run.seed");
  rc.model = parse_model_kind(kv.get_string("run.model", "segan"), "run.model");
  rc.n_stages = kv.get_int<int>("run.n_stages", 1);
  chain_config_for(rc.model, rc.n_stages);
  rc.train = train_config_from(kv);
  rc.spec = spec_from_config(kv);
  rc.corpus = config_relative(g, kv.require("run.corpus"));
  if (!out_arg.empty()) {
    rc.output_dir = out_arg;
  } else {
    rc.output_dir = config_relative(g, kv.require("run.output_dir"));
  }
  // Echo the resolved values, defaults included.
  kv.set("run.model", to_string(rc.model));
  kv.set("run.n_stages", std::to_string(rc.n_stages));
  kv.set("train.epochs", std::to_string(rc.train.epochs));
  kv.set("train.learning_rate", format_double(rc.train.learning_rate));
  kv.set("train.batch_size", std::to_string(rc.train.resolved_batch_size(rc.n_stages)));
  kv.set("train.rmsprop_decay", format_double(rc.train.rmsprop_decay));
  kv.set("train.rmsprop_epsilon", format_double(rc.train.rmsprop_epsilon));
  kv.set("train.checkpoint_every", std::to_string(rc.train.checkpoint_every));
  kv.set("train.keep_last", std::to_string(rc.train.keep_last));
  const KeyValueConfig spec_values = spec_to_config(rc.spec);
  for (const auto& [k, v] : spec_values.values()) kv.set(k, v);
  return rc;
}

inline int cmd_train(const GlobalOptions& g, const std::string& out_arg, std::ostream& out, std::ostream& err) {
  KeyValueConfig kv = load_config(g);
  const RunConfig rc = run_config_from(kv, g, out_arg);
  const Manifest manifest = read_manifest(rc.corpus);
  const std::vector<LoadedPair> data = load_pairs(manifest, Split::kTrain);
  if (data.empty()) throw DataError(rc.corpus.string() + ": no training entries");

  prepare_output_dir(rc.output_dir, g.force);
  DirectoryLock lock(rc.output_dir);
  ParameterStore<Scalar> models = build_models<Scalar>(rc.model, rc.n_stages, rc.spec, rc.seed);
  err << "model " << to_string(rc.model) << " N=" << rc.n_stages << ": generator parameters "
            << models.generator_parameter_count() << ", discriminator parameters "
            << models.discriminator_parameter_count() << "\n";
  const TrainResult result = train(models, data, rc.train, rc.output_dir, kv.to_string(), [&err](const LossRecord& r) {
    err << format_loss_record(r) << "\n";
  });
  out << (rc.output_dir / result.checkpoints.back()).string() << "\n";
  return kExitOk;
}

// Sorts checkpoint names by their step number.
inline std::vector<std::string> order_checkpoints(std::vector<std::string> names) {
  auto step_of = [](const std::string& n) -> std::int64_t {
    const auto dash = n.rfind('-');
    if (dash == std::string::npos) return -1;
    try {
      return KeyValueConfig::parse_int<std::int64_t>("checkpoint", n.substr(dash + 1));
    } catch (const ConfigError&) {
      return -1;
    }
  };
  std::stable_sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
    const auto sa = step_of(a);
    const auto sb = step_of(b);
    return sa != sb ? sa < sb : a < b;
  });
  return names;
}

// "all", "last" or "lastK"; anything else is a comma-separated name list.
inline std::vector<std::string> select_checkpoints(const std::vector<std::string>& ordered, const std::string& selector) {
  if (selector == "all") return ordered;
  if (selector.rfind("last", 0) == 0) {
    const std::string rest = selector.substr(4);
    const std::size_t k = rest.empty() ? 1 : KeyValueConfig::parse_int<std::size_t>("checkpoints", rest);
    if (k == 0) throw ConfigError("checkpoints", "lastK needs K >= 1");
    const std::size_t start = ordered.size() > k ? ordered.size() - k : 0;
    return {ordered.begin() + static_cast<std::ptrdiff_t>(start), ordered.end()};
  }
  std::vector<std::string> picked;
  for (auto& name : split(selector, ',')) {
    name = trim(name);
    if (std::find(ordered.begin(), ordered.end(), name) == ordered.end()) {
      throw ConfigError("checkpoints", "unknown checkpoint '" + name + "'");
    }
    picked.push_back(name);
  }
  return picked;
}

struct EnhanceArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::string checkpoints = "last";
  std::string split = "test";
  bool per_stage = false;
  bool zero_latent = false;
};

inline int cmd_enhance(const GlobalOptions& g, const EnhanceArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path ckpt(a.checkpoint);
  std::vector<std::pair<std::string, fs::path>> targets;  // (checkpoint id, checkpoint dir)
  bool nested = false;
  if (fs::exists(ckpt / "checkpoints.txt")) {
    nested = true;
    const auto names = select_checkpoints(order_checkpoints(read_run_manifest(ckpt)), a.checkpoints);
    if (names.empty()) throw DataError(ckpt.string() + ": run has no checkpoints");
    for (const auto& n : names) targets.emplace_back(n, ckpt / n);
  } else {
    targets.emplace_back(fs::absolute(ckpt).lexically_normal().filename().string(), ckpt);
  }
  const Manifest manifest = read_manifest(a.manifest);
  const auto inputs = batch_inputs(manifest, parse_split(a.split));

  // Load everything before touching the output directory.
  std::vector<ParameterStore<Scalar>> stores;
  for (const auto& [id, dir] : targets) {
    try {
      stores.push_back(load_checkpoint<Scalar>(dir));
    } catch (const DataError& e) {
      throw ConfigError("checkpoint", e.what());
    }
  }
  const fs::path out_dir(a.out);
  prepare_output_dir(out_dir, g.force);
  DirectoryLock lock(out_dir);
  std::size_t failed = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    BatchEnhanceOptions opt;
    opt.seed = g.seed ? *g.seed : stores[i].seed;
    opt.zero_latent = a.zero_latent;
    opt.per_stage = a.per_stage;
    opt.workers = g.workers;
    opt.checkpoint_id = targets[i].first;
    const fs::path dest = nested ? out_dir / targets[i].first : out_dir;
    const auto summary = batch_enhance<Scalar>(stores[i].chain, inputs, dest, opt);
    for (const auto& d : summary.diagnostics) err << "skipped " << d << "\n";
    failed += summary.failed;
    out << (dest / "index.tsv").string() << "\n";
  }
  if (failed > 0) err << failed << " input(s) could not be enhanced\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string enhanced;
  std::string manifest;
  std::string report;
  std::string checkpoints = "all";
  std::string adapter;
  bool per_stage = false;
  bool plot = false;
};

// An index file, a directory holding index.tsv, or a directory of
// per-checkpoint subdirectories that each hold index.tsv.
inline std::vector<EnhancedIndex> find_indexes(const fs::path& p, const std::string& selector) {
  auto load = [](const fs::path& file, const std::string& id) {
    EnhancedIndex idx = read_index(file);
    idx.checkpoint_id = id;
    return idx;
  };
  if (fs::is_regular_file(p)) {
    return {load(p, fs::absolute(p).lexically_normal().parent_path().filename().string())};
  }
  if (!fs::is_directory(p)) throw DataError(p.string() + ": no enhanced index found");
  if (fs::is_regular_file(p / "index.tsv")) {
    return {load(p / "index.tsv", fs::absolute(p).lexically_normal().filename().string())};
  }
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_directory() && fs::is_regular_file(e.path() / "index.tsv")) names.push_back(e.path().filename().string());
  }
  if (names.empty()) throw DataError(p.string() + ": no enhanced index found");
  std::vector<EnhancedIndex> out;
  for (const auto& n : select_checkpoints(order_checkpoints(names), selector)) out.push_back(load(p / n / "index.tsv", n));
  return out;
}

inline std::string format_per_file(const MetricReport& r) {
  std::string out = report_header(r);
  out += "checkpoint\tsource_id\tstage\tmetric\tvalue\n";
  auto rows = [&](const std::string& ckpt, const std::string& id, const std::string& stage, const MetricValues& v) {
    for (const auto& metric : r.metrics) {
      const auto it = v.find(metric);
      if (it != v.end()) out += ckpt + "\t" + id + "\t" + stage + "\t" + metric + "\t" + format_double(it->second) + "\n";
    }
  };
  for (const auto& [id, v] : r.noisy) rows("noisy", id, "input", v);
  for (const auto& c : r.checkpoints) {
    const auto files = r.per_file.find(c);
    if (files == r.per_file.end()) continue;
    for (const auto& [id, v] : files->second) {
      const auto stages = r.per_stage.find(c);
      if (stages != r.per_stage.end()) {
        if (const auto s = stages->second.find(id); s != stages->second.end()) {
          for (const auto& [k, sv] : s->second) rows(c, id, std::to_string(k), sv);
        }
      }
      rows(c, id, "final", v);
    }
  }
  return out;
}

inline int cmd_evaluate(const GlobalOptions& g, const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  KeyValueConfig kv = load_config(g);
  const auto runs = find_indexes(a.enhanced, a.checkpoints);
  const Manifest manifest = read_manifest(a.manifest);
  EvaluateOptions opt;
  opt.adapter_command = !a.adapter.empty() ? a.adapter : kv.get_string("evaluate.adapter", "");
  opt.frame.frame_ms = kv.get_double("evaluate.frame_ms", opt.frame.frame_ms);
  opt.frame.overlap_fraction = kv.get_double("evaluate.overlap_fraction", opt.frame.overlap_fraction);
  opt.workers = g.workers;

  const fs::path report(a.report);
  const fs::path stem = report.parent_path() / report.stem();
  const fs::path curves = stem.string() + ".curves.tsv";
  const fs::path per_file = stem.string() + ".per_file.tsv";
  if (!g.force) {
    for (const auto& p : {report, curves, per_file}) {
      if (fs::exists(p)) throw OverwriteError(p.string() + " exists (use --force to overwrite)");
    }
  }
  const MetricReport r = evaluate_run(runs, manifest, opt);
  for (const auto& d : r.diagnostics) err << d << "\n";
  if (!report.parent_path().empty()) fs::create_directories(report.parent_path());
  detail::write_text(report, format_report_table(r));
  detail::write_text(per_file, format_per_file(r));
  out << report.string() << "\n";
  if (a.per_stage || a.plot) {
    detail::write_text(curves, format_curves(r));
    out << curves.string() << "\n";
  }
  if (a.plot) {
    for (const auto& [metric, curve] : r.curves) {
      const fs::path svg = stem.string() + "." + metric + ".svg";
      detail::write_text(svg, render_curve_svg(metric, curve));
      out << svg.string() << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Training, enhancement and evaluation for chained speech-enhancement GANs"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Root seed; every random stream derives from it");
  app.add_option("--config", g.config, "Key-value configuration file");
  app.add_flag("--force", g.force, "Overwrite existing outputs");
  app.add_option("--workers", g.workers, "Parallel workers for per-file work")->check(CLI::PositiveNumber);

  std::string corpus_out;
  auto* make_corpus = app.add_subcommand("make-corpus", "Generate a synthetic clean/noisy corpus");
  make_corpus->add_option("--out,out_dir", corpus_out, "Output directory");

  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run configuration");
  train_cmd->add_option("--out", train_out, "Run directory (overrides run.output_dir)");

  EnhanceArgs ea;
  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance the test split of a manifest");
  enhance_cmd->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory or run directory")->required();
  enhance_cmd->add_option("--manifest", ea.manifest, "Corpus manifest")->required();
  enhance_cmd->add_option("--out", ea.out, "Output directory")->required();
  enhance_cmd->add_option("--checkpoints", ea.checkpoints, "With a run directory: last, lastK, all or names");
  enhance_cmd->add_option("--split", ea.split, "Manifest split to enhance")->check(CLI::IsMember({"train", "test"}));
  enhance_cmd->add_flag("--per-stage", ea.per_stage, "Keep every stage's output");
  enhance_cmd->add_flag("--zero-latent", ea.zero_latent, "Use z = 0 instead of sampled latents");

  EvaluateArgs va;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score enhanced outputs against references");
  evaluate_cmd->add_option("--enhanced", va.enhanced, "Enhanced index or directory of checkpoint outputs")->required();
  evaluate_cmd->add_option("--manifest", va.manifest, "Reference manifest")->required();
  evaluate_cmd->add_option("--report", va.report, "Report table path")->required();
  evaluate_cmd->add_option("--checkpoints", va.checkpoints, "last, lastK (e.g. last5), all or names");
  evaluate_cmd->add_option("--adapter", va.adapter, "External metric command, run as <cmd> <clean> <test>");
  evaluate_cmd->add_flag("--per-stage", va.per_stage, "Write the per-stage curve file");
  evaluate_cmd->add_flag("--plot", va.plot, "Write SVG plots of metric vs. stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (make_corpus->parsed()) return cmd_make_corpus(g, corpus_out, out, err);
    if (train_cmd->parsed()) return cmd_train(g, train_out, out, err);
    if (enhance_cmd->parsed()) return cmd_enhance(g, ea, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(g, va, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const OverwriteError& e) {
    err << "refusing to overwrite: " << e.what() << "\n";
    return kExitOverwrite;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace segan::cli
