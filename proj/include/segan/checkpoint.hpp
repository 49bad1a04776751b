// Copyright 2026 The segan-chain Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Model state (generator chain + discriminator + counters) and its
// on-disk checkpoint directory:
//
//   ckpt-<step>/meta.txt          format_version, model, chain, spec, counters
//   ckpt-<step>/params.bin        g<k>/<tensor> and d/<tensor>
//   ckpt-<step>/vbn_reference.bin reference batch + per-layer statistics
//   ckpt-<step>/<extra files>     config echo, curriculum, loss history
//
// Directories are written under a temporary name and renamed into place.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "segan/chain.hpp"
#include "segan/config.hpp"
#include "segan/discriminator.hpp"
#include "segan/errors.hpp"
#include "segan/tensor_io.hpp"

namespace segan {

inline constexpr int kCheckpointFormatVersion = 1;

enum class ModelKind { kSegan, kIsegan, kDsegan };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kSegan:
      return "segan";
    case ModelKind::kIsegan:
      return "isegan";
    case ModelKind::kDsegan:
      return "dsegan";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(const std::string& s, const std::string& key = "model") {
  if (s == "segan") return ModelKind::kSegan;
  if (s == "isegan") return ModelKind::kIsegan;
  if (s == "dsegan") return ModelKind::kDsegan;
  throw ConfigError(key, "expected segan, isegan or dsegan, got '" + s + "'");
}

// segan => one stage; isegan => tied stages; dsegan => independent stages.
inline ChainConfig chain_config_for(ModelKind kind, int n_stages) {
  if (n_stages < 1) throw ConfigError("n_stages", "must be at least 1");
  if (kind == ModelKind::kSegan && n_stages != 1) {
    throw ConfigError("n_stages", "model segan requires n_stages = 1, got " + std::to_string(n_stages));
  }
  return ChainConfig{n_stages, kind == ModelKind::kIsegan};
}

template <typename T>
struct ParameterStore {
  ModelKind model = ModelKind::kSegan;
  GeneratorChain<T> chain;
  Discriminator<T> discriminator;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::uint64_t seed = 0;

  std::int64_t generator_parameter_count() const { return chain.parameter_count(); }
  std::int64_t discriminator_parameter_count() const { return discriminator.parameter_count(); }
  std::int64_t parameter_count() const { return generator_parameter_count() + discriminator_parameter_count(); }
};

template <typename T>
ParameterStore<T> build_models(ModelKind kind, int n_stages, const GeneratorSpec& spec, std::uint64_t seed) {
  const ChainConfig cc = chain_config_for(kind, n_stages);
  return ParameterStore<T>{kind, build_chain<T>(cc, spec, derive_seed(seed, "model:generator")),
                           Discriminator<T>(spec, derive_seed(seed, "model:discriminator")), 0, 0, seed};
}

inline std::string checkpoint_name(std::int64_t step) { return "ckpt-" + std::to_string(step); }

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace detail

inline KeyValueConfig spec_to_config(const GeneratorSpec& spec) {
  KeyValueConfig kv;
  kv.set("model.encoder_channels", join(spec.encoder_channels, ","));
  kv.set("model.filter_width", std::to_string(spec.filter_width));
  kv.set("model.stride", std::to_string(spec.stride));
  kv.set("model.input_length", std::to_string(spec.input_length));
  return kv;
}

inline GeneratorSpec spec_from_config(const KeyValueConfig& kv, const GeneratorSpec& defaults = {}) {
  GeneratorSpec spec = defaults;
  if (kv.has("model.encoder_channels")) {
    spec.encoder_channels.clear();
    for (const auto& c : kv.get_list("model.encoder_channels")) {
      spec.encoder_channels.push_back(KeyValueConfig::parse_int<int>("model.encoder_channels", c));
    }
  }
  spec.filter_width = kv.get_int<int>("model.filter_width", spec.filter_width);
  spec.stride = kv.get_int<int>("model.stride", spec.stride);
  spec.input_length = kv.get_int<std::int64_t>("model.input_length", spec.input_length);
  spec.validate();
  return spec;
}

template <typename T>
KeyValueConfig checkpoint_meta(const ParameterStore<T>& s) {
  KeyValueConfig kv = spec_to_config(s.chain.spec());
  kv.set("format_version", std::to_string(kCheckpointFormatVersion));
  kv.set("model.kind", to_string(s.model));
  kv.set("model.n_stages", std::to_string(s.chain.n_stages()));
  kv.set("model.tied", s.chain.config().tied_parameters ? "true" : "false");
  kv.set("state.step", std::to_string(s.step));
  kv.set("state.epoch", std::to_string(s.epoch));
  kv.set("state.seed", std::to_string(s.seed));
  kv.set("state.dtype", sizeof(T) == 4 ? "f32" : "f64");
  return kv;
}

// Writes a checkpoint directory atomically. extra_files maps file name to
// text content (config echo, curriculum, loss history).
template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParameterStore<T>& s,
                     const std::map<std::string, std::string>& extra_files = {}) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) throw DataError(tmp.string() + ": cannot create directory: " + ec.message());

  detail::write_text(tmp / "meta.txt", checkpoint_meta(s).to_string());

  NamedTensors<T> params;
  for (std::size_t k = 0; k < s.chain.stores().size(); ++k) {
    s.chain.stores()[k]->visit(
        [&](const std::string& name, const Mat<T>& m) { params.emplace_back("g" + std::to_string(k) + "/" + name, m); });
  }
  s.discriminator.weights().visit([&](const std::string& name, const Mat<T>& m) { params.emplace_back("d/" + name, m); });
  write_tensors(tmp / "params.bin", params);

  if (s.discriminator.has_reference()) {
    NamedTensors<T> ref;
    const auto& batch = s.discriminator.reference_batch();
    for (std::size_t b = 0; b < batch.size(); ++b) ref.emplace_back("batch/" + std::to_string(b), batch[b]);
    const auto& stats = s.discriminator.reference_stats();
    for (std::size_t i = 0; i < stats.size(); ++i) {
      ref.emplace_back("stats/" + std::to_string(i) + "/mean", stats[i].mean);
      ref.emplace_back("stats/" + std::to_string(i) + "/mean_sq", stats[i].mean_sq);
    }
    write_tensors(tmp / "vbn_reference.bin", ref);
  }
  for (const auto& [name, text] : extra_files) detail::write_text(tmp / name, text);

  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) throw DataError(dir.string() + ": cannot move checkpoint into place: " + ec.message());
}

template <typename T>
ParameterStore<T> load_checkpoint(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const std::string where = dir.string();
  if (!fs::is_directory(dir)) throw DataError(where + ": checkpoint directory not found");
  KeyValueConfig meta;
  try {
    meta = KeyValueConfig::load(dir / "meta.txt");
  } catch (const ConfigError& e) {
    throw DataError(where + "/meta.txt: " + e.what());
  }

  auto field = [&](auto&& getter) {
    try {
      return getter();
    } catch (const ConfigError& e) {
      throw DataError(where + "/meta.txt: field " + e.what());
    }
  };
  const int version = field([&] { return meta.get_int<int>("format_version"); });
  if (version != kCheckpointFormatVersion) {
    throw DataError(where + "/meta.txt: unsupported format_version " + std::to_string(version));
  }
  const GeneratorSpec spec = field([&] { return spec_from_config(meta); });
  const ModelKind kind = field([&] { return parse_model_kind(meta.require("model.kind"), "model.kind"); });
  const int n_stages = field([&] { return meta.get_int<int>("model.n_stages"); });
  const bool tied = field([&] { return meta.get_bool("model.tied"); });
  const ChainConfig cc = field([&] { return chain_config_for(kind, n_stages); });
  if (cc.tied_parameters != tied && n_stages > 1) {
    throw DataError(where + "/meta.txt: field model.tied inconsistent with model.kind");
  }

  std::vector<std::shared_ptr<GeneratorWeights<T>>> stages;
  const auto stores = cc.tied_parameters ? 1 : n_stages;
  std::vector<std::shared_ptr<GeneratorWeights<T>>> unique;
  for (int k = 0; k < stores; ++k) {
    unique.push_back(std::make_shared<GeneratorWeights<T>>(shaped_generator_weights<T>(spec)));
  }
  for (int n = 0; n < n_stages; ++n) stages.push_back(unique[cc.tied_parameters ? 0 : static_cast<std::size_t>(n)]);

  ParameterStore<T> s{kind, GeneratorChain<T>(cc, spec, std::move(stages)), Discriminator<T>(spec, 0, false), 0, 0, 0};
  s.step = field([&] { return meta.get_int<std::int64_t>("state.step"); });
  s.epoch = field([&] { return meta.get_int<std::int64_t>("state.epoch"); });
  s.seed = field([&] { return meta.get_int<std::uint64_t>("state.seed"); });

  auto params = read_tensors<T>(dir / "params.bin");
  auto assign = [&](const std::string& name, Mat<T>& dst) {
    const auto it = params.find(name);
    if (it == params.end()) throw DataError(where + "/params.bin: missing tensor '" + name + "'");
    if (it->second.rows() != dst.rows() || it->second.cols() != dst.cols()) {
      throw DataError(where + "/params.bin: tensor '" + name + "' has shape " + std::to_string(it->second.rows()) +
                      "x" + std::to_string(it->second.cols()) + ", expected " + std::to_string(dst.rows()) + "x" +
                      std::to_string(dst.cols()));
    }
    dst = std::move(it->second);
    params.erase(it);
  };
  for (std::size_t k = 0; k < unique.size(); ++k) {
    unique[k]->visit([&](const std::string& name, Mat<T>& m) { assign("g" + std::to_string(k) + "/" + name, m); });
  }
  s.discriminator.weights().visit([&](const std::string& name, Mat<T>& m) { assign("d/" + name, m); });
  if (!params.empty()) throw DataError(where + "/params.bin: unexpected tensor '" + params.begin()->first + "'");

  if (fs::exists(dir / "vbn_reference.bin")) {
    auto ref = read_tensors<T>(dir / "vbn_reference.bin");
    std::vector<Mat<T>> batch;
    for (std::size_t b = 0;; ++b) {
      const auto it = ref.find("batch/" + std::to_string(b));
      if (it == ref.end()) break;
      batch.push_back(std::move(it->second));
    }
    std::vector<nn::VbnReference<T>> stats;
    for (int i = 0; i < spec.depth(); ++i) {
      const auto m = ref.find("stats/" + std::to_string(i) + "/mean");
      const auto q = ref.find("stats/" + std::to_string(i) + "/mean_sq");
      if (m == ref.end() || q == ref.end()) {
        throw DataError(where + "/vbn_reference.bin: missing statistics for layer " + std::to_string(i));
      }
      stats.push_back({m->second, q->second, static_cast<std::int64_t>(batch.size())});
    }
    s.discriminator.restore_reference(std::move(batch), std::move(stats));
  }
  return s;
}

}  // namespace segan
