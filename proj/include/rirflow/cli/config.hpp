// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Declarative run configuration: a JSON document holding every knob of the
// pipeline, validated against the builtin schema (unknown keys rejected) and
// adjustable through dotted key=value overrides.
#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rirflow/agree/train.hpp"
#include "rirflow/eval/evaluate.hpp"
#include "rirflow/flow/train.hpp"
#include "rirflow/vae/train.hpp"

namespace rirflow {

/// Configuration/usage problems; the CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fully resolved settings for one CLI invocation.
struct RunConfig {
  nlohmann::json raw;  // resolved document, echoed into run directories

  uint64_t seed = 0;
  long workers = 1;
  std::string out_root = "runs";

  std::string dataset_dir = "data";
  std::string vae_ckpt = "artifacts/vae.ckpt";
  std::string flow_ckpt = "artifacts/flow.ckpt";
  std::string agree_ckpt = "artifacts/agree.ckpt";

  DatasetConfig dataset;

  VaeConfig vae;
  long vae_steps = 800;
  long vae_batch = 4;
  long vae_log_every = 10;

  FlowConfig flow;
  FlowTrainConfig flow_train;  // .flow mirrors `flow`, .seed derives from root

  AgreeConfig agree;
  long agree_steps = 300;
  long agree_log_every = 10;

  GenerateConfig generate;  // steps + guidance; seeds derive from root
  long gen_room = -1;       // -1: first unseen room
  int gen_rcv = 0;
  int gen_src = 0;
  int gen_k = 4;
  int gen_count = 1;

  std::string eval_method = "flac";
  bool eval_unseen = true;
  int eval_k = 4;
  long n_generations = 5;
  bool per_room_average = false;

  std::string sweep_kind = "context";  // or "steps"
  std::vector<long> sweep_k = {1, 2, 4};
  std::vector<long> sweep_steps = {1, 2, 5, 10, 20};

  std::string report_run;  // run directory summarized by `report`
};

namespace detail {

inline nlohmann::json vec3_json(const Vec3& v) { return {v.x, v.y, v.z}; }

inline Vec3 vec3_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError("config key " + key + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

/// The full schema with builtin defaults; every legal key appears here.
inline nlohmann::json default_run_config_json() {
  const RunConfig d;
  return {
      {"seed", d.seed},
      {"workers", d.workers},
      {"out_root", d.out_root},
      {"paths",
       {{"dataset", d.dataset_dir},
        {"vae_ckpt", d.vae_ckpt},
        {"flow_ckpt", d.flow_ckpt},
        {"agree_ckpt", d.agree_ckpt}}},
      {"dataset",
       {{"rooms", d.dataset.rooms},
        {"unseen_frac", d.dataset.unseen_frac},
        {"sources_per_room", d.dataset.sources_per_room},
        {"receivers_per_room", d.dataset.receivers_per_room},
        {"k", d.dataset.k},
        {"sample_rate", d.dataset.sample_rate},
        {"rir_length", d.dataset.rir_length},
        {"max_order", d.dataset.max_order},
        {"pano_h", d.dataset.pano_h},
        {"pano_w", d.dataset.pano_w},
        {"amplitude_scale", d.dataset.amplitude_scale},
        {"clearance", d.dataset.clearance},
        {"min_pair_distance", d.dataset.min_pair_distance},
        {"dims_lo", detail::vec3_json(d.dataset.dims_lo)},
        {"dims_hi", detail::vec3_json(d.dataset.dims_hi)},
        {"absorption_lo", d.dataset.absorption_lo},
        {"absorption_hi", d.dataset.absorption_hi}}},
      {"vae", vae_config_to_json(d.vae)},
      {"vae_train",
       {{"steps", d.vae_steps}, {"batch_size", d.vae_batch}, {"log_every", d.vae_log_every}}},
      {"flow", flow_config_to_json(d.flow)},
      {"flow_train",
       {{"steps", d.flow_train.steps},
        {"batch_size", d.flow_train.batch_size},
        {"lr", d.flow_train.lr},
        {"warmup_steps", d.flow_train.warmup_steps},
        {"cosine_decay", d.flow_train.cosine_decay},
        {"ema_decay", d.flow_train.ema_decay},
        {"cfg_dropout", d.flow_train.cfg_dropout},
        {"timestep_kind", to_string(d.flow_train.timesteps.kind)},
        {"logsnr_mu", d.flow_train.timesteps.logsnr_mu},
        {"logsnr_sigma", d.flow_train.timesteps.logsnr_sigma},
        {"log_every", d.flow_train.log_every}}},
      {"agree", agree_config_to_json(d.agree)},
      {"agree_train", {{"steps", d.agree_steps}, {"log_every", d.agree_log_every}}},
      {"generate",
       {{"steps", d.generate.steps},
        {"guidance", d.generate.guidance},
        {"room", d.gen_room},
        {"rcv", d.gen_rcv},
        {"src", d.gen_src},
        {"k", d.gen_k},
        {"count", d.gen_count}}},
      {"evaluate",
       {{"method", d.eval_method},
        {"unseen", d.eval_unseen},
        {"k", d.eval_k},
        {"n_generations", d.n_generations},
        {"per_room_average", d.per_room_average}}},
      {"sweep",
       {{"kind", d.sweep_kind}, {"k_values", d.sweep_k}, {"steps_values", d.sweep_steps}}},
      {"report", {{"run", d.report_run}}},
  };
}

namespace detail {

/// Rejects keys absent from the schema and object/value kind mismatches.
inline void check_config_keys(const nlohmann::json& user, const nlohmann::json& schema,
                              const std::string& prefix) {
  if (!user.is_object()) {
    if (schema.is_object())
      throw ConfigError("config key " + (prefix.empty() ? "<root>" : prefix) +
                        ": expected an object");
    return;
  }
  if (!schema.is_object())
    throw ConfigError("config key " + prefix + ": did not expect an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key: " + path);
    if (schema.at(key).is_object() || value.is_object())
      check_config_keys(value, schema.at(key), path);
  }
}

/// Recursive overlay, user values winning; arrays replace wholesale.
inline void merge_config(nlohmann::json& base, const nlohmann::json& user) {
  for (const auto& [key, value] : user.items()) {
    if (value.is_object() && base[key].is_object())
      merge_config(base[key], value);
    else
      base[key] = value;
  }
}

/// Applies one dotted `key=value` override; the key must exist in the schema.
inline void apply_override(nlohmann::json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key=value: " + spec);
  const std::string dotted = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    parts.push_back(dotted.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  nlohmann::json* node = &doc;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object())
      throw ConfigError("unknown config key: " + dotted);
    node = &(*node)[parts[i]];
  }
  if (!node->contains(parts.back())) throw ConfigError("unknown config key: " + dotted);

  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, /*allow_exceptions=*/false);
  (*node)[parts.back()] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
}

}  // namespace detail

/// Typed view over a resolved document.  Section validators run here so every
/// command starts from a checked configuration.
inline RunConfig run_config_from_json(nlohmann::json doc) {
  RunConfig c;
  try {
    c.seed = doc.at("seed").get<uint64_t>();
    c.workers = doc.at("workers").get<long>();
    c.out_root = doc.at("out_root").get<std::string>();

    const auto& paths = doc.at("paths");
    c.dataset_dir = paths.at("dataset").get<std::string>();
    c.vae_ckpt = paths.at("vae_ckpt").get<std::string>();
    c.flow_ckpt = paths.at("flow_ckpt").get<std::string>();
    c.agree_ckpt = paths.at("agree_ckpt").get<std::string>();

    const auto& ds = doc.at("dataset");
    c.dataset.out_dir = c.dataset_dir;
    c.dataset.rooms = ds.at("rooms").get<int>();
    c.dataset.unseen_frac = ds.at("unseen_frac").get<double>();
    c.dataset.sources_per_room = ds.at("sources_per_room").get<int>();
    c.dataset.receivers_per_room = ds.at("receivers_per_room").get<int>();
    c.dataset.k = ds.at("k").get<int>();
    c.dataset.sample_rate = ds.at("sample_rate").get<int>();
    c.dataset.rir_length = ds.at("rir_length").get<long>();
    c.dataset.max_order = ds.at("max_order").get<int>();
    c.dataset.pano_h = ds.at("pano_h").get<long>();
    c.dataset.pano_w = ds.at("pano_w").get<long>();
    c.dataset.amplitude_scale = ds.at("amplitude_scale").get<double>();
    c.dataset.clearance = ds.at("clearance").get<double>();
    c.dataset.min_pair_distance = ds.at("min_pair_distance").get<double>();
    c.dataset.dims_lo = detail::vec3_from_json(ds.at("dims_lo"), "dataset.dims_lo");
    c.dataset.dims_hi = detail::vec3_from_json(ds.at("dims_hi"), "dataset.dims_hi");
    c.dataset.absorption_lo = ds.at("absorption_lo").get<double>();
    c.dataset.absorption_hi = ds.at("absorption_hi").get<double>();

    c.vae = vae_config_from_json(doc.at("vae"));
    const auto& vt = doc.at("vae_train");
    c.vae_steps = vt.at("steps").get<long>();
    c.vae_batch = vt.at("batch_size").get<long>();
    c.vae_log_every = vt.at("log_every").get<long>();

    c.flow = flow_config_from_json(doc.at("flow"));
    const auto& ft = doc.at("flow_train");
    c.flow_train.flow = c.flow;
    c.flow_train.steps = ft.at("steps").get<long>();
    c.flow_train.batch_size = ft.at("batch_size").get<long>();
    c.flow_train.lr = ft.at("lr").get<double>();
    c.flow_train.warmup_steps = ft.at("warmup_steps").get<long>();
    c.flow_train.cosine_decay = ft.at("cosine_decay").get<bool>();
    c.flow_train.ema_decay = ft.at("ema_decay").get<double>();
    c.flow_train.cfg_dropout = ft.at("cfg_dropout").get<double>();
    c.flow_train.timesteps.kind = timestep_kind_from_string(ft.at("timestep_kind"));
    c.flow_train.timesteps.logsnr_mu = ft.at("logsnr_mu").get<double>();
    c.flow_train.timesteps.logsnr_sigma = ft.at("logsnr_sigma").get<double>();
    c.flow_train.log_every = ft.at("log_every").get<long>();

    c.agree = agree_config_from_json(doc.at("agree"));
    const auto& at = doc.at("agree_train");
    c.agree_steps = at.at("steps").get<long>();
    c.agree_log_every = at.at("log_every").get<long>();

    const auto& gen = doc.at("generate");
    c.generate.steps = gen.at("steps").get<long>();
    c.generate.guidance = gen.at("guidance").get<double>();
    c.gen_room = gen.at("room").get<long>();
    c.gen_rcv = gen.at("rcv").get<int>();
    c.gen_src = gen.at("src").get<int>();
    c.gen_k = gen.at("k").get<int>();
    c.gen_count = gen.at("count").get<int>();

    const auto& ev = doc.at("evaluate");
    c.eval_method = ev.at("method").get<std::string>();
    c.eval_unseen = ev.at("unseen").get<bool>();
    c.eval_k = ev.at("k").get<int>();
    c.n_generations = ev.at("n_generations").get<long>();
    c.per_room_average = ev.at("per_room_average").get<bool>();

    const auto& sw = doc.at("sweep");
    c.sweep_kind = sw.at("kind").get<std::string>();
    c.sweep_k = sw.at("k_values").get<std::vector<long>>();
    c.sweep_steps = sw.at("steps_values").get<std::vector<long>>();

    c.report_run = doc.at("report").at("run").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  try {
    c.dataset.validate();
    c.flow.dit.validate();
    c.agree.validate();
    eval_method_from_string(c.eval_method);  // rejects unknown method names
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (c.generate.steps < 1) throw ConfigError("config: generate.steps must be >= 1");
  if (c.generate.guidance < 0.0) throw ConfigError("config: generate.guidance must be >= 0");
  if (c.n_generations < 1) throw ConfigError("config: evaluate.n_generations must be >= 1");
  if (c.gen_count < 1) throw ConfigError("config: generate.count must be >= 1");
  if (c.sweep_kind != "context" && c.sweep_kind != "steps")
    throw ConfigError("config: sweep.kind must be \"context\" or \"steps\"");

  c.raw = std::move(doc);
  return c;
}

/// Loads the config file (optional), applies overrides, validates everything.
/// With no file, the builtin defaults apply.  RIRFLOW_OUT_ROOT supplies the
/// output root when neither the file nor an override names one.
inline RunConfig load_run_config(const std::string& config_path,
                                 const std::vector<std::string>& overrides) {
  nlohmann::json doc = default_run_config_json();
  if (const char* env = std::getenv("RIRFLOW_OUT_ROOT")) doc["out_root"] = env;

  if (!config_path.empty()) {
    nlohmann::json user;
    try {
      user = nlohmann::json::parse(read_file_text(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(config_path + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(std::string(e.what()));
    }
    detail::check_config_keys(user, default_run_config_json(), "");
    detail::merge_config(doc, user);
  }
  for (const auto& ov : overrides) detail::apply_override(doc, ov);
  return run_config_from_json(std::move(doc));
}

}  // namespace rirflow
