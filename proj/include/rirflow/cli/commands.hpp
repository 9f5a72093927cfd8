// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the CLI: dataset synthesis, the three
// training stages, generation, evaluation, sweeps, embedding export, and run
// reporting.  Each command works inside a fresh run directory named by the
// config hash and a timestamp, and leaves a config echo plus metadata there.
#pragma once

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/cli/config.hpp"
#include "rirflow/core/checksum.hpp"
#include "rirflow/core/io.hpp"
#include "rirflow/sim/dataset.hpp"

namespace rirflow {

namespace cli {

// ---------------------------------------------------------------------------
// Run-directory plumbing
// ---------------------------------------------------------------------------

inline std::string config_hash(const RunConfig& cfg) {
  const std::string dump = cfg.raw.dump();
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc32(dump.data(), dump.size()));
  return buf;
}

inline std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

/// Creates out_root/<command>-<hash8>-<stamp>[-<n>] and echoes the resolved
/// config into it.  Existing run directories are never reused or modified.
inline std::string make_run_dir(const RunConfig& cfg, const std::string& command) {
  const std::string base =
      cfg.out_root + "/" + command + "-" + config_hash(cfg) + "-" + timestamp_utc();
  std::string path = base;
  for (int n = 2; std::filesystem::exists(path); ++n) path = base + "-" + std::to_string(n);
  std::filesystem::create_directories(path);
  write_file_text(path + "/config.json", cfg.raw.dump(2) + "\n");
  return path;
}

inline uint32_t file_crc(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return crc32(bytes.data(), bytes.size());
}

inline nlohmann::json artifact_ref(const std::string& path) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", file_crc(path));
  return {{"path", path}, {"crc32", buf}};
}

inline void write_meta(const std::string& run_dir, nlohmann::json meta) {
  write_file_text(run_dir + "/meta.json", meta.dump(2) + "\n");
}

inline uint64_t sub_seed(const RunConfig& cfg, const std::string& stream) {
  return Rng::substream(cfg.seed, stream).next_u64();
}

/// Copies a freshly trained checkpoint to its well-known artifact path.
inline void publish_artifact(const std::string& from, const std::string& to) {
  const auto parent = std::filesystem::path(to).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::filesystem::copy_file(from, to, std::filesystem::copy_options::overwrite_existing);
}

// ---------------------------------------------------------------------------
// Artifact requirements (explicit dependency errors)
// ---------------------------------------------------------------------------

inline Dataset require_dataset(const RunConfig& cfg) {
  if (!std::filesystem::exists(cfg.dataset_dir + "/manifest"))
    throw std::runtime_error("missing dataset at " + cfg.dataset_dir + "; run simulate first");
  return load_dataset(cfg.dataset_dir);
}

inline VaeModel require_vae(const RunConfig& cfg) {
  if (!std::filesystem::exists(cfg.vae_ckpt))
    throw std::runtime_error("missing autoencoder checkpoint at " + cfg.vae_ckpt +
                             "; run train-vae first");
  return load_vae_model(cfg.vae_ckpt);
}

inline LoadedFlowModel require_flow(const RunConfig& cfg) {
  if (!std::filesystem::exists(cfg.flow_ckpt))
    throw std::runtime_error("missing flow checkpoint at " + cfg.flow_ckpt +
                             "; run train-flac first");
  return load_flow_model(cfg.flow_ckpt);
}

inline LoadedAgreeModel require_agree(const RunConfig& cfg) {
  if (!std::filesystem::exists(cfg.agree_ckpt))
    throw std::runtime_error("missing embedding checkpoint at " + cfg.agree_ckpt +
                             "; run train-agree first");
  return load_agree_model(cfg.agree_ckpt);
}

inline std::string instance_label(const InstanceRef& ref) {
  return "room" + std::to_string(ref.room) + "_r" + std::to_string(ref.rcv) + "_s" +
         std::to_string(ref.src);
}

}  // namespace cli

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline std::string cmd_simulate(const RunConfig& cfg) {
  if (std::filesystem::exists(cfg.dataset_dir + "/manifest"))
    throw std::runtime_error("dataset already exists at " + cfg.dataset_dir);
  const std::string run = cli::make_run_dir(cfg, "simulate");
  DatasetConfig dc = cfg.dataset;
  dc.out_dir = cfg.dataset_dir;
  dc.seed = cli::sub_seed(cfg, "data");
  const DatasetManifest m = build_dataset(dc);
  cli::write_meta(run, {{"command", "simulate"},
                        {"seed", cfg.seed},
                        {"data_seed", dc.seed},
                        {"rooms", m.room_ids.size()},
                        {"dataset", cli::artifact_ref(cfg.dataset_dir + "/manifest")}});
  return run;
}

// ---------------------------------------------------------------------------
// train-vae
// ---------------------------------------------------------------------------

inline std::string cmd_train_vae(const RunConfig& cfg) {
  const Dataset d = cli::require_dataset(cfg);
  const std::string run = cli::make_run_dir(cfg, "train-vae");

  std::vector<RirWaveform> data;
  for (const auto& ref : list_instances(d, /*unseen=*/false))
    data.push_back(load_rir_wav(rir_path(d.dir, d.manifest.room_ids[ref.room], ref.src, ref.rcv)));

  VaeTrainConfig tc;
  tc.vae = cfg.vae;
  tc.steps = cfg.vae_steps;
  tc.batch_size = cfg.vae_batch;
  tc.log_every = cfg.vae_log_every;
  tc.seed = cli::sub_seed(cfg, "vae-train");
  tc.out_dir = run;
  const VaeTrainResult res = train_vae(data, tc);
  cli::publish_artifact(res.ckpt_path, cfg.vae_ckpt);

  cli::write_meta(run, {{"command", "train-vae"},
                        {"seed", cfg.seed},
                        {"train_seed", tc.seed},
                        {"waveforms", data.size()},
                        {"mr_first", res.mr_first},
                        {"mr_last", res.mr_last},
                        {"dataset", cli::artifact_ref(cfg.dataset_dir + "/manifest")},
                        {"vae_ckpt", cli::artifact_ref(cfg.vae_ckpt)}});
  return run;
}

// ---------------------------------------------------------------------------
// train-flac
// ---------------------------------------------------------------------------

inline std::string cmd_train_flac(const RunConfig& cfg) {
  const Dataset d = cli::require_dataset(cfg);
  const VaeModel vae = cli::require_vae(cfg);
  if (cfg.flow.geo_h != d.manifest.pano_h || cfg.flow.geo_w != d.manifest.pano_w)
    throw std::runtime_error("flow geo_h/geo_w must match the dataset panorama size");
  const std::string run = cli::make_run_dir(cfg, "train-flac");

  std::vector<FewShotBundle> bundles;
  for (const auto& ref : list_instances(d, /*unseen=*/false))
    bundles.push_back(load_bundle(d, ref, d.manifest.k));

  FlowTrainConfig tc = cfg.flow_train;
  tc.flow = cfg.flow;
  tc.seed = cli::sub_seed(cfg, "flow-train");
  tc.out_dir = run;
  const FlowTrainResult res = train_flac(bundles, vae, tc);
  cli::publish_artifact(res.ckpt_path, cfg.flow_ckpt);

  cli::write_meta(run, {{"command", "train-flac"},
                        {"seed", cfg.seed},
                        {"train_seed", tc.seed},
                        {"bundles", bundles.size()},
                        {"loss_first", res.loss_first},
                        {"loss_last", res.loss_last},
                        {"latent_scale", res.latent_scale},
                        {"dataset", cli::artifact_ref(cfg.dataset_dir + "/manifest")},
                        {"vae_ckpt", cli::artifact_ref(cfg.vae_ckpt)},
                        {"flow_ckpt", cli::artifact_ref(cfg.flow_ckpt)}});
  return run;
}

// ---------------------------------------------------------------------------
// train-agree
// ---------------------------------------------------------------------------

inline std::string cmd_train_agree(const RunConfig& cfg) {
  const Dataset d = cli::require_dataset(cfg);
  VaeModel vae = cli::require_vae(cfg);
  if (cfg.agree.geo_h != d.manifest.pano_h || cfg.agree.geo_w != d.manifest.pano_w)
    throw std::runtime_error("agree geo_h/geo_w must match the dataset panorama size");
  const std::string run = cli::make_run_dir(cfg, "train-agree");

  std::vector<AgreePair> pairs;
  for (const auto& ref : list_instances(d, /*unseen=*/false)) {
    const RoomRecord& room = d.rooms[ref.room];
    AgreePair p;
    p.rir = load_rir_wav(rir_path(d.dir, d.manifest.room_ids[ref.room], ref.src, ref.rcv));
    const PointMap pm = unproject_equirect(load_depth(d, ref.room, ref.rcv));
    p.rmap = reflection_map(
        pm, to_receiver_frame(room.sources[ref.src], room.receivers[ref.rcv]));
    pairs.push_back(std::move(p));
  }

  AgreeTrainConfig tc;
  tc.agree = cfg.agree;
  tc.steps = cfg.agree_steps;
  tc.log_every = cfg.agree_log_every;
  tc.seed = cli::sub_seed(cfg, "agree-train");
  tc.out_dir = run;
  const AgreeTrainResult res = train_agree(pairs, vae, tc);
  cli::publish_artifact(res.ckpt_path, cfg.agree_ckpt);

  cli::write_meta(run, {{"command", "train-agree"},
                        {"seed", cfg.seed},
                        {"train_seed", tc.seed},
                        {"pairs", pairs.size()},
                        {"loss_first", res.loss_first},
                        {"loss_last", res.loss_last},
                        {"final_lambda", res.final_lambda},
                        {"dataset", cli::artifact_ref(cfg.dataset_dir + "/manifest")},
                        {"vae_ckpt", cli::artifact_ref(cfg.vae_ckpt)},
                        {"agree_ckpt", cli::artifact_ref(cfg.agree_ckpt)}});
  return run;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

inline std::string cmd_generate(const RunConfig& cfg) {
  const Dataset d = cli::require_dataset(cfg);
  const LoadedFlowModel flow = cli::require_flow(cfg);
  const VaeModel vae = cli::require_vae(cfg);

  long room = cfg.gen_room;
  if (room < 0) {
    for (size_t i = 0; i < d.rooms.size(); ++i)
      if (d.rooms[i].unseen) {
        room = static_cast<long>(i);
        break;
      }
    if (room < 0) throw std::runtime_error("no unseen rooms; set generate.room explicitly");
  }
  if (room >= static_cast<long>(d.rooms.size()))
    throw std::runtime_error("generate.room out of range");
  if (cfg.gen_rcv < 0 || cfg.gen_rcv >= d.manifest.receivers_per_room)
    throw std::runtime_error("generate.rcv out of range");
  if (cfg.gen_src < 0 || cfg.gen_src >= d.manifest.sources_per_room)
    throw std::runtime_error("generate.src out of range");

  const InstanceRef ref{room, cfg.gen_rcv, cfg.gen_src};
  const FewShotBundle bundle = load_bundle(d, ref, cfg.gen_k);
  const FlowInputs in = flow.model.make_inputs(bundle);
  const std::string label = cli::instance_label(ref);
  const std::string run = cli::make_run_dir(cfg, "generate");

  nlohmann::json outputs = nlohmann::json::array();
  for (int i = 0; i < cfg.gen_count; ++i) {
    GenerateConfig gc = cfg.generate;
    gc.seed = cli::sub_seed(cfg, "sampling:" + label + "#" + std::to_string(i));
    const RirWaveform rir =
        generate_rir(flow.model, vae, flow.latent_scale, in, gc, d.manifest.sample_rate);
    const std::string stem = run + "/gen_" + label + "_" + std::to_string(i);
    save_rir_wav(stem + ".wav", rir);
    const nlohmann::json sidecar = {{"instance", label},
                                    {"steps", gc.steps},
                                    {"guidance", gc.guidance},
                                    {"seed", gc.seed},
                                    {"sample_rate", rir.sample_rate},
                                    {"length", rir.samples.size()},
                                    {"flow_ckpt", cli::artifact_ref(cfg.flow_ckpt)},
                                    {"vae_ckpt", cli::artifact_ref(cfg.vae_ckpt)}};
    write_file_text(stem + ".json", sidecar.dump(2) + "\n");
    outputs.push_back(cli::artifact_ref(stem + ".wav"));
  }

  cli::write_meta(run, {{"command", "generate"},
                        {"seed", cfg.seed},
                        {"instance", label},
                        {"outputs", outputs}});
  return run;
}

// ---------------------------------------------------------------------------
// evaluate / sweep
// ---------------------------------------------------------------------------

namespace cli {

/// Assembles the evaluation context a method needs; optional artifacts load
/// only when present (knn and friends run without any checkpoints).
struct EvalArtifacts {
  Dataset dataset;
  std::optional<LoadedFlowModel> flow;
  std::optional<VaeModel> vae;
  std::optional<LoadedAgreeModel> agree;
};

inline EvalArtifacts load_eval_artifacts(const RunConfig& cfg, EvalMethod method) {
  EvalArtifacts a;
  a.dataset = require_dataset(cfg);
  if (method == EvalMethod::flac) {
    a.flow = require_flow(cfg);
    a.vae = require_vae(cfg);
  }
  if (std::filesystem::exists(cfg.agree_ckpt)) a.agree = load_agree_model(cfg.agree_ckpt);
  return a;
}

inline EvalContext make_eval_context(const RunConfig& cfg, const EvalArtifacts& a) {
  EvalContext ctx;
  ctx.dataset = &a.dataset;
  if (a.flow) ctx.flow = &*a.flow;
  if (a.vae) ctx.vae = &*a.vae;
  if (a.agree) ctx.agree = &*a.agree;
  ctx.gen = cfg.generate;
  ctx.gen.seed = sub_seed(cfg, "sampling");
  ctx.n_generations = cfg.n_generations;
  ctx.per_room_average = cfg.per_room_average;
  return ctx;
}

inline nlohmann::json eval_inputs_meta(const RunConfig& cfg, const EvalArtifacts& a) {
  nlohmann::json j = {{"dataset", artifact_ref(cfg.dataset_dir + "/manifest")}};
  if (a.flow) {
    j["flow_ckpt"] = artifact_ref(cfg.flow_ckpt);
    j["vae_ckpt"] = artifact_ref(cfg.vae_ckpt);
  }
  if (a.agree) j["agree_ckpt"] = artifact_ref(cfg.agree_ckpt);
  return j;
}

}  // namespace cli

inline std::string cmd_evaluate(const RunConfig& cfg) {
  const EvalMethod method = eval_method_from_string(cfg.eval_method);
  const cli::EvalArtifacts arts = cli::load_eval_artifacts(cfg, method);
  const EvalContext ctx = cli::make_eval_context(cfg, arts);
  const auto eval_set = make_eval_set(arts.dataset, cfg.eval_unseen, cfg.eval_k);
  const std::string run = cli::make_run_dir(cfg, "evaluate");

  const MetricsReport rep = evaluate_method(method, eval_set, ctx);
  write_file_text(run + "/metrics.csv", metrics_csv(rep));
  write_file_text(run + "/summary.txt", metrics_summary(rep));

  nlohmann::json meta = {{"command", "evaluate"},
                         {"seed", cfg.seed},
                         {"method", cfg.eval_method},
                         {"instances", eval_set.size()},
                         {"inputs", cli::eval_inputs_meta(cfg, arts)}};
  cli::write_meta(run, meta);
  return run;
}

inline std::string cmd_sweep(const RunConfig& cfg) {
  const EvalMethod method = eval_method_from_string(cfg.eval_method);
  const cli::EvalArtifacts arts = cli::load_eval_artifacts(cfg, method);
  EvalContext ctx = cli::make_eval_context(cfg, arts);
  const auto eval_set = make_eval_set(arts.dataset, cfg.eval_unseen, cfg.eval_k);
  const std::string run = cli::make_run_dir(cfg, "sweep");

  std::string csv;
  if (cfg.sweep_kind == "context") {
    csv = sweep_csv(robustness_sweep(method, eval_set, cfg.sweep_k, ctx));
  } else {
    // Integration-step sweep: same harness per step count, steps in column 1.
    std::vector<std::pair<long, MetricsReport>> rows;
    for (long s : cfg.sweep_steps) {
      ctx.gen.steps = s;
      rows.emplace_back(s, evaluate_method(method, eval_set, ctx));
    }
    csv = "steps" + sweep_csv(rows).substr(1);  // header starts "k,"
  }
  write_file_text(run + "/sweep.csv", csv);

  cli::write_meta(run, {{"command", "sweep"},
                        {"seed", cfg.seed},
                        {"method", cfg.eval_method},
                        {"kind", cfg.sweep_kind},
                        {"instances", eval_set.size()},
                        {"inputs", cli::eval_inputs_meta(cfg, arts)}});
  return run;
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

/// Exports ground-truth audio and geometry embeddings for a split as float32
/// rows plus an id-per-line index sidecar, ready for gallery building.
inline std::string cmd_embed(const RunConfig& cfg) {
  const Dataset d = cli::require_dataset(cfg);
  const LoadedAgreeModel agree = cli::require_agree(cfg);
  const std::string run = cli::make_run_dir(cfg, "embed");

  const long dim = agree.model.config().embed_dim;
  std::vector<double> audio_rows, geo_rows;
  std::string index;
  long count = 0;
  for (const auto& ref : list_instances(d, cfg.eval_unseen)) {
    const RoomRecord& room = d.rooms[ref.room];
    const RirWaveform rir =
        load_rir_wav(rir_path(d.dir, d.manifest.room_ids[ref.room], ref.src, ref.rcv));
    const PointMap pm = unproject_equirect(load_depth(d, ref.room, ref.rcv));
    const ReflectionMap rm = reflection_map(
        pm, to_receiver_frame(room.sources[ref.src], room.receivers[ref.rcv]));
    const Tensor a = agree.model.embed_audio(agree.vae, rir);
    const Tensor g = agree.model.embed_geometry(rm);
    audio_rows.insert(audio_rows.end(), a.data.begin(), a.data.end());
    geo_rows.insert(geo_rows.end(), g.data.begin(), g.data.end());
    index += cli::instance_label(ref) + "\n";
    ++count;
  }
  if (count == 0) throw std::runtime_error("embed: empty split");

  write_f32_raw(run + "/audio_embeddings.f32", audio_rows);
  write_f32_raw(run + "/geometry_embeddings.f32", geo_rows);
  write_file_text(run + "/index.txt", index);
  cli::write_meta(run, {{"command", "embed"},
                        {"seed", cfg.seed},
                        {"rows", count},
                        {"dim", dim},
                        {"unseen", cfg.eval_unseen},
                        {"agree_ckpt", cli::artifact_ref(cfg.agree_ckpt)}});
  return run;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Renders a previous evaluate/sweep run as text: the stored summary plus
/// record counts from the metrics CSV.
inline std::string report_text(const RunConfig& cfg) {
  if (cfg.report_run.empty())
    throw ConfigError("config: report.run must name a run directory");
  const std::string dir = cfg.report_run;
  if (!std::filesystem::exists(dir))
    throw std::runtime_error("missing run directory " + dir);

  std::string out = "run " + dir + "\n";
  if (std::filesystem::exists(dir + "/summary.txt")) {
    out += read_file_text(dir + "/summary.txt");
  } else if (std::filesystem::exists(dir + "/sweep.csv")) {
    out += read_file_text(dir + "/sweep.csv");
  } else {
    throw std::runtime_error("no summary.txt or sweep.csv in " + dir);
  }
  if (std::filesystem::exists(dir + "/metrics.csv")) {
    const std::string csv = read_file_text(dir + "/metrics.csv");
    long rows = 0;
    for (char ch : csv) rows += ch == '\n';
    out += "csv_rows " + std::to_string(rows > 0 ? rows - 1 : 0) + "\n";
  }
  return out;
}

}  // namespace rirflow
