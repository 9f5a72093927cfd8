// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rirflow/agree/agree.hpp"
#include "rirflow/nn/checkpoint.hpp"
#include "rirflow/nn/optim.hpp"
#include "rirflow/vae/train.hpp"

namespace rirflow {

struct AgreePair {
  RirWaveform rir;
  ReflectionMap rmap;
};

inline nlohmann::json agree_config_to_json(const AgreeConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"warmup_steps", c.warmup_steps},
          {"audio_mode", to_string(c.audio_mode)},
          {"log_lambda_init", c.log_lambda_init},
          {"lambda_max", c.lambda_max},
          {"vit_patch", c.geometry.vit_patch},
          {"vit_depth", c.geometry.vit_depth},
          {"vit_width", c.geometry.vit_width},
          {"vit_heads", c.geometry.vit_heads},
          {"room_scale", c.geometry.room_scale},
          {"geo_h", c.geo_h},
          {"geo_w", c.geo_w}};
}

inline AgreeConfig agree_config_from_json(const nlohmann::json& j) {
  AgreeConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.audio_mode = audio_mode_from_string(j.value("audio_mode", to_string(c.audio_mode)));
  c.log_lambda_init = j.value("log_lambda_init", c.log_lambda_init);
  c.lambda_max = j.value("lambda_max", c.lambda_max);
  c.geometry.vit_patch = j.value("vit_patch", c.geometry.vit_patch);
  c.geometry.vit_depth = j.value("vit_depth", c.geometry.vit_depth);
  c.geometry.vit_width = j.value("vit_width", c.geometry.vit_width);
  c.geometry.vit_heads = j.value("vit_heads", c.geometry.vit_heads);
  c.geometry.room_scale = j.value("room_scale", c.geometry.room_scale);
  c.geo_h = j.value("geo_h", c.geo_h);
  c.geo_w = j.value("geo_w", c.geo_w);
  c.validate();
  return c;
}

/// The checkpoint is self-contained: it carries the audio-encoder
/// autoencoder (frozen or finetuned state) under a "vae." prefix.
inline void save_agree_checkpoint(const AgreeModel& model, const VaeModel& vae,
                                  const std::string& path, long step) {
  Checkpoint ck;
  ck.kind = "agree";
  ck.step = step;
  ck.config = {{"agree", agree_config_to_json(model.config())},
               {"vae", vae_config_to_json(vae.config())}};
  store_to_checkpoint(model.params(), ck);
  for (const auto& [name, node] : vae.params().items)
    ck.arrays.emplace_back("vae." + name, node->value);
  save_checkpoint(path, ck);
}

struct LoadedAgreeModel {
  AgreeModel model;
  VaeModel vae;
  long step = 0;
};

inline LoadedAgreeModel load_agree_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "agree") throw std::runtime_error("not an agree checkpoint: " + path);
  const AgreeConfig acfg = agree_config_from_json(ck.config.at("agree"));
  const VaeConfig vcfg = vae_config_from_json(ck.config.at("vae"));
  LoadedAgreeModel out{AgreeModel(acfg, vcfg.latent_channels, 0), VaeModel(vcfg, 0), ck.step};
  load_into_store(ck, out.model.params());
  for (auto& [name, node] : out.vae.params().items) {
    const Tensor& t = ck.find("vae." + name);
    if (!t.same_shape(node->value))
      throw std::runtime_error("checkpoint: shape mismatch for vae." + name);
    node->value = t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct AgreeTrainConfig {
  AgreeConfig agree;
  long steps = 300;
  uint64_t seed = 0;
  long log_every = 10;
  std::string out_dir;
};

struct AgreeLossRow {
  long step = 0;
  double loss = 0.0;
};

struct AgreeTrainResult {
  std::string ckpt_path;
  std::vector<AgreeLossRow> log;
  double loss_first = 0.0;
  double loss_last = 0.0;
  double final_lambda = 0.0;
};

/// Joint contrastive training of the geometry encoder and the projection
/// heads; the autoencoder weights also train in finetune_vae mode.
inline AgreeTrainResult train_agree(const std::vector<AgreePair>& pairs, VaeModel& vae,
                                    const AgreeTrainConfig& tc, AgreeModel* out_model = nullptr) {
  if (pairs.empty()) throw std::invalid_argument("train_agree: no training pairs");
  const AgreeConfig& cfg = tc.agree;
  cfg.validate();
  AgreeModel model(cfg, vae.config().latent_channels, tc.seed);

  const bool finetune = cfg.audio_mode == AudioMode::finetune_vae;
  // The checkpoint stores float32; snapping up front keeps the in-memory
  // autoencoder bit-identical to what a reload would produce.
  vae.params().snap_to_float32();
  AdamWConfig oc;
  oc.lr = cfg.lr;
  AdamW opt(model.params(), oc);
  AdamW opt_vae(vae.params(), oc);
  Rng rng = Rng::substream(tc.seed, "agree-train");

  // Frozen-mode audio features never change; compute them once.
  std::vector<Tensor> frozen_means;
  if (!finetune)
    for (const auto& p : pairs) frozen_means.push_back(vae.encode(p.rir).mean);

  const long B = std::min<long>(cfg.batch_size, static_cast<long>(pairs.size()));
  std::vector<long> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  AgreeTrainResult res;
  std::string csv = "step,loss,lambda\n";

  for (long step = 0; step < tc.steps; ++step) {
    // Distinct in-batch pairs via a partial shuffle.
    for (long i = 0; i < B; ++i)
      std::swap(order[i], order[i + rng.uniform_int(static_cast<long>(order.size()) - i)]);

    model.params().zero_grads();
    if (finetune) vae.params().zero_grads();

    std::vector<NodePtr> g_rows, a_rows;
    for (long i = 0; i < B; ++i) {
      const AgreePair& p = pairs[order[i]];
      g_rows.push_back(model.embed_geometry_node(p.rmap));
      if (finetune)
        a_rows.push_back(model.embed_audio_node(vae, p.rir));
      else
        a_rows.push_back(model.project_audio_features(constant(frozen_means[order[i]])));
    }
    auto loss = agree_contrastive_loss(concat_rows(g_rows), concat_rows(a_rows),
                                       model.lambda_node());
    const double lv = loss->scalar();
    if (!std::isfinite(lv))
      throw std::runtime_error("non-finite contrastive loss at step " + std::to_string(step));
    backward(loss);

    const double lr = cosine_warmup_lr(cfg.lr, step, tc.steps, cfg.warmup_steps);
    opt.step(model.params(), lr);
    if (finetune) opt_vae.step(vae.params(), lr);

    if (step == 0) res.loss_first = lv;
    res.loss_last = lv;
    if (step % tc.log_every == 0 || step == tc.steps - 1) {
      res.log.push_back({step, lv});
      csv += std::to_string(step) + "," + std::to_string(lv) + "," +
             std::to_string(model.lambda_value()) + "\n";
    }
  }

  res.final_lambda = model.lambda_value();
  model.params().snap_to_float32();
  if (finetune) vae.params().snap_to_float32();
  if (!tc.out_dir.empty()) {
    std::filesystem::create_directories(tc.out_dir);
    write_file_text(tc.out_dir + "/agree_loss.csv", csv);
    res.ckpt_path = tc.out_dir + "/agree.ckpt";
    save_agree_checkpoint(model, vae, res.ckpt_path, tc.steps);
  }
  if (out_model) *out_model = std::move(model);
  return res;
}

}  // namespace rirflow
