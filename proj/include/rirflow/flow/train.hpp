// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rirflow/flow/model.hpp"
#include "rirflow/flow/schedule.hpp"
#include "rirflow/nn/checkpoint.hpp"
#include "rirflow/nn/optim.hpp"
#include "rirflow/vae/train.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Config serialization
// ---------------------------------------------------------------------------

inline nlohmann::json flow_config_to_json(const FlowConfig& c) {
  return {{"latent_channels", c.dit.latent_channels},
          {"width", c.dit.width},
          {"depth", c.dit.depth},
          {"heads", c.dit.heads},
          {"variant", to_string(c.dit.variant)},
          {"acoustic_embed", c.cond.acoustic_embed},
          {"acoustic_channels", c.cond.acoustic_channels},
          {"stft_fft", c.cond.stft_fft},
          {"stft_win", c.cond.stft_win},
          {"stft_hop", c.cond.stft_hop},
          {"n_freq", c.cond.n_freq},
          {"time_dim", c.cond.time_dim},
          {"vit_patch", c.cond.vit_patch},
          {"vit_depth", c.cond.vit_depth},
          {"vit_width", c.cond.vit_width},
          {"vit_heads", c.cond.vit_heads},
          {"room_scale", c.cond.room_scale},
          {"geo_h", c.geo_h},
          {"geo_w", c.geo_w},
          {"rir_length", c.rir_length},
          {"geometry_all_maps", c.geometry_all_maps}};
}

inline FlowConfig flow_config_from_json(const nlohmann::json& j) {
  FlowConfig c;
  c.dit.latent_channels = j.value("latent_channels", c.dit.latent_channels);
  c.dit.width = j.value("width", c.dit.width);
  c.dit.depth = j.value("depth", c.dit.depth);
  c.dit.heads = j.value("heads", c.dit.heads);
  c.dit.variant = dit_variant_from_string(j.value("variant", to_string(c.dit.variant)));
  c.cond.acoustic_embed = j.value("acoustic_embed", c.cond.acoustic_embed);
  c.cond.acoustic_channels = j.value("acoustic_channels", c.cond.acoustic_channels);
  c.cond.stft_fft = j.value("stft_fft", c.cond.stft_fft);
  c.cond.stft_win = j.value("stft_win", c.cond.stft_win);
  c.cond.stft_hop = j.value("stft_hop", c.cond.stft_hop);
  c.cond.n_freq = j.value("n_freq", c.cond.n_freq);
  c.cond.time_dim = j.value("time_dim", c.cond.time_dim);
  c.cond.vit_patch = j.value("vit_patch", c.cond.vit_patch);
  c.cond.vit_depth = j.value("vit_depth", c.cond.vit_depth);
  c.cond.vit_width = j.value("vit_width", c.cond.vit_width);
  c.cond.vit_heads = j.value("vit_heads", c.cond.vit_heads);
  c.cond.room_scale = j.value("room_scale", c.cond.room_scale);
  c.geo_h = j.value("geo_h", c.geo_h);
  c.geo_w = j.value("geo_w", c.geo_w);
  c.rir_length = j.value("rir_length", c.rir_length);
  c.geometry_all_maps = j.value("geometry_all_maps", c.geometry_all_maps);
  c.validate();
  return c;
}

inline void save_flow_checkpoint(const FlowModel& model, double latent_scale,
                                 const std::string& path, long step) {
  Checkpoint ck;
  ck.kind = "flow";
  ck.step = step;
  ck.config = {{"flow", flow_config_to_json(model.config())}, {"latent_scale", latent_scale}};
  store_to_checkpoint(model.params(), ck);
  save_checkpoint(path, ck);
}

struct LoadedFlowModel {
  FlowModel model;
  double latent_scale = 1.0;
  long step = 0;
};

inline LoadedFlowModel load_flow_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "flow") throw std::runtime_error("not a flow checkpoint: " + path);
  const FlowConfig cfg = flow_config_from_json(ck.config.at("flow"));
  LoadedFlowModel out{FlowModel(cfg, 0), ck.config.at("latent_scale").get<double>(), ck.step};
  load_into_store(ck, out.model.params());
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Mean squared error against the rectified-flow target eps - z0.
inline double flow_matching_loss(const Tensor& pred, const Tensor& z0, const Tensor& eps) {
  const Tensor v = target_velocity(z0, eps);
  if (!pred.same_shape(v)) throw std::invalid_argument("flow_matching_loss: shape mismatch");
  double acc = 0.0;
  for (long i = 0; i < pred.count(); ++i) {
    const double d = pred.data[i] - v.data[i];
    acc += d * d;
  }
  return acc / double(pred.count());
}

struct FlowTrainConfig {
  FlowConfig flow;
  long steps = 2000;
  long batch_size = 8;
  double lr = 5e-5;
  long warmup_steps = 0;
  bool cosine_decay = false;  // default: constant rate after warmup
  double ema_decay = 0.999;
  double cfg_dropout = 0.1;
  TimestepSampler timesteps;
  uint64_t seed = 0;
  long log_every = 10;
  std::string out_dir;
};

struct FlowLossRow {
  long step = 0;
  double loss = 0.0;
};

struct FlowTrainResult {
  std::string ckpt_path;
  double latent_scale = 1.0;
  std::vector<FlowLossRow> log;
  double loss_first = 0.0;
  double loss_last = 0.0;
};

/// Trains the conditional velocity model against latents of a frozen
/// autoencoder.  Latents are the posterior means divided by their dataset-wide
/// RMS; the published weights are the EMA shadow.
inline FlowTrainResult train_flac(const std::vector<FewShotBundle>& bundles,
                                  const VaeModel& vae, const FlowTrainConfig& tc,
                                  FlowModel* out_model = nullptr) {
  if (bundles.empty()) throw std::invalid_argument("train_flac: no training bundles");
  if (tc.flow.dit.latent_channels != vae.config().latent_channels)
    throw std::invalid_argument("train_flac: latent channel mismatch with autoencoder");
  if (tc.steps < 1 || tc.batch_size < 1)
    throw std::invalid_argument("train_flac: steps and batch_size must be >= 1");

  FlowModel model(tc.flow, tc.seed);

  // Frozen-autoencoder latents and cached conditioning.
  struct Example {
    FlowInputs inputs;
    Tensor z0;
  };
  std::vector<Example> examples;
  double sq_sum = 0.0;
  long n_vals = 0;
  for (const auto& b : bundles) {
    if (static_cast<long>(b.target_rir.samples.size()) != tc.flow.rir_length)
      throw std::invalid_argument("train_flac: target length does not match rir_length");
    Example ex;
    ex.inputs = model.make_inputs(b);
    ex.z0 = vae.encode(b.target_rir).mean;
    for (double v : ex.z0.data) sq_sum += v * v;
    n_vals += ex.z0.count();
    examples.push_back(std::move(ex));
  }
  const double latent_scale = std::max(std::sqrt(sq_sum / double(n_vals)), 1e-12);
  for (auto& ex : examples)
    for (auto& v : ex.z0.data) v /= latent_scale;

  ParamStore& ps = model.params();
  AdamWConfig oc;
  oc.lr = tc.lr;
  AdamW opt(ps, oc);
  Ema ema(ps, tc.ema_decay);
  Rng rng = Rng::substream(tc.seed, "flow-train");

  FlowTrainResult res;
  res.latent_scale = latent_scale;
  std::string csv = "step,loss\n";

  for (long step = 0; step < tc.steps; ++step) {
    ps.zero_grads();
    double batch_loss = 0.0;
    for (long bidx = 0; bidx < tc.batch_size; ++bidx) {
      const Example& ex = examples[rng.uniform_int(static_cast<long>(examples.size()))];
      const double t = sample_timestep(tc.timesteps, rng);
      Tensor eps = Tensor::zeros(ex.z0.shape);
      for (auto& v : eps.data) v = rng.normal();
      const Tensor zt = interpolate_latent(ex.z0, eps, t);
      const bool drop = rng.uniform() < tc.cfg_dropout;
      auto pred = model.velocity_node(constant(zt), t, ex.inputs, drop);
      auto loss = mse(pred, constant(target_velocity(ex.z0, eps)));
      backward(scale(loss, 1.0 / double(tc.batch_size)));
      batch_loss += loss->scalar() / double(tc.batch_size);
    }
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("non-finite flow loss at step " + std::to_string(step));
    double lr = tc.lr;
    if (tc.cosine_decay)
      lr = cosine_warmup_lr(tc.lr, step, tc.steps, tc.warmup_steps);
    else if (tc.warmup_steps > 0 && step < tc.warmup_steps)
      lr = tc.lr * double(step + 1) / double(tc.warmup_steps);
    opt.step(ps, lr);
    ema.update(ps);

    if (step == 0) res.loss_first = batch_loss;
    res.loss_last = batch_loss;
    if (step % tc.log_every == 0 || step == tc.steps - 1) {
      res.log.push_back({step, batch_loss});
      csv += std::to_string(step) + "," + std::to_string(batch_loss) + "\n";
    }
  }

  ema.apply_to(ps);
  ps.snap_to_float32();
  if (!tc.out_dir.empty()) {
    std::filesystem::create_directories(tc.out_dir);
    write_file_text(tc.out_dir + "/flow_loss.csv", csv);
    res.ckpt_path = tc.out_dir + "/flow.ckpt";
    save_flow_checkpoint(model, latent_scale, res.ckpt_path, tc.steps);
  }
  if (out_model) *out_model = std::move(model);
  return res;
}

}  // namespace rirflow
