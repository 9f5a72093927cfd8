// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/nn/checkpoint.hpp"
#include "rirflow/nn/optim.hpp"
#include "rirflow/vae/losses.hpp"
#include "rirflow/vae/vae.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Config serialization (shared with checkpoints and the CLI)
// ---------------------------------------------------------------------------

inline nlohmann::json vae_config_to_json(const VaeConfig& c) {
  return {{"latent_channels", c.latent_channels}, {"strides", c.strides},
          {"base_width", c.base_width},           {"snake_beta_init", c.snake_beta_init},
          {"w_mr", c.w_mr},                       {"w_kl", c.w_kl},
          {"w_adv", c.w_adv},                     {"w_feat", c.w_feat},
          {"lr_generator", c.lr_generator},       {"lr_discriminator", c.lr_discriminator},
          {"disc_windows", c.disc_windows},       {"disc_channels", c.disc_channels},
          {"mr_windows", c.mr_windows}};
}

inline VaeConfig vae_config_from_json(const nlohmann::json& j) {
  VaeConfig c;
  c.latent_channels = j.value("latent_channels", c.latent_channels);
  c.strides = j.value("strides", c.strides);
  c.base_width = j.value("base_width", c.base_width);
  c.snake_beta_init = j.value("snake_beta_init", c.snake_beta_init);
  c.w_mr = j.value("w_mr", c.w_mr);
  c.w_kl = j.value("w_kl", c.w_kl);
  c.w_adv = j.value("w_adv", c.w_adv);
  c.w_feat = j.value("w_feat", c.w_feat);
  c.lr_generator = j.value("lr_generator", c.lr_generator);
  c.lr_discriminator = j.value("lr_discriminator", c.lr_discriminator);
  c.disc_windows = j.value("disc_windows", c.disc_windows);
  c.disc_channels = j.value("disc_channels", c.disc_channels);
  c.mr_windows = j.value("mr_windows", c.mr_windows);
  c.validate();
  return c;
}

inline void save_vae_checkpoint(const VaeModel& model, const std::string& path, long step) {
  Checkpoint ck;
  ck.kind = "vae";
  ck.step = step;
  ck.config = vae_config_to_json(model.config());
  store_to_checkpoint(model.params(), ck);
  save_checkpoint(path, ck);
}

inline VaeModel load_vae_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "vae") throw std::runtime_error("not a vae checkpoint: " + path);
  VaeModel model(vae_config_from_json(ck.config), 0);
  load_into_store(ck, model.params());
  return model;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct VaeTrainConfig {
  VaeConfig vae;
  long steps = 800;
  long batch_size = 4;
  long log_every = 10;
  uint64_t seed = 0;
  std::string out_dir;  // empty: keep everything in memory
};

struct VaeLossRow {
  long step = 0;
  double mr = 0, kl = 0, adv = 0, feat = 0, gen_total = 0, disc = 0;
};

struct VaeTrainResult {
  std::string ckpt_path;
  std::vector<VaeLossRow> log;
  double mr_first = 0, mr_last = 0;
};

/// Alternating generator/discriminator updates, deterministic given the seed.
/// `train_vae` consumes waveforms that all share one length divisible by the
/// VAE stride product.
inline VaeTrainResult train_vae(const std::vector<RirWaveform>& data,
                                const VaeTrainConfig& tc, VaeModel* out_model = nullptr) {
  if (data.empty()) throw std::invalid_argument("train_vae: empty dataset");
  const long n_samples = static_cast<long>(data[0].samples.size());
  for (const auto& w : data)
    if (static_cast<long>(w.samples.size()) != n_samples)
      throw std::invalid_argument("train_vae: inconsistent lengths");

  VaeModel model(tc.vae, tc.seed);
  MsStftDiscriminator disc(tc.vae.disc_windows, tc.vae.disc_channels, tc.seed);
  auto bases = mr_bases(tc.vae.mr_windows);

  AdamWConfig gcfg, dcfg;
  gcfg.lr = tc.vae.lr_generator;
  dcfg.lr = tc.vae.lr_discriminator;
  AdamW opt_g(model.params(), gcfg), opt_d(disc.params(), dcfg);
  Rng rng = Rng::substream(tc.seed, "vae-train");

  std::ofstream csv;
  if (!tc.out_dir.empty()) {
    std::filesystem::create_directories(tc.out_dir);
    csv.open(tc.out_dir + "/vae_loss.csv");
    csv << "step,mr,kl,adv,feat,gen_total,disc\n";
  }

  VaeTrainResult res;
  const long B = std::min<long>(tc.batch_size, data.size());
  for (long step = 0; step < tc.steps; ++step) {
    std::vector<long> idx(B);
    for (long b = 0; b < B; ++b) idx[b] = rng.uniform_int(data.size());

    // Generator pass; cache decoded values for the discriminator update.
    model.params().zero_grads();
    disc.params().zero_grads();
    VaeLossRow row;
    row.step = step;
    std::vector<Tensor> fakes;
    for (long b = 0; b < B; ++b) {
      const auto& wav = data[idx[b]];
      auto x2 = constant(Tensor::from(wav.samples, {1, n_samples}));
      auto x1 = reshape(x2, {n_samples});
      auto post = model.encode_node(x2);
      Tensor eps = Tensor::zeros(post.mean->value.shape);
      for (auto& e : eps.data) e = rng.normal();
      auto z = add(post.mean, mul(exp_op(scale(post.log_var, 0.5)), constant(eps)));
      auto xhat2 = model.decode_node(z);
      auto xhat1 = reshape(xhat2, {n_samples});
      fakes.push_back(xhat1->value);

      auto mr = mr_loss(x1, xhat1, bases);
      auto kl = kl_loss(post.mean, post.log_var);
      auto d_real = disc.forward(x1);
      auto d_fake = disc.forward(xhat1);
      auto adv = gen_adv_loss(d_fake);
      auto feat = feat_match_loss(d_real, d_fake);
      auto total = add(add(scale(mr.total, tc.vae.w_mr), scale(kl, tc.vae.w_kl)),
                       add(scale(adv, tc.vae.w_adv), scale(feat, tc.vae.w_feat)));
      backward(scale(total, 1.0 / B));
      row.mr += mr.total->scalar() / B;
      row.kl += kl->scalar() / B;
      row.adv += adv->scalar() / B;
      row.feat += feat->scalar() / B;
      row.gen_total += total->scalar() / B;
    }
    if (!std::isfinite(row.gen_total))
      throw std::runtime_error("train_vae: non-finite generator loss at step " +
                               std::to_string(step));
    opt_g.step(model.params());

    // Discriminator pass against detached reconstructions.
    disc.params().zero_grads();
    for (long b = 0; b < B; ++b) {
      const auto& wav = data[idx[b]];
      auto x1 = constant(Tensor::from(wav.samples, {n_samples}));
      auto d_real = disc.forward(x1);
      auto d_fake = disc.forward(constant(fakes[b]));
      auto dl = hinge_disc_loss(d_real, d_fake);
      backward(scale(dl, 1.0 / B));
      row.disc += dl->scalar() / B;
    }
    if (!std::isfinite(row.disc))
      throw std::runtime_error("train_vae: non-finite discriminator loss at step " +
                               std::to_string(step));
    opt_d.step(disc.params());

    if (step == 0) res.mr_first = row.mr;
    res.mr_last = row.mr;
    if (step % tc.log_every == 0 || step + 1 == tc.steps) {
      res.log.push_back(row);
      if (csv.is_open())
        csv << row.step << ',' << row.mr << ',' << row.kl << ',' << row.adv << ',' << row.feat
            << ',' << row.gen_total << ',' << row.disc << '\n';
    }
  }

  model.params().snap_to_float32();
  if (!tc.out_dir.empty()) {
    res.ckpt_path = tc.out_dir + "/vae.ckpt";
    save_vae_checkpoint(model, res.ckpt_path, tc.steps);
  }
  if (out_model) *out_model = std::move(model);
  return res;
}

}  // namespace rirflow
