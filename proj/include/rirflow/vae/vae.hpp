// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/core/rng.hpp"
#include "rirflow/nn/layers.hpp"
#include "rirflow/signal/waveform.hpp"

namespace rirflow {

// Waveform VAE: four weight-normalized convolutional stages with snake
// activations compress an RIR by 16x in time into a 32-channel latent grid;
// the decoder mirrors the encoder and ends in tanh.

struct VaeConfig {
  long latent_channels = 32;
  std::vector<long> strides{2, 2, 2, 2};
  long base_width = 32;
  double snake_beta_init = 1.0;
  double w_mr = 1.0;
  double w_kl = 1e-4;
  double w_adv = 0.1;
  double w_feat = 5.0;
  double lr_generator = 1.5e-5;
  double lr_discriminator = 3e-5;
  std::vector<long> disc_windows{2048, 1024, 512, 256, 128};
  long disc_channels = 32;
  std::vector<long> mr_windows{512, 256, 128};

  void validate() const {
    if (latent_channels <= 0 || base_width <= 0)
      throw std::invalid_argument("VaeConfig: widths must be positive");
    for (long s : strides)
      if (s < 1) throw std::invalid_argument("VaeConfig: strides must be >= 1");
    if (w_mr < 0 || w_kl < 0 || w_adv < 0 || w_feat < 0)
      throw std::invalid_argument("VaeConfig: loss weights must be >= 0");
    if (!(snake_beta_init > 0))
      throw std::invalid_argument("VaeConfig: snake beta init must be positive");
  }

  long total_stride() const {
    long p = 1;
    for (long s : strides) p *= s;
    return p;
  }

  /// Channel width after stage i (doubles every other stage): W, W, 2W, 2W...
  long stage_width(size_t i) const { return base_width << (i / 2); }
};

/// Small analysis/synthesis windows sized for 2048-sample desk inputs.
inline VaeConfig desk_vae_config() {
  VaeConfig c;
  c.disc_windows = {512, 256, 128, 64, 32};
  c.disc_channels = 8;
  return c;
}

struct PosteriorParams {
  Tensor mean;     // [C, L]
  Tensor log_var;  // [C, L]

  void validate() const {
    if (!mean.same_shape(log_var))
      throw std::invalid_argument("PosteriorParams: shape mismatch");
    if (!mean.all_finite() || !log_var.all_finite())
      throw std::invalid_argument("PosteriorParams: non-finite values");
  }
};

/// z = mean + exp(log_var / 2) * eps.
inline Tensor vae_sample(const PosteriorParams& post, const Tensor& eps) {
  if (!eps.same_shape(post.mean)) throw std::invalid_argument("vae_sample: eps shape mismatch");
  Tensor z = post.mean;
  for (long i = 0; i < z.count(); ++i)
    z.data[i] += std::exp(0.5 * post.log_var.data[i]) * eps.data[i];
  return z;
}

inline Tensor vae_sample(const PosteriorParams& post, Rng& rng) {
  Tensor eps = Tensor::zeros(post.mean.shape);
  for (auto& e : eps.data) e = rng.normal();
  return vae_sample(post, eps);
}

namespace detail {

/// Kernel/pad pair that makes a stride-s conv map length L to exactly L/s
/// (and the matching transposed conv map L to s*L): K - 2*pad == s.
inline std::pair<long, long> resample_kernel(long s) {
  if (s % 2 == 0) return {2 * s, s / 2};
  return {2 * s + 1, (s + 1) / 2};
}

/// Per-channel snake activation with log-parameterized beta (always > 0).
struct SnakeLayer {
  NodePtr log_beta;
  SnakeLayer() = default;
  SnakeLayer(ParamStore& ps, const std::string& name, long channels, double beta_init) {
    log_beta = ps.add(name + ".log_beta", Tensor::full({channels}, std::log(beta_init)));
  }
  NodePtr operator()(const NodePtr& x) const { return snake(x, exp_op(log_beta)); }
};

/// snake -> dilated conv -> snake -> 1x1 conv, added back to the input.
struct ResUnit {
  SnakeLayer act1, act2;
  Conv1dLayer conv1, conv2;

  ResUnit() = default;
  ResUnit(ParamStore& ps, const std::string& name, long ch, double beta_init, Rng& rng,
          long dil = 3) {
    act1 = SnakeLayer(ps, name + ".act1", ch, beta_init);
    conv1 = Conv1dLayer(ps, name + ".conv1", ch, ch, 5, rng, 1, 2 * dil, dil);
    act2 = SnakeLayer(ps, name + ".act2", ch, beta_init);
    conv2 = Conv1dLayer(ps, name + ".conv2", ch, ch, 1, rng);
  }

  NodePtr operator()(const NodePtr& x) const {
    return add(x, conv2(act2(conv1(act1(x)))));
  }
};

}  // namespace detail

struct PosteriorNodes {
  NodePtr mean;
  NodePtr log_var;
};

class VaeModel {
 public:
  VaeModel(const VaeConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng::substream(seed, "vae-init");
    const size_t n = cfg_.strides.size();

    enc_in_ = Conv1dLayer(params_, "enc.in", 1, cfg_.base_width, 7, rng, 1, 3);
    long ch = cfg_.base_width;
    for (size_t i = 0; i < n; ++i) {
      const long out = cfg_.stage_width(i);
      const long s = cfg_.strides[i];
      const std::string p = "enc.stage" + std::to_string(i);
      const auto [k, pad] = detail::resample_kernel(s);
      enc_down_act_.emplace_back(params_, p + ".down_act", ch, cfg_.snake_beta_init);
      enc_down_.emplace_back(params_, p + ".down", ch, out, k, rng, s, pad);
      enc_res_.emplace_back(params_, p + ".res", out, cfg_.snake_beta_init, rng);
      ch = out;
    }
    enc_head_act_ = detail::SnakeLayer(params_, "enc.head_act", ch, cfg_.snake_beta_init);
    enc_head_ = Conv1dLayer(params_, "enc.head", ch, 2 * cfg_.latent_channels, 3, rng, 1, 1);

    dec_in_ = Conv1dLayer(params_, "dec.in", cfg_.latent_channels, ch, 3, rng, 1, 1);
    for (size_t i = 0; i < n; ++i) {
      const size_t ei = n - 1 - i;  // mirror stage index
      const long out = ei == 0 ? cfg_.base_width : cfg_.stage_width(ei - 1);
      const long s = cfg_.strides[ei];
      const std::string p = "dec.stage" + std::to_string(i);
      const auto [k, pad] = detail::resample_kernel(s);
      dec_up_act_.emplace_back(params_, p + ".up_act", ch, cfg_.snake_beta_init);
      dec_up_.emplace_back(params_, p + ".up", ch, out, k, rng, s, pad);
      dec_res_.emplace_back(params_, p + ".res", out, cfg_.snake_beta_init, rng);
      ch = out;
    }
    dec_head_act_ = detail::SnakeLayer(params_, "dec.head_act", ch, cfg_.snake_beta_init);
    dec_head_ = Conv1dLayer(params_, "dec.head", ch, 1, 7, rng, 1, 3);
  }

  const VaeConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// x: [1, N] with N divisible by the total stride.
  PosteriorNodes encode_node(const NodePtr& x) const {
    if (x->value.rank() != 2 || x->value.shape[0] != 1)
      throw std::invalid_argument("vae_encode: input must be [1, N]");
    if (x->value.shape[1] % cfg_.total_stride() != 0)
      throw std::invalid_argument("vae_encode: length not divisible by total stride");
    auto h = enc_in_(x);
    for (size_t i = 0; i < enc_down_.size(); ++i)
      h = enc_res_[i](enc_down_[i](enc_down_act_[i](h)));
    h = enc_head_(enc_head_act_(h));
    const long C = cfg_.latent_channels, L = h->value.shape[1];
    auto flat = reshape(h, {2 * C, L});
    auto mean = slice_rows(flat, 0, C);
    auto log_var = clamp(slice_rows(flat, C, 2 * C), -30.0, 20.0);
    return {mean, log_var};
  }

  /// z: [C, L] -> [1, N]; output strictly inside (-1, 1).
  NodePtr decode_node(const NodePtr& z) const {
    if (z->value.rank() != 2 || z->value.shape[0] != cfg_.latent_channels)
      throw std::invalid_argument("vae_decode: latent must be [C, L]");
    auto h = dec_in_(z);
    for (size_t i = 0; i < dec_up_.size(); ++i)
      h = dec_res_[i](dec_up_[i](dec_up_act_[i](h)));
    return tanh_op(dec_head_(dec_head_act_(h)));
  }

  PosteriorParams encode(const RirWaveform& wave) const {
    auto x = constant(Tensor::from(wave.samples, {1, static_cast<long>(wave.samples.size())}));
    auto post = encode_node(x);
    return {post.mean->value, post.log_var->value};
  }

  RirWaveform decode(const Tensor& z, int sample_rate) const {
    auto out = decode_node(constant(z));
    RirWaveform w;
    w.sample_rate = sample_rate;
    w.samples = out->value.data;
    return w;
  }

 private:
  VaeConfig cfg_;
  ParamStore params_;
  Conv1dLayer enc_in_, enc_head_, dec_in_, dec_head_;
  std::vector<detail::SnakeLayer> enc_down_act_, dec_up_act_;
  detail::SnakeLayer enc_head_act_, dec_head_act_;
  std::vector<Conv1dLayer> enc_down_;
  std::vector<ConvT1dLayer> dec_up_;
  std::vector<detail::ResUnit> enc_res_, dec_res_;
};

}  // namespace rirflow
