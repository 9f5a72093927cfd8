// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/core/vec3.hpp"
#include "rirflow/geom/equirect.hpp"
#include "rirflow/nn/layers.hpp"
#include "rirflow/signal/stft.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Deterministic feature maps
// ---------------------------------------------------------------------------

/// [sin(2 pi f_k t), cos(2 pi f_k t)] over d/2 log-spaced frequencies in
/// [1, 1000].
inline Tensor fourier_time_features(double t, long d = 64) {
  if (d <= 0 || d % 2 != 0) throw std::invalid_argument("fourier_time_features: d must be even");
  const long nf = d / 2;
  Tensor out = Tensor::zeros({d});
  for (long i = 0; i < nf; ++i) {
    const double f = nf > 1 ? std::pow(1000.0, double(i) / double(nf - 1)) : 1.0;
    out.data[2 * i] = std::sin(2.0 * std::numbers::pi * f * t);
    out.data[2 * i + 1] = std::cos(2.0 * std::numbers::pi * f * t);
  }
  return out;
}

/// Per coordinate, [sin(2^k c), cos(2^k c)] for k = 0..n_freq-1; length
/// 6 * n_freq.
inline Tensor sinusoidal_pose_embed(const Vec3& xyz, long n_freq = 20) {
  if (n_freq < 1) throw std::invalid_argument("sinusoidal_pose_embed: n_freq must be >= 1");
  Tensor out = Tensor::zeros({6 * n_freq});
  const double coords[3] = {xyz.x, xyz.y, xyz.z};
  long idx = 0;
  for (double c : coords)
    for (long k = 0; k < n_freq; ++k) {
      const double s = std::ldexp(c, static_cast<int>(k));  // 2^k * c
      out.data[idx++] = std::sin(s);
      out.data[idx++] = std::cos(s);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct CondConfig {
  long acoustic_embed = 512;
  std::vector<long> acoustic_channels{8, 16, 32};
  int stft_fft = 124;
  int stft_win = 62;
  int stft_hop = 31;
  long n_freq = 20;   // pose embedding frequencies
  long time_dim = 64; // Fourier time feature width
  long vit_patch = 8;
  long vit_depth = 2;
  long vit_width = 64;
  long vit_heads = 4;
  double room_scale = 10.0;  // meters; reflection maps divided by this

  long pose_dim() const { return 6 * n_freq; }

  StftParams acoustic_stft() const {
    StftParams p;
    p.fft_size = stft_fft;
    p.win_length = stft_win;
    p.hop_length = stft_hop;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Acoustic context encoder: magnitude spectrogram -> small residual CNN ->
// fixed-width embedding.  Spectrograms of context RIRs are constants, so
// callers may precompute them once per bundle.
// ---------------------------------------------------------------------------

namespace detail {

struct ResBlock2d {
  Conv2dLayer c1, c2;
  ResBlock2d() = default;
  ResBlock2d(ParamStore& ps, const std::string& name, long ch, Rng& rng) {
    c1 = Conv2dLayer(ps, name + ".c1", ch, ch, 3, 3, rng, 1, 1, 1, 1);
    c2 = Conv2dLayer(ps, name + ".c2", ch, ch, 3, 3, rng, 1, 1, 1, 1);
  }
  NodePtr operator()(const NodePtr& x) const { return add(x, c2(relu(c1(relu(x))))); }
};

}  // namespace detail

class AcousticEncoder {
 public:
  AcousticEncoder() = default;
  AcousticEncoder(ParamStore& ps, const std::string& name, const CondConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    long in = 1;
    for (size_t i = 0; i < cfg.acoustic_channels.size(); ++i) {
      const long out = cfg.acoustic_channels[i];
      downs_.emplace_back(ps, name + ".down" + std::to_string(i), in, out, 3, 3, rng, 2, 2, 1,
                          1);
      blocks_.emplace_back(ps, name + ".res" + std::to_string(i), out, rng);
      in = out;
    }
    head_ = Linear(ps, name + ".head", in, cfg.acoustic_embed, rng);
  }

  Tensor spectrogram(const std::vector<double>& wave) const {
    Spectrogram s = stft_magnitude(wave, cfg_.acoustic_stft());
    Tensor out = std::move(s.magnitudes);
    out.shape = {1, out.shape[0], out.shape[1]};
    return out;
  }

  /// spec: [1, F, T] magnitude spectrogram -> [embed] vector node.
  NodePtr forward(const NodePtr& spec) const {
    auto h = spec;
    for (size_t i = 0; i < downs_.size(); ++i) h = blocks_[i](relu(downs_[i](h)));
    const long C = h->value.shape[0];
    auto pooled = mean_over_cols(reshape(h, {C, h->value.count() / C}));
    return head_(pooled);
  }

  NodePtr encode(const std::vector<double>& wave) const {
    return forward(constant(spectrogram(wave)));
  }

 private:
  CondConfig cfg_;
  std::vector<Conv2dLayer> downs_;
  std::vector<detail::ResBlock2d> blocks_;
  Linear head_;
};

// ---------------------------------------------------------------------------
// Geometry encoder: reflection map -> patch tokens -> small pre-norm
// transformer.  Output: one token per patch.
// ---------------------------------------------------------------------------

class GeometryEncoder {
 public:
  GeometryEncoder() = default;
  GeometryEncoder(ParamStore& ps, const std::string& name, const CondConfig& cfg, long H,
                  long W, Rng& rng)
      : cfg_(cfg), H_(H), W_(W) {
    if (H % cfg.vit_patch != 0 || W % cfg.vit_patch != 0)
      throw std::invalid_argument("encode_geometry: H, W must be divisible by patch size");
    n_tokens_ = (H / cfg.vit_patch) * (W / cfg.vit_patch);
    const long patch_dim = cfg.vit_patch * cfg.vit_patch * 3;
    embed_ = Linear(ps, name + ".embed", patch_dim, cfg.vit_width, rng);
    pos_ = ps.add(name + ".pos", init_uniform({n_tokens_, cfg.vit_width}, 0.02, rng));
    for (long i = 0; i < cfg.vit_depth; ++i) {
      attn_.emplace_back(ps, name + ".blk" + std::to_string(i) + ".attn", cfg.vit_width,
                         cfg.vit_heads, rng);
      ffn_.emplace_back(ps, name + ".blk" + std::to_string(i) + ".ffn", cfg.vit_width,
                        4 * cfg.vit_width, rng);
    }
  }

  long num_tokens() const { return n_tokens_; }

  /// rm values are divided by room_scale before patchification.
  Tensor patchify(const ReflectionMap& rm) const {
    if (rm.values.rank() != 3 || rm.values.shape[2] != 3)
      throw std::invalid_argument("encode_geometry: map must be [H, W, 3]");
    if (rm.values.shape[0] != H_ || rm.values.shape[1] != W_)
      throw std::invalid_argument("encode_geometry: map size mismatch");
    const long p = cfg_.vit_patch, pw = W_ / p;
    Tensor out = Tensor::zeros({n_tokens_, p * p * 3});
    for (long v = 0; v < H_; ++v)
      for (long u = 0; u < W_; ++u) {
        const long token = (v / p) * pw + (u / p);
        const long base = ((v % p) * p + (u % p)) * 3;
        for (long c = 0; c < 3; ++c)
          out.data[token * (p * p * 3) + base + c] =
              rm.values.at3(v, u, c) / cfg_.room_scale;
      }
    return out;
  }

  /// patches: [N, p*p*3] -> [N, vit_width] tokens.
  NodePtr forward(const NodePtr& patches) const {
    auto h = add(embed_(patches), pos_);
    for (size_t i = 0; i < attn_.size(); ++i) {
      auto ln1 = layernorm_rows(h);
      h = add(h, attn_[i](ln1, ln1));
      h = add(h, ffn_[i](layernorm_rows(h)));
    }
    return h;
  }

  NodePtr encode(const ReflectionMap& rm) const { return forward(constant(patchify(rm))); }

 private:
  CondConfig cfg_;
  long H_ = 0, W_ = 0, n_tokens_ = 0;
  Linear embed_;
  NodePtr pos_;
  std::vector<MultiheadAttention> attn_;
  std::vector<FeedForward> ffn_;
};

}  // namespace rirflow
