// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/flow/conditioner.hpp"
#include "rirflow/vae/vae.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Dual encoder aligning room responses with receiver-centric geometry in one
// embedding space, trained with a symmetric contrastive objective.
// ---------------------------------------------------------------------------

enum class AudioMode { frozen_vae, finetune_vae };

inline std::string to_string(AudioMode m) {
  return m == AudioMode::frozen_vae ? "frozen_vae" : "finetune_vae";
}

inline AudioMode audio_mode_from_string(const std::string& s) {
  if (s == "frozen_vae") return AudioMode::frozen_vae;
  if (s == "finetune_vae") return AudioMode::finetune_vae;
  throw std::invalid_argument("unknown audio mode: " + s);
}

struct AgreeConfig {
  long embed_dim = 512;
  long batch_size = 128;
  double lr = 1e-4;
  long warmup_steps = 200;  // desk scale; full scale uses 10000
  AudioMode audio_mode = AudioMode::frozen_vae;
  double log_lambda_init = 2.659;  // lambda ~ 14.28
  double lambda_max = 100.0;
  CondConfig geometry;  // vit_* and room_scale fields drive the patch encoder
  long geo_h = 32;
  long geo_w = 64;

  void validate() const {
    if (embed_dim <= 0) throw std::invalid_argument("AgreeConfig: embed_dim must be > 0");
    if (batch_size < 1) throw std::invalid_argument("AgreeConfig: batch_size must be >= 1");
    if (!(lambda_max > 0)) throw std::invalid_argument("AgreeConfig: lambda_max must be > 0");
  }
};

/// Symmetric contrastive loss over unit-norm embedding rows G, A with a
/// scalar logit scale: 0.5 * (CE(lambda G A^T, I) + CE(lambda A G^T, I)).
inline NodePtr agree_contrastive_loss(const NodePtr& G, const NodePtr& A,
                                      const NodePtr& lambda) {
  if (G->value.rank() != 2 || !G->value.same_shape(A->value))
    throw std::invalid_argument("agree loss: G and A must be matching [B, d] matrices");
  for (const NodePtr& m : {G, A}) {
    const long B = m->value.shape[0], d = m->value.shape[1];
    for (long i = 0; i < B; ++i) {
      double sq = 0.0;
      for (long j = 0; j < d; ++j) sq += m->value.data[i * d + j] * m->value.data[i * d + j];
      if (std::abs(std::sqrt(sq) - 1.0) > 1e-6)
        throw std::invalid_argument("agree loss: rows must be unit-norm");
    }
  }
  auto ce_vs_identity = [](const NodePtr& logits) {
    return mean_all(sub(logsumexp_rows(logits), take_diag(logits)));
  };
  auto lg = scale_by(matmul(G, transpose(A)), lambda);
  auto la = scale_by(matmul(A, transpose(G)), lambda);
  return scale(add(ce_vs_identity(lg), ce_vs_identity(la)), 0.5);
}

class AgreeModel {
 public:
  AgreeModel() = default;
  AgreeModel(const AgreeConfig& cfg, long latent_channels, uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng = Rng::substream(seed, "agree-init");
    geometry_ =
        GeometryEncoder(params_, "geometry", cfg.geometry, cfg.geo_h, cfg.geo_w, rng);
    audio_proj_ = Linear(params_, "audio_proj", latent_channels, cfg.embed_dim, rng);
    geo_proj_ = Linear(params_, "geo_proj", cfg.geometry.vit_width, cfg.embed_dim, rng);
    log_scale_ = params_.add("logit_scale", Tensor::from({cfg.log_lambda_init}, {1}));
  }

  const AgreeConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const GeometryEncoder& geometry() const { return geometry_; }

  /// lambda = exp(log_scale) clamped to (0, lambda_max].
  NodePtr lambda_node() const { return clamp(exp_op(log_scale_), 0.0, cfg_.lambda_max); }
  double lambda_value() const { return lambda_node()->value.data[0]; }

  /// [C, L] autoencoder features -> mean pool over frames -> projection.
  /// The raw variant skips L2 normalization; diversity metrics use it.
  NodePtr project_audio_features_raw(const NodePtr& features) const {
    return reshape(audio_proj_(mean_over_cols(features)), {1, cfg_.embed_dim});
  }

  NodePtr project_audio_features(const NodePtr& features) const {
    return l2_normalize_rows(project_audio_features_raw(features));
  }

  /// Unnormalized audio projection as a plain [embed_dim] vector.
  Tensor embed_audio_raw(const VaeModel& vae, const RirWaveform& rir) const {
    Tensor t = project_audio_features_raw(constant(vae.encode(rir).mean))->value;
    t.shape = {cfg_.embed_dim};
    return t;
  }

  NodePtr embed_audio_node(const VaeModel& vae, const RirWaveform& rir) const {
    if (cfg_.audio_mode == AudioMode::frozen_vae)
      return project_audio_features(constant(vae.encode(rir).mean));
    Tensor x = Tensor::from(rir.samples, {1, static_cast<long>(rir.samples.size())});
    return project_audio_features(vae.encode_node(constant(std::move(x))).mean);
  }

  /// Patch-transformer tokens -> mean pool -> projection -> unit row.
  NodePtr embed_geometry_node(const ReflectionMap& rm) const {
    auto pooled = mean_over_rows(geometry_.encode(rm));
    return l2_normalize_rows(reshape(geo_proj_(pooled), {1, cfg_.embed_dim}));
  }

  Tensor embed_audio(const VaeModel& vae, const RirWaveform& rir) const {
    Tensor t = embed_audio_node(vae, rir)->value;
    t.shape = {cfg_.embed_dim};
    return t;
  }

  Tensor embed_geometry(const ReflectionMap& rm) const {
    Tensor t = embed_geometry_node(rm)->value;
    t.shape = {cfg_.embed_dim};
    return t;
  }

 private:
  AgreeConfig cfg_;
  ParamStore params_;
  GeometryEncoder geometry_;
  Linear audio_proj_, geo_proj_;
  NodePtr log_scale_;
};

}  // namespace rirflow
