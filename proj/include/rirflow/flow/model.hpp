// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/flow/conditioner.hpp"
#include "rirflow/flow/dit.hpp"
#include "rirflow/sim/dataset.hpp"

namespace rirflow {

struct FlowConfig {
  DitConfig dit;  // latent_channels must match the paired autoencoder
  CondConfig cond;
  long geo_h = 32;
  long geo_w = 64;
  long rir_length = 2048;
  bool geometry_all_maps = false;  // also feed reflection maps for context sources

  void validate() const {
    dit.validate();
    if (rir_length < 1) throw std::invalid_argument("FlowConfig: rir_length must be >= 1");
  }
};

inline FlowConfig desk_flow_config() { return FlowConfig{}; }

/// Raw conditioning for one generation task.  Spectrograms and geometry
/// patches are plain tensors so callers can compute them once per bundle.
struct FlowInputs {
  std::vector<Tensor> ctx_specs;    // each [1, F, T]
  std::vector<Vec3> ctx_poses;      // context sources in the receiver frame
  std::vector<Tensor> geo_patches;  // [N, patch*patch*3] per reflection map
  Vec3 target_pose;                 // target source in the receiver frame
};

// ---------------------------------------------------------------------------
// Conditional velocity model: multimodal encoders feeding a DiT.  Dropping
// the conditioning (classifier-free training / unconditional branch) swaps
// in one learned null token per context modality and a learned null pose.
// The time features are never dropped.
// ---------------------------------------------------------------------------

class FlowModel {
 public:
  explicit FlowModel(const FlowConfig& cfg, uint64_t seed = 0) : cfg_(cfg) {
    cfg.validate();
    Rng rng = Rng::substream(seed, "flow-init");
    const long W = cfg.dit.width;
    acoustic_ = AcousticEncoder(params_, "cond.acoustic", cfg.cond, rng);
    geometry_ = GeometryEncoder(params_, "cond.geometry", cfg.cond, cfg.geo_h, cfg.geo_w, rng);
    proj_ac_ = Linear(params_, "cond.proj_acoustic", cfg.cond.acoustic_embed, W, rng);
    proj_sp_ = Linear(params_, "cond.proj_spatial", cfg.cond.pose_dim(), W, rng);
    proj_geo_ = Linear(params_, "cond.proj_geometry", cfg.cond.vit_width, W, rng);
    null_ctx_ = params_.add("cond.null_tokens", init_uniform({3, W}, 0.02, rng));
    null_pose_ = params_.add("cond.null_pose", init_uniform({cfg.cond.pose_dim()}, 0.02, rng));
    if (cfg.dit.variant == DitVariant::ca_only) {
      time_tok_ = Linear(params_, "cond.time_token", cfg.cond.time_dim, W, rng);
      pose_tok_ = Linear(params_, "cond.pose_token", cfg.cond.pose_dim(), W, rng);
    } else {
      glob1_ = Linear(params_, "cond.global.fc1", cfg.cond.time_dim + cfg.cond.pose_dim(), W,
                      rng);
      glob2_ = Linear(params_, "cond.global.fc2", W, W, rng);
    }
    dit_ = Dit(params_, "dit", cfg.dit, rng);
  }

  const FlowConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Tensor context_spectrogram(const std::vector<double>& wave) const {
    return acoustic_.spectrogram(wave);
  }

  FlowInputs make_inputs(const FewShotBundle& b) const {
    FlowInputs in;
    for (const auto& rir : b.context_rirs)
      in.ctx_specs.push_back(acoustic_.spectrogram(rir.samples));
    for (const auto& p : b.context_sources)
      in.ctx_poses.push_back(to_receiver_frame(p, b.receiver));
    in.target_pose = to_receiver_frame(b.target_source, b.receiver);
    const PointMap pm = unproject_equirect(b.pano_depth);
    in.geo_patches.push_back(geometry_.patchify(reflection_map(pm, in.target_pose)));
    if (cfg_.geometry_all_maps)
      for (const auto& p : in.ctx_poses)
        in.geo_patches.push_back(geometry_.patchify(reflection_map(pm, p)));
    return in;
  }

  /// z: [C, L] noisy latent node.  Returns the predicted velocity [C, L].
  NodePtr velocity_node(const NodePtr& z, double t, const FlowInputs& in,
                        bool unconditional = false) const {
    auto ctx = context_tokens(in, unconditional);
    auto t_feat = constant(fourier_time_features(t, cfg_.cond.time_dim));
    NodePtr pose_feat = unconditional
                            ? null_pose_
                            : constant(sinusoidal_pose_embed(in.target_pose, cfg_.cond.n_freq));
    NodePtr g;
    if (cfg_.dit.variant == DitVariant::ca_only) {
      const long W = cfg_.dit.width;
      ctx = concat_rows(concat_rows(ctx, reshape(time_tok_(t_feat), {1, W})),
                        reshape(pose_tok_(pose_feat), {1, W}));
    } else {
      g = glob2_(gelu(glob1_(concat_vec(t_feat, pose_feat))));
    }
    return dit_.forward(z, g, ctx);
  }

  Tensor velocity(const Tensor& z, double t, const FlowInputs& in,
                  bool unconditional = false) const {
    return velocity_node(constant(z), t, in, unconditional)->value;
  }

 private:
  /// Token layout: [acoustic x K | spatial x K | geometry x N].
  NodePtr context_tokens(const FlowInputs& in, bool unconditional) const {
    if (unconditional) return null_ctx_;
    if (in.ctx_specs.empty() || in.ctx_specs.size() != in.ctx_poses.size())
      throw std::invalid_argument("FlowModel: need matching context spectrograms and poses");
    if (in.geo_patches.empty())
      throw std::invalid_argument("FlowModel: need at least one reflection map");
    const long W = cfg_.dit.width;
    NodePtr ac, sp, geo;
    for (size_t i = 0; i < in.ctx_specs.size(); ++i) {
      auto a = reshape(proj_ac_(acoustic_.forward(constant(in.ctx_specs[i]))), {1, W});
      auto s = reshape(
          proj_sp_(constant(sinusoidal_pose_embed(in.ctx_poses[i], cfg_.cond.n_freq))), {1, W});
      ac = ac ? concat_rows(ac, a) : a;
      sp = sp ? concat_rows(sp, s) : s;
    }
    for (const auto& gp : in.geo_patches) {
      auto g = proj_geo_(geometry_.forward(constant(gp)));
      geo = geo ? concat_rows(geo, g) : g;
    }
    return concat_rows(concat_rows(ac, sp), geo);
  }

  FlowConfig cfg_;
  ParamStore params_;
  AcousticEncoder acoustic_;
  GeometryEncoder geometry_;
  Linear proj_ac_, proj_sp_, proj_geo_;
  Linear time_tok_, pose_tok_;  // ca_only
  Linear glob1_, glob2_;        // adaln variants
  NodePtr null_ctx_, null_pose_;
  Dit dit_;
};

}  // namespace rirflow
