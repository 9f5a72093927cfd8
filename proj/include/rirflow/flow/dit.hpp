// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/nn/layers.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Diffusion transformer over per-frame latent tokens.
//
// Variants:
//   adaln_ca   - [self-attn, cross-attn, ffn] blocks, every sublayer gated by
//                zero-initialised adaptive layer norm driven by a global
//                conditioning vector.
//   in_context - context tokens are concatenated into the self-attention
//                stream (positions after the latents); [self-attn, ffn]
//                blocks with the same adaptive gating.
//   ca_only    - plain pre-norm blocks; the global conditioning enters as
//                extra cross-attention tokens supplied by the caller.
// ---------------------------------------------------------------------------

enum class DitVariant { adaln_ca, in_context, ca_only };

inline std::string to_string(DitVariant v) {
  switch (v) {
    case DitVariant::adaln_ca: return "adaln_ca";
    case DitVariant::in_context: return "in_context";
    case DitVariant::ca_only: return "ca_only";
  }
  throw std::logic_error("unknown DitVariant");
}

inline DitVariant dit_variant_from_string(const std::string& s) {
  if (s == "adaln_ca") return DitVariant::adaln_ca;
  if (s == "in_context") return DitVariant::in_context;
  if (s == "ca_only") return DitVariant::ca_only;
  throw std::invalid_argument("unknown dit variant: " + s);
}

struct DitConfig {
  long latent_channels = 32;
  long width = 128;
  long depth = 4;
  long heads = 4;
  DitVariant variant = DitVariant::adaln_ca;

  long n_sublayers() const { return variant == DitVariant::in_context ? 2 : 3; }

  void validate() const {
    if (latent_channels < 1) throw std::invalid_argument("DitConfig: latent_channels must be >= 1");
    if (depth < 1) throw std::invalid_argument("DitConfig: depth must be >= 1");
    if (width < 1 || heads < 1 || width % heads != 0)
      throw std::invalid_argument("DitConfig: width must be a positive multiple of heads");
  }
};

class Dit {
 public:
  Dit() = default;
  Dit(ParamStore& ps, const std::string& name, const DitConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    token_in_ = Linear(ps, name + ".token_in", cfg.latent_channels, cfg.width, rng);
    out_ = Linear(ps, name + ".out", cfg.width, cfg.latent_channels, rng);
    const long nsub = cfg.n_sublayers();
    for (long i = 0; i < cfg.depth; ++i) {
      const std::string blk = name + ".blk" + std::to_string(i);
      self_.emplace_back(ps, blk + ".self", cfg.width, cfg.heads, rng);
      if (cfg.variant != DitVariant::in_context)
        cross_.emplace_back(ps, blk + ".cross", cfg.width, cfg.heads, rng);
      ffn_.emplace_back(ps, blk + ".ffn", cfg.width, 4 * cfg.width, rng);
      if (cfg.variant != DitVariant::ca_only)
        ada_.push_back(Linear(ps, blk + ".ada", cfg.width, 3 * nsub * cfg.width, rng,
                              /*bias=*/true, /*zero_init=*/true));
    }
  }

  const DitConfig& config() const { return cfg_; }

  /// z: [C, L] latent.  g: [width] global conditioning (ignored by ca_only).
  /// ctx: [M, width] context tokens.  Returns [C, L].
  NodePtr forward(const NodePtr& z, const NodePtr& g, const NodePtr& ctx) const {
    if (z->value.rank() != 2 || z->value.shape[0] != cfg_.latent_channels)
      throw std::invalid_argument("Dit: latent must be [" +
                                  std::to_string(cfg_.latent_channels) + ", L]");
    const long L = z->value.shape[1];
    const long W = cfg_.width;
    auto x = token_in_(transpose(z));

    std::vector<double> pos(L);
    std::iota(pos.begin(), pos.end(), 0.0);
    if (cfg_.variant == DitVariant::in_context) {
      const long M = ctx->value.shape[0];
      x = concat_rows(x, ctx);
      pos.resize(L + M);
      std::iota(pos.begin() + L, pos.end(), double(L));
    }

    for (long i = 0; i < cfg_.depth; ++i) {
      if (cfg_.variant == DitVariant::ca_only) {
        auto h = layernorm_rows(x);
        x = add(x, self_[i](h, h, &pos));
        x = add(x, cross_[i](layernorm_rows(x), ctx));
        x = add(x, ffn_[i](layernorm_rows(x)));
        continue;
      }
      auto mods = ada_[i](g);  // [3 * nsub * W]
      auto flat = reshape(mods, {1, mods->value.count()});
      auto seg = [&](long k) { return reshape(slice_cols(flat, k * W, (k + 1) * W), {W}); };
      long j = 0;
      auto gated = [&](const NodePtr& in, auto&& sub) {
        auto shift = seg(3 * j), scale = seg(3 * j + 1), gate = seg(3 * j + 2);
        ++j;
        auto h = add_rowvec(mul_rowvec(layernorm_rows(in), add_scalar(scale, 1.0)), shift);
        return add(in, mul_rowvec(sub(h), gate));
      };
      x = gated(x, [&](const NodePtr& h) { return self_[i](h, h, &pos); });
      if (cfg_.variant == DitVariant::adaln_ca)
        x = gated(x, [&](const NodePtr& h) { return cross_[i](h, ctx); });
      x = gated(x, [&](const NodePtr& h) { return ffn_[i](h); });
    }

    if (cfg_.variant == DitVariant::in_context) x = slice_rows(x, 0, L);
    return transpose(out_(layernorm_rows(x)));
  }

 private:
  DitConfig cfg_;
  Linear token_in_, out_;
  std::vector<MultiheadAttention> self_, cross_;
  std::vector<FeedForward> ffn_;
  std::vector<Linear> ada_;
};

}  // namespace rirflow
