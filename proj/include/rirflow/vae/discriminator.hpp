// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rirflow/nn/layers.hpp"
#include "rirflow/nn/stft_op.hpp"

namespace rirflow {

// Multi-scale STFT discriminator.  Each scale runs a small 2D conv stack over
// the complex spectrogram (re/im as 2 channels) with time dilations 1, 2, 4
// and frequency stride 2, and reports its intermediate activations for
// feature matching.

struct DiscOutput {
  std::vector<NodePtr> scores;                 // one scalar map per scale
  std::vector<std::vector<NodePtr>> features;  // per scale, per layer
};

class MsStftDiscriminator {
 public:
  MsStftDiscriminator(const std::vector<long>& windows, long channels, uint64_t seed) {
    Rng rng = Rng::substream(seed, "disc-init");
    for (size_t s = 0; s < windows.size(); ++s) {
      StftParams p;
      p.fft_size = static_cast<int>(windows[s]);
      p.win_length = static_cast<int>(windows[s]);
      p.hop_length = static_cast<int>(std::max<long>(windows[s] / 4, 1));
      bases_.push_back(std::make_shared<StftBasis>(p));
      const std::string pre = "disc.scale" + std::to_string(s);
      Scale sc;
      sc.conv_in = Conv2dLayer(params_, pre + ".in", 2, channels, 3, 3, rng, 1, 1, 1, 1);
      for (long d : {1L, 2L, 4L})
        sc.mids.emplace_back(params_, pre + ".mid_d" + std::to_string(d), channels, channels,
                             3, 3, rng, /*sh=*/2, /*sw=*/1, /*ph=*/1, /*pw=*/d,
                             /*dh=*/1, /*dw=*/d);
      sc.conv_out = Conv2dLayer(params_, pre + ".out", channels, 1, 3, 3, rng, 1, 1, 1, 1);
      scales_.push_back(std::move(sc));
    }
  }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  size_t num_scales() const { return scales_.size(); }

  /// x: rank-1 waveform node; throws "input too short" below the largest window.
  DiscOutput forward(const NodePtr& x) const {
    DiscOutput out;
    for (size_t s = 0; s < scales_.size(); ++s) {
      auto spec = stft_complex_node(x, bases_[s]);  // [2, F, T]
      std::vector<NodePtr> feats;
      auto h = leaky_relu(scales_[s].conv_in(spec), 0.2);
      feats.push_back(h);
      for (const auto& mid : scales_[s].mids) {
        h = leaky_relu(mid(h), 0.2);
        feats.push_back(h);
      }
      out.scores.push_back(scales_[s].conv_out(h));
      out.features.push_back(std::move(feats));
    }
    return out;
  }

 private:
  struct Scale {
    Conv2dLayer conv_in;
    std::vector<Conv2dLayer> mids;
    Conv2dLayer conv_out;
  };
  ParamStore params_;
  std::vector<Scale> scales_;
  std::vector<std::shared_ptr<StftBasis>> bases_;
};

}  // namespace rirflow
