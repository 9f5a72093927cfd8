// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

#include "rirflow/flow/model.hpp"
#include "rirflow/flow/schedule.hpp"
#include "rirflow/vae/vae.hpp"

namespace rirflow {

struct GenerateConfig {
  long steps = 20;
  double guidance = 1.0;  // 1 = purely conditional
  uint64_t seed = 0;
};

/// Latent sampled by Euler integration of the (guided) velocity field.
/// latent_frames = rir_length / autoencoder total stride.
inline Tensor generate_latent(const FlowModel& model, double latent_scale, long latent_frames,
                              const FlowInputs& in, const GenerateConfig& gc) {
  if (!(latent_scale > 0.0)) throw std::invalid_argument("generate: latent_scale must be > 0");
  if (latent_frames < 1) throw std::invalid_argument("generate: latent_frames must be >= 1");
  const long C = model.config().dit.latent_channels;
  Rng rng = Rng::substream(gc.seed, "generate");
  Tensor eps = Tensor::zeros({C, latent_frames});
  for (auto& v : eps.data) v = rng.normal();

  auto field = [&](const Tensor& z, double t) {
    const Tensor cond = model.velocity(z, t, in, false);
    if (gc.guidance == 1.0) return cond;  // cfg with weight 1 returns the conditional branch
    const Tensor uncond = model.velocity(z, t, in, true);
    return cfg_velocity(uncond, cond, gc.guidance);
  };
  Tensor z0 = euler_integrate(eps, gc.steps, field);
  for (auto& v : z0.data) v *= latent_scale;
  return z0;
}

/// Full sample: noise -> guided flow -> latent -> waveform.
inline RirWaveform generate_rir(const FlowModel& model, const VaeModel& vae,
                                double latent_scale, const FlowInputs& in,
                                const GenerateConfig& gc, int sample_rate) {
  const long stride = vae.config().total_stride();
  if (model.config().rir_length % stride != 0)
    throw std::invalid_argument("generate: rir_length not divisible by autoencoder stride");
  const Tensor z = generate_latent(model, latent_scale, model.config().rir_length / stride, in, gc);
  return vae.decode(z, sample_rate);
}

}  // namespace rirflow
