// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "rirflow/core/rng.hpp"
#include "rirflow/core/tensor.hpp"

namespace rirflow {

// Rectified-flow schedule: straight paths z_t = (1-t) z0 + t eps with
// velocity target eps - z0, plus the timestep samplers and the classifier-free
// guided Euler integrator.

enum class TimestepKind { logsnr, uniform, ones, logit_normal };

inline std::string to_string(TimestepKind k) {
  switch (k) {
    case TimestepKind::logsnr: return "logsnr";
    case TimestepKind::uniform: return "uniform";
    case TimestepKind::ones: return "ones";
    case TimestepKind::logit_normal: return "logit_normal";
  }
  throw std::logic_error("unreachable");
}

inline TimestepKind timestep_kind_from_string(const std::string& s) {
  if (s == "logsnr") return TimestepKind::logsnr;
  if (s == "uniform") return TimestepKind::uniform;
  if (s == "ones") return TimestepKind::ones;
  if (s == "logit_normal") return TimestepKind::logit_normal;
  throw std::invalid_argument("unknown timestep kind: " + s);
}

struct TimestepSampler {
  TimestepKind kind = TimestepKind::logsnr;
  double logsnr_mu = -1.2;
  double logsnr_sigma = 2.0;
};

inline double sample_timestep(const TimestepSampler& s, Rng& rng) {
  switch (s.kind) {
    case TimestepKind::logsnr: {
      const double alpha = s.logsnr_mu + s.logsnr_sigma * rng.normal();
      return 1.0 / (1.0 + std::exp(alpha));
    }
    case TimestepKind::uniform:
      return rng.uniform();
    case TimestepKind::ones:
      return 1.0;
    case TimestepKind::logit_normal: {
      const double alpha = rng.normal();
      return 1.0 / (1.0 + std::exp(-alpha));
    }
  }
  throw std::logic_error("sample_timestep: unknown kind");
}

/// z_t = (1 - t) z0 + t eps.
inline Tensor interpolate_latent(const Tensor& z0, const Tensor& eps, double t) {
  if (!z0.same_shape(eps)) throw std::invalid_argument("interpolate_latent: shape mismatch");
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("interpolate_latent: t outside [0, 1]");
  Tensor out = z0;
  for (long i = 0; i < out.count(); ++i)
    out.data[i] = (1.0 - t) * z0.data[i] + t * eps.data[i];
  return out;
}

/// v = eps - z0.
inline Tensor target_velocity(const Tensor& z0, const Tensor& eps) {
  if (!z0.same_shape(eps)) throw std::invalid_argument("target_velocity: shape mismatch");
  Tensor out = eps;
  for (long i = 0; i < out.count(); ++i) out.data[i] -= z0.data[i];
  return out;
}

/// u_uncond + omega * (u_cond - u_uncond).  omega == 1 returns the
/// conditional field bit-exactly.
inline Tensor cfg_velocity(const Tensor& u_uncond, const Tensor& u_cond, double omega) {
  if (!u_uncond.same_shape(u_cond)) throw std::invalid_argument("cfg_velocity: shape mismatch");
  if (omega < 0.0) throw std::invalid_argument("cfg_velocity: omega must be >= 0");
  if (omega == 1.0) return u_cond;
  Tensor out = u_uncond;
  for (long i = 0; i < out.count(); ++i)
    out.data[i] += omega * (u_cond.data[i] - u_uncond.data[i]);
  return out;
}

/// Integrate dz/dt = v backward on a uniform grid from t = 1 to t = 0 with
/// explicit Euler: z <- z - v(z, t) * dt.  Exact for fields constant along
/// the path at any step count.
inline Tensor euler_integrate(const Tensor& eps, long steps,
                              const std::function<Tensor(const Tensor&, double)>& velocity) {
  if (steps < 1) throw std::invalid_argument("euler_integrate: steps must be >= 1");
  Tensor z = eps;
  const double dt = 1.0 / static_cast<double>(steps);
  for (long k = 0; k < steps; ++k) {
    const double t = 1.0 - k * dt;
    Tensor v = velocity(z, t);
    if (!v.same_shape(z)) throw std::invalid_argument("euler_integrate: field shape mismatch");
    for (long i = 0; i < z.count(); ++i) z.data[i] -= v.data[i] * dt;
  }
  return z;
}

}  // namespace rirflow
