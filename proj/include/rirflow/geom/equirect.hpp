// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rirflow/core/tensor.hpp"
#include "rirflow/core/vec3.hpp"
#include "rirflow/sim/room.hpp"

namespace rirflow {

/// Equirectangular panorama of distances, H rows (elevation) x W columns
/// (azimuth), receiver-centred.
struct PanoDepth {
  Tensor depths;  // [H, W], all > 0
  long H() const { return depths.shape[0]; }
  long W() const { return depths.shape[1]; }

  void validate() const {
    if (depths.rank() != 2) throw std::invalid_argument("PanoDepth: rank must be 2");
    for (double d : depths.data)
      if (!(d > 0.0) || !std::isfinite(d))
        throw std::invalid_argument("PanoDepth: depths must be positive finite");
  }
};

struct PointMap {
  Tensor coords;  // [H, W, 3] receiver-frame meters
};

struct ReflectionMap {
  Tensor values;  // [H, W, 3]
  long H() const { return values.shape[0]; }
  long W() const { return values.shape[1]; }
};

/// Pixel-centre ray direction: azimuth sweeps columns, elevation rows, with
/// row 0 at the top (+z pole).
inline Vec3 equirect_direction(long v, long u, long H, long W) {
  const double phi = 2.0 * std::numbers::pi * (u + 0.5) / W - std::numbers::pi;
  const double theta = std::numbers::pi / 2.0 - std::numbers::pi * (v + 0.5) / H;
  return {std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), std::sin(theta)};
}

/// Translation into the receiver's (axis-aligned) frame.
inline Vec3 to_receiver_frame(const Pose& p, const Pose& receiver) {
  return p.position - receiver.position;
}

inline PointMap unproject_equirect(const PanoDepth& depth) {
  depth.validate();
  const long H = depth.H(), W = depth.W();
  PointMap pm;
  pm.coords = Tensor::zeros({H, W, 3});
  for (long v = 0; v < H; ++v)
    for (long u = 0; u < W; ++u) {
      const Vec3 d = equirect_direction(v, u, H, W) * depth.depths.at2(v, u);
      pm.coords.at3(v, u, 0) = d.x;
      pm.coords.at3(v, u, 1) = d.y;
      pm.coords.at3(v, u, 2) = d.z;
    }
  return pm;
}

/// Reflection map: wall points relative to a source given in receiver frame.
inline ReflectionMap reflection_map(const PointMap& pm, const Vec3& src_in_rcv) {
  ReflectionMap rm;
  rm.values = pm.coords;
  const long n = rm.values.count() / 3;
  for (long i = 0; i < n; ++i) {
    rm.values.data[3 * i + 0] -= src_in_rcv.x;
    rm.values.data[3 * i + 1] -= src_in_rcv.y;
    rm.values.data[3 * i + 2] -= src_in_rcv.z;
  }
  return rm;
}

}  // namespace rirflow
