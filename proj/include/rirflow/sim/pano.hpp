// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "rirflow/geom/equirect.hpp"
#include "rirflow/sim/room.hpp"

namespace rirflow {

/// Distance from an interior point to the box boundary along a direction:
/// the smallest positive exit time across the three axis slabs.
inline double ray_box_depth(const Vec3& origin, const Vec3& dir, const Vec3& dims) {
  double t = std::numeric_limits<double>::infinity();
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double L[3] = {dims.x, dims.y, dims.z};
  for (int a = 0; a < 3; ++a) {
    if (d[a] > 0.0)
      t = std::min(t, (L[a] - o[a]) / d[a]);
    else if (d[a] < 0.0)
      t = std::min(t, -o[a] / d[a]);
  }
  return t;
}

/// Equirectangular depth panorama rendered analytically from inside a shoebox.
inline PanoDepth render_pano_depth(const ShoeboxRoom& room, const Pose& rcv, long H, long W) {
  room.validate();
  if (H <= 0 || W <= 0) throw std::invalid_argument("render_pano_depth: bad resolution");
  if (!room.strictly_inside(rcv.position))
    throw std::invalid_argument("render_pano_depth: receiver must be strictly inside the room");
  PanoDepth out;
  out.depths = Tensor::zeros({H, W});
  for (long v = 0; v < H; ++v)
    for (long u = 0; u < W; ++u)
      out.depths.at2(v, u) = ray_box_depth(rcv.position, equirect_direction(v, u, H, W), room.dims);
  return out;
}

}  // namespace rirflow
