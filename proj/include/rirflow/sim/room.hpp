// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <stdexcept>

#include "rirflow/core/vec3.hpp"

namespace rirflow {

struct Pose {
  Vec3 position;
};

/// Axis-aligned shoebox room with one corner at the origin.  Walls are indexed
/// 0:x=0, 1:x=Lx, 2:y=0, 3:y=Ly, 4:z=0 (floor), 5:z=Lz (ceiling).
struct ShoeboxRoom {
  Vec3 dims{4.0, 5.0, 3.0};
  std::array<double, 6> wall_absorption{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
  double speed_of_sound = 343.0;

  void validate() const {
    if (!(dims.x > 0 && dims.y > 0 && dims.z > 0))
      throw std::invalid_argument("ShoeboxRoom: dims must be positive");
    for (double a : wall_absorption)
      if (!(a >= 0.0 && a <= 1.0))
        throw std::invalid_argument("ShoeboxRoom: absorption outside [0,1]");
    if (!(speed_of_sound > 0)) throw std::invalid_argument("ShoeboxRoom: bad speed of sound");
  }

  bool strictly_inside(const Vec3& p, double clearance = 0.0) const {
    return p.x > clearance && p.x < dims.x - clearance && p.y > clearance &&
           p.y < dims.y - clearance && p.z > clearance && p.z < dims.z - clearance;
  }
};

}  // namespace rirflow
