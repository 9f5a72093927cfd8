// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>

#include "rirflow/sim/room.hpp"
#include "rirflow/signal/waveform.hpp"

namespace rirflow {

namespace detail {

/// Mirror-source coordinate for unfolded cell index m along one axis: even
/// cells keep the source orientation, odd cells flip it.
inline double mirror_coord(double s, double len, long m) {
  return (m % 2 == 0) ? m * len + s : m * len + (len - s);
}

/// Reflections off the low/high wall of one axis for unfolded cell index m.
/// A path into cell m crosses |m| wall images, alternating starting with the
/// high wall for m > 0 and the low wall for m < 0.
inline void wall_counts(long m, long& lo, long& hi) {
  const long a = std::labs(m);
  if (m >= 0) {
    hi = (a + 1) / 2;
    lo = a / 2;
  } else {
    lo = (a + 1) / 2;
    hi = a / 2;
  }
}

}  // namespace detail

/// Image-source impulse response of a shoebox room: each mirror source up to
/// the given reflection order contributes an impulse at delay d/c with
/// amplitude (product of wall reflection factors) / d.  Reflection factor per
/// bounce is sqrt(1 - absorption); fractional delays use 2-tap linear
/// interpolation.
inline RirWaveform image_source_rir(const ShoeboxRoom& room, const Pose& src, const Pose& rcv,
                                    int max_order, int sample_rate, long length) {
  room.validate();
  if (max_order < 0) throw std::invalid_argument("image_source_rir: max_order must be >= 0");
  if (sample_rate <= 0 || length <= 0)
    throw std::invalid_argument("image_source_rir: bad output size");
  if (distance(src.position, rcv.position) == 0.0)
    throw std::invalid_argument("coincident sensors");

  // Per-wall reflection-factor powers, tabulated up to the maximum bounce
  // count so the inner loop is multiply-and-lookup only.
  const long M = max_order;
  std::array<std::vector<double>, 6> beta_pow;
  for (int w = 0; w < 6; ++w) {
    const double b = std::sqrt(1.0 - room.wall_absorption[w]);
    beta_pow[w].resize(M + 2);
    beta_pow[w][0] = 1.0;
    for (long k = 1; k <= M + 1; ++k) beta_pow[w][k] = beta_pow[w][k - 1] * b;
  }

  std::vector<double> h(static_cast<size_t>(length), 0.0);
  for (long mx = -M; mx <= M; ++mx) {
    for (long my = -M + std::labs(mx); my <= M - std::labs(mx); ++my) {
      const long rem = M - std::labs(mx) - std::labs(my);
      for (long mz = -rem; mz <= rem; ++mz) {
        const Vec3 img{detail::mirror_coord(src.position.x, room.dims.x, mx),
                       detail::mirror_coord(src.position.y, room.dims.y, my),
                       detail::mirror_coord(src.position.z, room.dims.z, mz)};
        const double d = distance(img, rcv.position);
        long lo, hi;
        detail::wall_counts(mx, lo, hi);
        double amp = beta_pow[0][lo] * beta_pow[1][hi];
        detail::wall_counts(my, lo, hi);
        amp *= beta_pow[2][lo] * beta_pow[3][hi];
        detail::wall_counts(mz, lo, hi);
        amp *= beta_pow[4][lo] * beta_pow[5][hi];
        if (amp == 0.0) continue;
        amp /= d;

        const double delay = d / room.speed_of_sound * sample_rate;
        const long i0 = static_cast<long>(std::floor(delay));
        const double frac = delay - i0;
        if (i0 >= 0 && i0 < length) h[i0] += amp * (1.0 - frac);
        if (i0 + 1 >= 0 && i0 + 1 < length) h[i0 + 1] += amp * frac;
      }
    }
  }
  return RirWaveform(std::move(h), sample_rate);
}

}  // namespace rirflow
