// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "rirflow/core/fft.hpp"
#include "rirflow/core/rng.hpp"
#include "rirflow/signal/waveform.hpp"

namespace rirflow {

struct AugmentParams {
  int max_shift = 10;       // uniform shift in [0, max_shift] samples
  double snr_db_lo = 40.0;  // additive pink noise SNR range
  double snr_db_hi = 60.0;
  bool add_noise = true;
};

/// Unit-ish pink noise: frequency-domain synthesis with 1/sqrt(k) magnitudes
/// and Gaussian phases, so energy per octave is approximately constant.
inline std::vector<double> pink_noise(long n, Rng& rng) {
  const long N = next_pow2(n);
  std::vector<std::complex<double>> spec(N, 0.0);
  for (long k = 1; k <= N / 2; ++k) {
    const double a = 1.0 / std::sqrt(static_cast<double>(k));
    const std::complex<double> g{rng.normal(), rng.normal()};
    spec[k] = a * g;
    if (k < N / 2) spec[N - k] = std::conj(spec[k]);
    else spec[k] = {spec[k].real(), 0.0};  // Nyquist bin must be real
  }
  fft_pow2(spec, true);
  std::vector<double> out(n);
  for (long i = 0; i < n; ++i) out[i] = spec[i].real();
  return out;
}

/// Random time shift (zero-padded, no wraparound) followed by additive pink
/// noise at a uniformly drawn SNR.
inline RirWaveform augment(const RirWaveform& rir, Rng& rng,
                           const AugmentParams& params = {}) {
  const long n = rir.length();
  const int shift = params.max_shift > 0 ? rng.uniform_int(params.max_shift + 1) : 0;
  std::vector<double> out(n, 0.0);
  for (long i = shift; i < n; ++i) out[i] = rir.samples[i - shift];

  if (params.add_noise) {
    const double snr_db = params.snr_db_lo + (params.snr_db_hi - params.snr_db_lo) * rng.uniform();
    double sig_e = 0.0;
    for (double v : out) sig_e += v * v;
    if (sig_e > 0.0) {
      std::vector<double> noise = pink_noise(n, rng);
      double noise_e = 0.0;
      for (double v : noise) noise_e += v * v;
      const double target_e = sig_e * std::pow(10.0, -snr_db / 10.0);
      const double scale = std::sqrt(target_e / noise_e);
      for (long i = 0; i < n; ++i) out[i] += scale * noise[i];
    }
  }
  return RirWaveform(std::move(out), rir.sample_rate);
}

}  // namespace rirflow
