// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace rirflow {

/// In-place iterative radix-2 FFT. n must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft_pow2: length must be a power of two");
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Brick-wall band-pass on a real signal: zero all FFT bins whose frequency
/// falls outside [f_lo, f_hi] Hz, then invert. Signal is zero-padded to the
/// next power of two internally.
inline std::vector<double> fft_bandpass(const std::vector<double>& x, double sample_rate,
                                        double f_lo, double f_hi) {
  const size_t n = x.size();
  const size_t m = next_pow2(n);
  std::vector<std::complex<double>> buf(m, {0.0, 0.0});
  for (size_t i = 0; i < n; ++i) buf[i] = {x[i], 0.0};
  fft_pow2(buf, false);
  for (size_t k = 0; k < m; ++k) {
    // frequency of bin k (two-sided)
    const double f = (k <= m / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(m)) *
                     sample_rate / static_cast<double>(m);
    const double fa = std::abs(f);
    if (fa < f_lo || fa > f_hi) buf[k] = {0.0, 0.0};
  }
  fft_pow2(buf, true);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace rirflow
