// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rirflow/core/tensor.hpp"

namespace rirflow {

enum class Window { rectangular, hann };

struct StftParams {
  int fft_size = 512;
  int win_length = 512;
  int hop_length = 128;
  Window window = Window::hann;

  void validate() const {
    if (fft_size <= 0 || win_length <= 0 || hop_length <= 0)
      throw std::invalid_argument("StftParams: sizes must be positive");
    if (win_length > fft_size)
      throw std::invalid_argument("StftParams: win_length exceeds fft_size");
    if (hop_length > win_length)
      throw std::invalid_argument("StftParams: hop_length exceeds win_length");
  }

  long bins() const { return fft_size / 2 + 1; }

  long frames(long num_samples) const {
    if (num_samples < win_length) throw std::invalid_argument("input too short");
    return 1 + (num_samples - win_length + hop_length - 1) / hop_length;
  }
};

inline std::vector<double> make_window(Window w, int win_length) {
  std::vector<double> out(win_length, 1.0);
  if (w == Window::hann) {
    // Periodic Hann, the analysis window used throughout.
    for (int n = 0; n < win_length; ++n)
      out[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / win_length);
  }
  return out;
}

/// Precomputed window and DFT basis for one STFT configuration.  The basis is
/// dense (bins x win_length) so non power-of-two fft sizes cost nothing extra;
/// the sizes used here are small enough that the direct product wins anyway.
struct StftBasis {
  StftParams params;
  std::vector<double> window;    // [win_length]
  std::vector<double> cos_mat;   // [bins * win_length], row k: cos(2*pi*k*n/fft)
  std::vector<double> sin_mat;   // [bins * win_length]

  explicit StftBasis(const StftParams& p) : params(p), window(make_window(p.window, p.win_length)) {
    params.validate();
    const long F = p.bins();
    cos_mat.resize(F * p.win_length);
    sin_mat.resize(F * p.win_length);
    for (long k = 0; k < F; ++k)
      for (int n = 0; n < p.win_length; ++n) {
        const double ang = 2.0 * std::numbers::pi * k * n / p.fft_size;
        cos_mat[k * p.win_length + n] = std::cos(ang);
        sin_mat[k * p.win_length + n] = std::sin(ang);
      }
  }

  /// One analysis frame starting at sample `start` (zero padded past the end).
  void frame(const std::vector<double>& x, long start, std::vector<double>& buf) const {
    buf.assign(params.win_length, 0.0);
    const long n = static_cast<long>(x.size());
    for (int i = 0; i < params.win_length; ++i) {
      const long j = start + i;
      if (j < n) buf[i] = x[j] * window[i];
    }
  }

  void transform(const std::vector<double>& windowed, std::vector<double>& re,
                 std::vector<double>& im) const {
    const long F = params.bins();
    const int W = params.win_length;
    re.assign(F, 0.0);
    im.assign(F, 0.0);
    for (long k = 0; k < F; ++k) {
      const double* c = &cos_mat[k * W];
      const double* s = &sin_mat[k * W];
      double sr = 0.0, si = 0.0;
      for (int n = 0; n < W; ++n) {
        sr += c[n] * windowed[n];
        si -= s[n] * windowed[n];
      }
      re[k] = sr;
      im[k] = si;
    }
  }
};

/// Magnitude spectrogram, bins x frames.
struct Spectrogram {
  Tensor magnitudes;  // [bins, frames]
  StftParams params;
  long bins() const { return magnitudes.shape[0]; }
  long frames() const { return magnitudes.shape[1]; }
};

inline Spectrogram stft_magnitude(const std::vector<double>& x, const StftParams& p) {
  p.validate();
  const long T = p.frames(static_cast<long>(x.size()));
  const StftBasis basis(p);
  const long F = p.bins();
  Spectrogram out;
  out.params = p;
  out.magnitudes = Tensor::zeros({F, T});
  std::vector<double> buf, re, im;
  for (long t = 0; t < T; ++t) {
    basis.frame(x, t * p.hop_length, buf);
    basis.transform(buf, re, im);
    for (long k = 0; k < F; ++k)
      out.magnitudes.at2(k, t) = std::hypot(re[k], im[k]);
  }
  return out;
}

/// Complex STFT as two stacked channels [2, bins, frames] (re, im).
inline Tensor stft_complex(const std::vector<double>& x, const StftParams& p) {
  p.validate();
  const long T = p.frames(static_cast<long>(x.size()));
  const StftBasis basis(p);
  const long F = p.bins();
  Tensor out = Tensor::zeros({2, F, T});
  std::vector<double> buf, re, im;
  for (long t = 0; t < T; ++t) {
    basis.frame(x, t * p.hop_length, buf);
    basis.transform(buf, re, im);
    for (long k = 0; k < F; ++k) {
      out.at3(0, k, t) = re[k];
      out.at3(1, k, t) = im[k];
    }
  }
  return out;
}

}  // namespace rirflow
