// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/core/io.hpp"

namespace rirflow {

/// Mono impulse response at a fixed sample rate.
struct RirWaveform {
  std::vector<double> samples;
  int sample_rate = 0;

  RirWaveform() = default;
  RirWaveform(std::vector<double> s, int sr) : samples(std::move(s)), sample_rate(sr) {}

  long length() const { return static_cast<long>(samples.size()); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }

  double energy() const {
    double e = 0.0;
    for (double s : samples) e += s * s;
    return e;
  }

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("RirWaveform: empty");
    if (sample_rate <= 0) throw std::invalid_argument("RirWaveform: sample_rate must be positive");
    for (double s : samples)
      if (!std::isfinite(s)) throw std::invalid_argument("RirWaveform: non-finite sample");
  }
};

inline RirWaveform load_rir_wav(const std::string& path) {
  WavData w = read_wav(path);
  return RirWaveform(std::move(w.samples), w.sample_rate);
}

inline void save_rir_wav(const std::string& path, const RirWaveform& rir,
                         WavFormat fmt = WavFormat::float32) {
  write_wav(path, rir.samples, rir.sample_rate, fmt);
}

inline RirWaveform load_rir_f32(const std::string& path) {
  return RirWaveform(read_f32_raw(path), read_f32_sidecar_rate(path));
}

inline void save_rir_f32(const std::string& path, const RirWaveform& rir) {
  write_f32_raw(path, rir.samples);
  write_f32_sidecar(path, rir.sample_rate, rir.length());
}

}  // namespace rirflow
