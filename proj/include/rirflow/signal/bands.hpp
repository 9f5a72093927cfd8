// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rirflow/core/fft.hpp"
#include "rirflow/signal/metrics.hpp"
#include "rirflow/signal/waveform.hpp"

namespace rirflow {

inline std::vector<double> default_octave_centers() { return {125, 250, 500, 1000, 2000}; }

/// Per-band energy envelope statistics across a set of generated samples.
/// Bands are one octave wide around each centre (brick-wall FFT filter).
struct BandEnvelopeStats {
  std::vector<double> centers_hz;
  int frame = 32;
  int hop = 16;
  int sample_rate = 0;
  // Indexed [band][envelope frame]; dB statistics across the sample set.
  std::vector<std::vector<double>> mean_db;
  std::vector<std::vector<double>> std_db;
};

inline std::vector<double> band_filter(const std::vector<double>& x, int sample_rate,
                                       double center_hz) {
  return fft_bandpass(x, sample_rate, center_hz / std::sqrt(2.0), center_hz * std::sqrt(2.0));
}

inline BandEnvelopeStats octave_band_stats(const std::vector<RirWaveform>& samples,
                                           const std::vector<double>& centers_hz,
                                           int frame = 32, int hop = 16) {
  if (samples.size() < 2) throw std::invalid_argument("need at least two samples");
  const int sr = samples[0].sample_rate;
  const long n = samples[0].length();
  for (const auto& s : samples) check_comparable(s, samples[0]);
  for (double c : centers_hz)
    if (c * std::sqrt(2.0) > sr / 2.0)
      throw std::invalid_argument("band edge above Nyquist");

  BandEnvelopeStats out;
  out.centers_hz = centers_hz;
  out.frame = frame;
  out.hop = hop;
  out.sample_rate = sr;
  const long T = 1 + (n - frame + hop - 1) / hop;
  if (n < frame) throw std::invalid_argument("input too short");

  for (double c : centers_hz) {
    // envelope in dB for each sample, then moments across samples
    std::vector<std::vector<double>> env_db(samples.size());
    for (size_t s = 0; s < samples.size(); ++s) {
      const std::vector<double> band = band_filter(samples[s].samples, sr, c);
      env_db[s].resize(T);
      for (long t = 0; t < T; ++t) {
        double e = 0.0;
        for (int i = 0; i < frame; ++i) {
          const long j = t * hop + i;
          if (j < n) e += band[j] * band[j];
        }
        env_db[s][t] = 10.0 * std::log10(e + 1e-12);
      }
    }
    std::vector<double> mean(T, 0.0), sd(T, 0.0);
    for (long t = 0; t < T; ++t) {
      double m = 0.0;
      for (const auto& e : env_db) m += e[t];
      m /= samples.size();
      mean[t] = m;
      double v = 0.0;
      for (const auto& e : env_db) v += (e[t] - m) * (e[t] - m);
      sd[t] = std::sqrt(v / (samples.size() - 1));
    }
    out.mean_db.push_back(std::move(mean));
    out.std_db.push_back(std::move(sd));
  }
  return out;
}

/// Linear-interpolation quantile of a sample (same convention as numpy's
/// default).  q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("empty sample");
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * q;
  const size_t lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

/// Time (seconds) of the last index at which the trace exceeds its own 75th
/// percentile; 0 when it never does (e.g. a constant trace).
inline double persistence_time_seconds(const std::vector<double>& trace, int sample_rate) {
  const double thr = quantile(trace, 0.75);
  long last = -1;
  for (long i = 0; i < static_cast<long>(trace.size()); ++i)
    if (trace[i] > thr) last = i;
  return last < 0 ? 0.0 : static_cast<double>(last) / sample_rate;
}

/// How long disagreement between generated samples persists, per band: the
/// across-sample variance of the band-filtered signals forms a time trace,
/// and we report the persistence time of that trace.
inline std::vector<double> uncertainty_persistence_seconds(
    const std::vector<RirWaveform>& samples, const std::vector<double>& centers_hz) {
  if (samples.size() < 2) throw std::invalid_argument("need at least two samples");
  const int sr = samples[0].sample_rate;
  const long n = samples[0].length();
  for (const auto& s : samples) check_comparable(s, samples[0]);

  std::vector<double> out;
  for (double c : centers_hz) {
    std::vector<std::vector<double>> bands(samples.size());
    for (size_t s = 0; s < samples.size(); ++s)
      bands[s] = band_filter(samples[s].samples, sr, c);
    std::vector<double> var(n, 0.0);
    for (long i = 0; i < n; ++i) {
      double m = 0.0;
      for (const auto& b : bands) m += b[i];
      m /= bands.size();
      double v = 0.0;
      for (const auto& b : bands) v += (b[i] - m) * (b[i] - m);
      var[i] = v / (bands.size() - 1);
    }
    out.push_back(persistence_time_seconds(var, sr));
  }
  return out;
}

}  // namespace rirflow
