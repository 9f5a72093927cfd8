// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/signal/stft.hpp"
#include "rirflow/signal/waveform.hpp"

namespace rirflow {

/// Schroeder backward-integrated energy decay curve in dB, normalized so the
/// first sample is 0 dB and floored at -120 dB.
struct EnergyDecayCurve {
  std::vector<double> values_db;
  int sample_rate = 0;
};

inline EnergyDecayCurve schroeder_edc(const RirWaveform& rir) {
  rir.validate();
  const long n = rir.length();
  std::vector<double> tail(n);
  double acc = 0.0;
  for (long i = n - 1; i >= 0; --i) {
    acc += rir.samples[i] * rir.samples[i];
    tail[i] = acc;
  }
  if (tail[0] <= 0.0) throw std::invalid_argument("silent RIR");
  EnergyDecayCurve edc;
  edc.sample_rate = rir.sample_rate;
  edc.values_db.resize(n);
  for (long i = 0; i < n; ++i) {
    const double r = tail[i] / tail[0];
    edc.values_db[i] = r > 0.0 ? std::max(10.0 * std::log10(r), -120.0) : -120.0;
  }
  return edc;
}

enum class T60Fit { t20, t30 };

/// Reverberation time in seconds from a least-squares line over the EDC
/// between -5 dB and -25 dB (T20) or -35 dB (T30), extrapolated to 60 dB.
inline double t60_seconds(const RirWaveform& rir, T60Fit fit = T60Fit::t20) {
  const EnergyDecayCurve edc = schroeder_edc(rir);
  const double lo = fit == T60Fit::t20 ? -25.0 : -35.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  long count = 0;
  for (long i = 0; i < static_cast<long>(edc.values_db.size()); ++i) {
    const double db = edc.values_db[i];
    if (db > -5.0 || db < lo) continue;
    const double t = static_cast<double>(i) / edc.sample_rate;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++count;
  }
  if (count < 2) throw std::runtime_error("insufficient decay");
  const double denom = count * sxx - sx * sx;
  if (denom <= 0.0) throw std::runtime_error("insufficient decay");
  const double slope = (count * sxy - sx * sy) / denom;
  if (slope >= 0.0) throw std::runtime_error("insufficient decay");
  return 60.0 / -slope;
}

/// Clarity index: ratio of energy in the first 50 ms to the remainder, in dB.
/// The sample landing exactly at 50 ms counts as early.
inline double c50_db(const RirWaveform& rir) {
  rir.validate();
  const long split = static_cast<long>(std::floor(0.05 * rir.sample_rate + 1e-9));
  if (rir.length() <= split + 1) throw std::invalid_argument("input too short");
  double early = 0.0, late = 0.0;
  for (long i = 0; i < rir.length(); ++i) {
    const double e = rir.samples[i] * rir.samples[i];
    (i <= split ? early : late) += e;
  }
  if (late <= 0.0) throw std::runtime_error("no late energy");
  if (early <= 0.0) throw std::runtime_error("silent RIR");
  return 10.0 * std::log10(early / late);
}

/// Early decay time: time for the EDC to first fall to -5 dB, with linear
/// interpolation between samples.  Reported in milliseconds, not scaled to a
/// 60 dB equivalent.
inline double edt_ms(const RirWaveform& rir) {
  const EnergyDecayCurve edc = schroeder_edc(rir);
  const auto& v = edc.values_db;
  for (long i = 0; i < static_cast<long>(v.size()); ++i) {
    if (v[i] > -5.0) continue;
    double t = static_cast<double>(i);
    if (i > 0 && v[i - 1] > v[i])
      t = (i - 1) + (v[i - 1] - (-5.0)) / (v[i - 1] - v[i]);
    return 1000.0 * t / edc.sample_rate;
  }
  throw std::runtime_error("insufficient decay");
}

struct MetricErrors {
  double t60_rel_pct = 0.0;  // 100 * |pred - gt| / gt
  double c50_abs_db = 0.0;
  double edt_abs_ms = 0.0;
};

inline MetricErrors metric_errors(const RirWaveform& pred, const RirWaveform& gt,
                                  T60Fit fit = T60Fit::t20) {
  MetricErrors e;
  const double t_gt = t60_seconds(gt, fit);
  const double t_pr = t60_seconds(pred, fit);
  e.t60_rel_pct = 100.0 * std::abs(t_pr - t_gt) / t_gt;
  e.c50_abs_db = std::abs(c50_db(pred) - c50_db(gt));
  e.edt_abs_ms = std::abs(edt_ms(pred) - edt_ms(gt));
  return e;
}

inline void check_comparable(const RirWaveform& a, const RirWaveform& b) {
  if (a.length() != b.length() || a.sample_rate != b.sample_rate)
    throw std::invalid_argument("shape mismatch");
}

/// Multi-resolution log-magnitude spectrogram distance.
inline double mag_distance(const RirWaveform& a, const RirWaveform& b,
                           const std::vector<int>& resolutions = {512, 256, 128},
                           double eps = 1e-7) {
  check_comparable(a, b);
  double total = 0.0;
  for (int n : resolutions) {
    StftParams p;
    p.fft_size = n;
    p.win_length = n;
    p.hop_length = n / 4;
    p.window = Window::hann;
    const Spectrogram sa = stft_magnitude(a.samples, p);
    const Spectrogram sb = stft_magnitude(b.samples, p);
    double acc = 0.0;
    for (long i = 0; i < sa.magnitudes.count(); ++i)
      acc += std::abs(std::log(sa.magnitudes.data[i] + eps) -
                      std::log(sb.magnitudes.data[i] + eps));
    total += acc / sa.magnitudes.count();
  }
  return total / resolutions.size();
}

/// Log-energy envelope over short frames.
inline std::vector<double> log_energy_envelope(const std::vector<double>& x, int frame = 32,
                                               int hop = 16, double eps = 1e-7) {
  const long n = static_cast<long>(x.size());
  if (n < frame) throw std::invalid_argument("input too short");
  const long T = 1 + (n - frame + hop - 1) / hop;
  std::vector<double> env(T);
  for (long t = 0; t < T; ++t) {
    double e = 0.0;
    for (int i = 0; i < frame; ++i) {
      const long j = t * hop + i;
      if (j < n) e += x[j] * x[j];
    }
    env[t] = std::log(e + eps);
  }
  return env;
}

/// Mean absolute difference between log-energy envelopes.
inline double env_distance(const RirWaveform& a, const RirWaveform& b, int frame = 32,
                           int hop = 16) {
  check_comparable(a, b);
  const std::vector<double> ea = log_energy_envelope(a.samples, frame, hop);
  const std::vector<double> eb = log_energy_envelope(b.samples, frame, hop);
  double acc = 0.0;
  for (size_t i = 0; i < ea.size(); ++i) acc += std::abs(ea[i] - eb[i]);
  return acc / ea.size();
}

}  // namespace rirflow
