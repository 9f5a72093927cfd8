// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rirflow/core/rng.hpp"
#include "rirflow/signal/bands.hpp"
#include "rirflow/signal/metrics.hpp"
#include "rirflow/signal/stft.hpp"
#include "rirflow/signal/waveform.hpp"

using namespace rirflow;
using Catch::Approx;

namespace {

constexpr int kSr = 8000;

/// e^(-6.91 t / t60) envelope reaches -60 dB of amplitude at t = t60, which is
/// exactly the classical reverberation-time definition for the energy decay.
RirWaveform exp_envelope(double t60, double seconds = 1.0, double gain = 1.0) {
  std::vector<double> x(static_cast<size_t>(seconds * kSr));
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = gain * std::exp(-6.91 * (static_cast<double>(i) / kSr) / t60);
  return RirWaveform(std::move(x), kSr);
}

RirWaveform noise_modulated(double t60, Rng& rng, double seconds = 1.0) {
  RirWaveform w = exp_envelope(t60, seconds);
  for (auto& s : w.samples) s *= rng.normal();
  return w;
}

}  // namespace

TEST_CASE("stft_magnitude shapes and degenerate inputs", "[signal]") {
  StftParams p;
  p.fft_size = 64;
  p.win_length = 64;
  p.hop_length = 16;

  std::vector<double> zeros(256, 0.0);
  Spectrogram s = stft_magnitude(zeros, p);
  REQUIRE(s.bins() == 33);
  REQUIRE(s.frames() == 1 + (256 - 64 + 15) / 16);
  for (double m : s.magnitudes.data) REQUIRE(m == 0.0);

  // Impulse at sample 0 under a rectangular window: flat unit spectrum.
  p.window = Window::rectangular;
  std::vector<double> imp(64, 0.0);
  imp[0] = 1.0;
  Spectrogram si = stft_magnitude(imp, p);
  REQUIRE(si.frames() == 1);
  for (long k = 0; k < si.bins(); ++k) REQUIRE(si.magnitudes.at2(k, 0) == Approx(1.0));

  REQUIRE_THROWS_WITH(stft_magnitude(std::vector<double>(10, 0.0), p), "input too short");

  StftParams bad = p;
  bad.win_length = 128;
  REQUIRE_THROWS_AS(stft_magnitude(imp, bad), std::invalid_argument);
}

TEST_CASE("stft_magnitude satisfies Parseval for non-overlapping rectangular frames",
          "[signal]") {
  StftParams p;
  p.fft_size = 64;
  p.win_length = 64;
  p.hop_length = 64;
  p.window = Window::rectangular;

  Rng rng(21);
  std::vector<double> x(640);
  for (auto& v : x) v = rng.normal();

  Spectrogram s = stft_magnitude(x, p);
  double freq_energy = 0.0;
  for (long t = 0; t < s.frames(); ++t) {
    for (long k = 0; k < s.bins(); ++k) {
      const double m2 = s.magnitudes.at2(k, t) * s.magnitudes.at2(k, t);
      const bool shared = (k == 0 || k == s.bins() - 1);  // DC and Nyquist appear once
      freq_energy += (shared ? 1.0 : 2.0) * m2;
    }
  }
  freq_energy /= p.fft_size;
  double time_energy = 0.0;
  for (double v : x) time_energy += v * v;
  REQUIRE(freq_energy == Approx(time_energy).epsilon(1e-6));
}

TEST_CASE("complex stft carries magnitude in its two channels", "[signal]") {
  StftParams p;
  p.fft_size = 32;
  p.win_length = 32;
  p.hop_length = 8;
  Rng rng(5);
  std::vector<double> x(128);
  for (auto& v : x) v = rng.normal();
  Tensor c = stft_complex(x, p);
  Spectrogram m = stft_magnitude(x, p);
  REQUIRE(c.shape[0] == 2);
  REQUIRE(c.shape[1] == m.bins());
  REQUIRE(c.shape[2] == m.frames());
  for (long k = 0; k < m.bins(); ++k)
    for (long t = 0; t < m.frames(); ++t)
      REQUIRE(std::hypot(c.at3(0, k, t), c.at3(1, k, t)) == Approx(m.magnitudes.at2(k, t)));
}

TEST_CASE("schroeder_edc basics", "[signal]") {
  std::vector<double> imp(8, 0.0);
  imp[0] = 1.0;
  EnergyDecayCurve e = schroeder_edc(RirWaveform(imp, kSr));
  REQUIRE(e.values_db[0] == 0.0);
  for (size_t i = 1; i < e.values_db.size(); ++i) REQUIRE(e.values_db[i] == -120.0);

  // Exponential with T60 = 0.5 s decays at -120 dB/s.
  EnergyDecayCurve ee = schroeder_edc(exp_envelope(0.5));
  REQUIRE(ee.values_db[0] == 0.0);
  REQUIRE(ee.values_db[kSr / 4] == Approx(-30.0).epsilon(0.01));
  for (size_t i = 1; i < ee.values_db.size(); ++i)
    REQUIRE(ee.values_db[i] <= ee.values_db[i - 1] + 1e-12);

  EnergyDecayCurve scaled = schroeder_edc(exp_envelope(0.5, 1.0, 3.7));
  for (size_t i = 0; i < ee.values_db.size(); ++i)
    REQUIRE(scaled.values_db[i] == Approx(ee.values_db[i]).margin(1e-9));

  REQUIRE_THROWS_WITH(schroeder_edc(RirWaveform(std::vector<double>(16, 0.0), kSr)),
                      "silent RIR");
}

TEST_CASE("t60 recovers the envelope's decay time", "[signal]") {
  REQUIRE(t60_seconds(exp_envelope(0.5), T60Fit::t20) == Approx(0.5).epsilon(0.01));
  REQUIRE(t60_seconds(exp_envelope(0.5), T60Fit::t30) == Approx(0.5).epsilon(0.01));
  REQUIRE(t60_seconds(exp_envelope(0.25), T60Fit::t20) == Approx(0.25).epsilon(0.01));

  // Noise-modulated envelope: individual estimates are noisy, the mean is not.
  Rng rng(77);
  double mean = 0.0;
  const int trials = 100;
  for (int i = 0; i < trials; ++i) mean += t60_seconds(noise_modulated(0.5, rng));
  mean /= trials;
  REQUIRE(mean == Approx(0.5).epsilon(0.05));

  const double base = t60_seconds(exp_envelope(0.5));
  REQUIRE(t60_seconds(exp_envelope(0.5, 1.0, 0.01)) == Approx(base).epsilon(1e-9));

  std::vector<double> imp(100, 0.0);
  imp[0] = 1.0;
  REQUIRE_THROWS_WITH(t60_seconds(RirWaveform(imp, kSr)), "insufficient decay");
}

TEST_CASE("c50 early/late split", "[signal]") {
  // 50 ms at 8 kHz = sample 400; that sample itself counts as early.
  std::vector<double> x(1000, 0.0);
  x[0] = 3.0;    // early energy 9
  x[500] = 1.0;  // late energy 1
  REQUIRE(c50_db(RirWaveform(x, kSr)) == Approx(10.0 * std::log10(9.0)).margin(1e-12));

  std::vector<double> eq(1000, 0.0);
  eq[400] = 1.0;  // boundary sample is early
  eq[500] = 1.0;
  REQUIRE(c50_db(RirWaveform(eq, kSr)) == Approx(0.0).margin(1e-12));

  for (auto& v : eq) v *= 12.5;
  REQUIRE(c50_db(RirWaveform(eq, kSr)) == Approx(0.0).margin(1e-12));

  std::vector<double> early_only(1000, 0.0);
  early_only[0] = 1.0;
  REQUIRE_THROWS_WITH(c50_db(RirWaveform(early_only, kSr)), "no late energy");
  REQUIRE_THROWS_WITH(c50_db(RirWaveform(std::vector<double>(100, 1.0), kSr)),
                      "input too short");
}

TEST_CASE("edt measures the initial 5 dB drop", "[signal]") {
  // -5 dB on a -120 dB/s curve: 41.67 ms.
  REQUIRE(edt_ms(exp_envelope(0.5)) == Approx(1000.0 * 5.0 / 120.0).epsilon(0.01));

  std::vector<double> imp(64, 0.0);
  imp[0] = 1.0;
  REQUIRE(edt_ms(RirWaveform(imp, kSr)) == Approx(0.0).margin(0.01));

  REQUIRE(edt_ms(exp_envelope(0.5, 1.0, 250.0)) == Approx(edt_ms(exp_envelope(0.5))));

  // Energy concentrated at the end: the EDC stays near 0 dB throughout.
  std::vector<double> rising(100, 1e-6);
  rising.back() = 1.0;
  REQUIRE_THROWS_WITH(edt_ms(RirWaveform(rising, kSr)), "insufficient decay");
}

TEST_CASE("metric_errors aggregates the three perceptual errors", "[signal]") {
  RirWaveform gt = exp_envelope(0.5);
  MetricErrors self = metric_errors(gt, gt);
  REQUIRE(self.t60_rel_pct == 0.0);
  REQUIRE(self.c50_abs_db == 0.0);
  REQUIRE(self.edt_abs_ms == 0.0);

  MetricErrors e = metric_errors(exp_envelope(0.6), gt);
  REQUIRE(e.t60_rel_pct == Approx(20.0).margin(0.7));

  // C50 arithmetic on constructed energies: pred 3 dB, gt 1 dB.
  std::vector<double> a(1000, 0.0), b(1000, 0.0);
  a[0] = std::sqrt(std::pow(10.0, 0.3));  // early/late = 10^0.3 -> 3 dB
  a[500] = 1.0;
  b[0] = std::sqrt(std::pow(10.0, 0.1));
  b[500] = 1.0;
  REQUIRE(c50_db(RirWaveform(a, kSr)) - c50_db(RirWaveform(b, kSr)) ==
          Approx(2.0).margin(1e-9));
}

TEST_CASE("mag_distance properties", "[signal]") {
  Rng rng(8);
  std::vector<double> x(2048);
  for (auto& v : x) v = 0.1 * rng.normal();
  RirWaveform a(x, kSr);
  REQUIRE(mag_distance(a, a) == 0.0);

  RirWaveform silent(std::vector<double>(2048, 0.0), kSr);
  REQUIRE(mag_distance(silent, a) > 0.0);

  // Doubling one side moves each log-magnitude by at most log 2.
  std::vector<double> xd = x;
  for (auto& v : xd) v *= 2.0;
  RirWaveform a2(xd, kSr);
  std::vector<double> y(2048);
  for (auto& v : y) v = 0.1 * rng.normal();
  RirWaveform b(y, kSr);
  REQUIRE(mag_distance(a2, b) <= mag_distance(a, b) + std::log(2.0) + 1e-12);
  REQUIRE(mag_distance(a2, b) >= mag_distance(a, b) - std::log(2.0) - 1e-12);

  RirWaveform wrong(std::vector<double>(1024, 0.0), kSr);
  REQUIRE_THROWS_WITH(mag_distance(wrong, a), "shape mismatch");
}

TEST_CASE("env_distance uses 32/16 envelope frames", "[signal]") {
  REQUIRE(log_energy_envelope(std::vector<double>(2048, 0.5)).size() == 127);

  Rng rng(14);
  std::vector<double> x(2048);
  for (auto& v : x) v = rng.normal();
  RirWaveform a(x, kSr);
  REQUIRE(env_distance(a, a) == 0.0);

  // A uniform gain g shifts every log energy by exactly 2 log g.
  std::vector<double> xg = x;
  for (auto& v : xg) v *= 3.0;
  const double d = env_distance(RirWaveform(xg, kSr), a);
  REQUIRE(d == Approx(2.0 * std::log(3.0)).epsilon(1e-3));
}

TEST_CASE("octave_band_stats across a sample set", "[signal]") {
  Rng rng(31);
  std::vector<double> x(2048);
  for (auto& v : x) v = rng.normal();
  RirWaveform w(x, kSr);

  std::vector<RirWaveform> same = {w, w, w};
  BandEnvelopeStats s = octave_band_stats(same, {500.0, 1000.0});
  for (const auto& band : s.std_db)
    for (double v : band) REQUIRE(v == Approx(0.0).margin(1e-9));

  // Two copies differing by a pure gain: dB std is |20 log10 g| / sqrt(2) at
  // every envelope frame (two-sample unbiased std).
  const double g = 2.5;
  std::vector<double> xg = x;
  for (auto& v : xg) v *= g;
  BandEnvelopeStats s2 = octave_band_stats({w, RirWaveform(xg, kSr)}, {500.0, 1000.0});
  const double expect = 20.0 * std::log10(g) / std::sqrt(2.0);
  for (const auto& band : s2.std_db)
    for (double v : band) REQUIRE(v == Approx(expect).margin(1e-4));

  REQUIRE_THROWS_AS(octave_band_stats({w}, {500.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(octave_band_stats(same, {4000.0}), std::invalid_argument);
}

TEST_CASE("uncertainty persistence", "[signal]") {
  Rng rng(51);
  std::vector<double> x(2048);
  for (auto& v : x) v = rng.normal();
  RirWaveform w(x, kSr);
  std::vector<double> out = uncertainty_persistence_seconds({w, w}, {500.0, 1000.0});
  for (double v : out) REQUIRE(v == 0.0);

  // Analytic trace: v_i = e^(-i/20), 101 points.  The 75th percentile falls
  // exactly on the value at i = 25, so the last index above it is 24.
  std::vector<double> trace(101);
  for (int i = 0; i <= 100; ++i) trace[i] = std::exp(-i / 20.0);
  REQUIRE(persistence_time_seconds(trace, kSr) == Approx(24.0 / kSr));

  REQUIRE(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == Approx(2.5));
  REQUIRE_THROWS_AS(uncertainty_persistence_seconds({w}, {500.0}), std::invalid_argument);
}
