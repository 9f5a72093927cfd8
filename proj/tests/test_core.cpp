// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "rirflow/core/checksum.hpp"
#include "rirflow/core/fft.hpp"
#include "rirflow/core/io.hpp"
#include "rirflow/core/rng.hpp"
#include "rirflow/core/tensor.hpp"

using namespace rirflow;
using Catch::Approx;

namespace {
std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("Tensor basics", "[core]") {
  Tensor t = Tensor::zeros({2, 3});
  REQUIRE(t.count() == 6);
  t.at2(1, 2) = 5.0;
  REQUIRE(t.data[5] == 5.0);
  REQUIRE(t.all_finite());
  t.data[0] = std::nan("");
  REQUIRE_FALSE(t.all_finite());
  REQUIRE(Tensor::full({2, 2}, 3.0).data[3] == 3.0);
}

TEST_CASE("Rng is deterministic and seeded substreams are independent", "[core]") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(a.uniform() == b.uniform());
    REQUIRE(a.normal() == b.normal());
  }

  Rng s1 = Rng::substream(7, "vae");
  Rng s2 = Rng::substream(7, "flow");
  Rng s1b = Rng::substream(7, "vae");
  bool all_equal = true;
  for (int i = 0; i < 32; ++i) {
    double x = s1.uniform(), y = s2.uniform();
    REQUIRE(s1b.uniform() == x);
    all_equal = all_equal && (x == y);
  }
  REQUIRE_FALSE(all_equal);
}

TEST_CASE("Rng moments are sane", "[core]") {
  Rng rng(9);
  const int n = 200000;
  double mu = 0.0, mu2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    mu += x;
    mu2 += x * x;
  }
  mu /= n;
  mu2 /= n;
  REQUIRE(std::abs(mu) < 0.01);
  REQUIRE(mu2 == Approx(1.0).margin(0.02));

  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  REQUIRE(lo >= 0.0);
  REQUIRE(hi < 1.0);
}

TEST_CASE("uniform_int covers range without bias artifacts", "[core]") {
  Rng rng(4);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) hist[rng.uniform_int(7)]++;
  for (int h : hist) REQUIRE(std::abs(h - 10000) < 500);
}

TEST_CASE("fft_pow2 matches a naive DFT", "[core]") {
  Rng rng(11);
  const int n = 64;
  std::vector<std::complex<double>> x(n);
  for (auto& v : x) v = {rng.normal(), rng.normal()};
  std::vector<std::complex<double>> ref(n);
  for (int k = 0; k < n; ++k) {
    std::complex<double> s = 0.0;
    for (int t = 0; t < n; ++t) {
      double ang = -2.0 * std::numbers::pi * k * t / n;
      s += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    ref[k] = s;
  }
  std::vector<std::complex<double>> y = x;
  fft_pow2(y, false);
  for (int k = 0; k < n; ++k) REQUIRE(std::abs(y[k] - ref[k]) < 1e-9);

  fft_pow2(y, true);  // round trip
  for (int k = 0; k < n; ++k) REQUIRE(std::abs(y[k] - x[k]) < 1e-9);
}

TEST_CASE("fft_bandpass keeps in-band tones and kills out-of-band tones", "[core]") {
  const int sr = 8000, n = 4096;
  std::vector<double> in_band(n), out_band(n);
  for (int i = 0; i < n; ++i) {
    in_band[i] = std::sin(2.0 * std::numbers::pi * 500.0 * i / sr);
    out_band[i] = std::sin(2.0 * std::numbers::pi * 2000.0 * i / sr);
  }
  auto kept = fft_bandpass(in_band, sr, 353.6, 707.1);
  auto killed = fft_bandpass(out_band, sr, 353.6, 707.1);
  double e_kept = 0.0, e_killed = 0.0, e_in = 0.0;
  for (int i = 0; i < n; ++i) {
    e_kept += kept[i] * kept[i];
    e_killed += killed[i] * killed[i];
    e_in += in_band[i] * in_band[i];
  }
  REQUIRE(e_kept == Approx(e_in).epsilon(1e-6));
  REQUIRE(e_killed < 1e-9 * e_in);
}

TEST_CASE("crc32 known vector", "[core]") {
  // Standard CRC-32 of "123456789".
  const char* s = "123456789";
  REQUIRE(crc32(reinterpret_cast<const unsigned char*>(s), 9) == 0xCBF43926u);
  REQUIRE(crc32(nullptr, 0) == 0u);
}

TEST_CASE("wav round trip preserves samples", "[core]") {
  Rng rng(3);
  std::vector<double> x(777);
  for (auto& v : x) v = 0.9 * (2.0 * rng.uniform() - 1.0);

  const std::string p32 = temp_path("rirflow_t_f32.wav");
  write_wav(p32, x, 8000, WavFormat::float32);
  WavData back = read_wav(p32);
  REQUIRE(back.sample_rate == 8000);
  REQUIRE(back.samples.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i)
    REQUIRE(back.samples[i] == Approx(x[i]).margin(1e-7));

  const std::string p16 = temp_path("rirflow_t_pcm16.wav");
  write_wav(p16, x, 16000, WavFormat::pcm16);
  WavData back16 = read_wav(p16);
  REQUIRE(back16.sample_rate == 16000);
  for (size_t i = 0; i < x.size(); ++i)
    REQUIRE(back16.samples[i] == Approx(x[i]).margin(1.0 / 32767.0));
  std::remove(p32.c_str());
  std::remove(p16.c_str());
}

TEST_CASE("f32 raw round trip with sidecar rate", "[core]") {
  std::vector<double> x = {0.5, -0.25, 1.0, -1.0, 0.0};
  const std::string p = temp_path("rirflow_t_raw.f32");
  write_f32_raw(p, x);
  write_f32_sidecar(p, 8000, static_cast<long>(x.size()));
  auto back = read_f32_raw(p);
  REQUIRE(back.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i) REQUIRE(back[i] == Approx(x[i]).margin(1e-7));
  REQUIRE(read_f32_sidecar_rate(p) == 8000);
  std::remove(p.c_str());
  std::remove((p + ".meta").c_str());
}

TEST_CASE("little-endian packing round trips", "[core]") {
  std::vector<uint8_t> buf;
  put_u32(buf, 0xDEADBEEFu);
  put_u16(buf, 0x1234u);
  put_f32(buf, -2.5f);
  REQUIRE(buf.size() == 10);
  REQUIRE(get_u32(buf.data()) == 0xDEADBEEFu);
  REQUIRE(get_u16(buf.data() + 4) == 0x1234u);
  REQUIRE(get_f32(buf.data() + 6) == -2.5f);
  REQUIRE(buf[0] == 0xEF);  // little endian
}
