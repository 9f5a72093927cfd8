// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rirflow {

// ---------------------------------------------------------------------------
// Generic file helpers
// ---------------------------------------------------------------------------

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, const void* data, size_t len) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
  if (!out) throw std::runtime_error("short write: " + path);
}

inline void write_file_text(const std::string& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

// ---------------------------------------------------------------------------
// Little-endian scalar packing (wire formats are explicitly little-endian)
// ---------------------------------------------------------------------------

inline void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  buf.push_back(static_cast<uint8_t>(v & 0xFF));
  buf.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
  buf.push_back(static_cast<uint8_t>((v >> 16) & 0xFF));
  buf.push_back(static_cast<uint8_t>((v >> 24) & 0xFF));
}

inline void put_u16(std::vector<uint8_t>& buf, uint16_t v) {
  buf.push_back(static_cast<uint8_t>(v & 0xFF));
  buf.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
}

inline uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8));
}

inline void put_f32(std::vector<uint8_t>& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

inline float get_f32(const uint8_t* p) {
  const uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

// ---------------------------------------------------------------------------
// Mono WAV: 16-bit PCM and 32-bit IEEE float
// ---------------------------------------------------------------------------

enum class WavFormat { pcm16, float32 };

inline void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate,
                      WavFormat fmt = WavFormat::float32) {
  if (sample_rate <= 0) throw std::invalid_argument("write_wav: sample_rate must be positive");
  const uint16_t bits = fmt == WavFormat::pcm16 ? 16 : 32;
  const uint16_t block = static_cast<uint16_t>(bits / 8);
  const uint32_t data_len = static_cast<uint32_t>(samples.size() * block);
  std::vector<uint8_t> buf;
  buf.reserve(44 + data_len);
  auto tag = [&buf](const char* s) { buf.insert(buf.end(), s, s + 4); };
  tag("RIFF");
  put_u32(buf, 36 + data_len);
  tag("WAVE");
  tag("fmt ");
  put_u32(buf, 16);
  put_u16(buf, fmt == WavFormat::pcm16 ? 1 : 3);  // PCM / IEEE float
  put_u16(buf, 1);                                // mono
  put_u32(buf, static_cast<uint32_t>(sample_rate));
  put_u32(buf, static_cast<uint32_t>(sample_rate) * block);
  put_u16(buf, block);
  put_u16(buf, bits);
  tag("data");
  put_u32(buf, data_len);
  if (fmt == WavFormat::pcm16) {
    for (double s : samples) {
      double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
      const int v = static_cast<int>(std::lrint(c * 32767.0));
      put_u16(buf, static_cast<uint16_t>(static_cast<int16_t>(v)));
    }
  } else {
    for (double s : samples) put_f32(buf, static_cast<float>(s));
  }
  write_file_bytes(path, buf.data(), buf.size());
}

struct WavData {
  std::vector<double> samples;
  int sample_rate = 0;
};

inline WavData read_wav(const std::string& path) {
  const auto buf = read_file_bytes(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);
  size_t pos = 12;
  uint16_t fmt_code = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  WavData out;
  bool have_fmt = false, have_data = false;
  while (pos + 8 <= buf.size()) {
    char id[5] = {0};
    std::memcpy(id, buf.data() + pos, 4);
    const uint32_t len = get_u32(buf.data() + pos + 4);
    pos += 8;
    if (pos + len > buf.size()) throw std::runtime_error("truncated WAV chunk: " + path);
    if (std::strcmp(id, "fmt ") == 0) {
      if (len < 16) throw std::runtime_error("bad fmt chunk: " + path);
      fmt_code = get_u16(buf.data() + pos);
      channels = get_u16(buf.data() + pos + 2);
      sample_rate = get_u32(buf.data() + pos + 4);
      bits = get_u16(buf.data() + pos + 14);
      have_fmt = true;
    } else if (std::strcmp(id, "data") == 0) {
      if (!have_fmt) throw std::runtime_error("WAV data before fmt: " + path);
      if (channels != 1) throw std::runtime_error("only mono WAV supported: " + path);
      if (fmt_code == 1 && bits == 16) {
        const size_t n = len / 2;
        out.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
          const int16_t v = static_cast<int16_t>(get_u16(buf.data() + pos + 2 * i));
          out.samples[i] = static_cast<double>(v) / 32767.0;
        }
      } else if (fmt_code == 3 && bits == 32) {
        const size_t n = len / 4;
        out.samples.resize(n);
        for (size_t i = 0; i < n; ++i)
          out.samples[i] = static_cast<double>(get_f32(buf.data() + pos + 4 * i));
      } else {
        throw std::runtime_error("unsupported WAV encoding (need 16-bit PCM or 32-bit float): " + path);
      }
      have_data = true;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }
  if (!have_data) throw std::runtime_error("WAV has no data chunk: " + path);
  out.sample_rate = static_cast<int>(sample_rate);
  return out;
}

// ---------------------------------------------------------------------------
// Raw float32 little-endian sequences with a text sidecar for the sample rate
// ---------------------------------------------------------------------------

inline void write_f32_raw(const std::string& path, const std::vector<double>& values) {
  std::vector<uint8_t> buf;
  buf.reserve(values.size() * 4);
  for (double v : values) put_f32(buf, static_cast<float>(v));
  write_file_bytes(path, buf.data(), buf.size());
}

inline std::vector<double> read_f32_raw(const std::string& path) {
  const auto buf = read_file_bytes(path);
  if (buf.size() % 4 != 0) throw std::runtime_error("f32 file length not divisible by 4: " + path);
  std::vector<double> out(buf.size() / 4);
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(get_f32(buf.data() + 4 * i));
  return out;
}

inline void write_f32_sidecar(const std::string& raw_path, int sample_rate, long length) {
  std::ostringstream ss;
  ss << "sample_rate " << sample_rate << "\nlength " << length << "\n";
  write_file_text(raw_path + ".meta", ss.str());
}

inline int read_f32_sidecar_rate(const std::string& raw_path) {
  const std::string text = read_file_text(raw_path + ".meta");
  std::istringstream ss(text);
  std::string key;
  long value = 0;
  while (ss >> key >> value)
    if (key == "sample_rate") return static_cast<int>(value);
  throw std::runtime_error("sidecar missing sample_rate: " + raw_path + ".meta");
}

}  // namespace rirflow
