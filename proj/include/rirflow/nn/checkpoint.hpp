// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rirflow/core/checksum.hpp"
#include "rirflow/core/io.hpp"
#include "rirflow/nn/layers.hpp"

namespace rirflow {

// Self-describing checkpoint container:
//   magic "RFCK" | u32 version | u32 header_len | header JSON | payload | u32 crc32(payload)
// The header lists the kind, step count, a config echo, and the array table;
// the payload is the arrays' float32 little-endian data in table order.

struct Checkpoint {
  std::string kind;
  long step = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor& find(const std::string& name) const {
    for (const auto& [k, t] : arrays)
      if (k == name) return t;
    throw std::out_of_range("checkpoint: missing array " + name);
  }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json header;
  header["kind"] = ck.kind;
  header["step"] = ck.step;
  header["config"] = ck.config;
  auto table = nlohmann::json::array();
  for (const auto& [name, t] : ck.arrays) table.push_back({{"name", name}, {"shape", t.shape}});
  header["arrays"] = table;
  const std::string hs = header.dump();

  std::vector<uint8_t> payload;
  for (const auto& [name, t] : ck.arrays)
    for (double v : t.data) put_f32(payload, static_cast<float>(v));

  std::vector<uint8_t> out;
  out.insert(out.end(), {'R', 'F', 'C', 'K'});
  put_u32(out, 1);
  put_u32(out, static_cast<uint32_t>(hs.size()));
  out.insert(out.end(), hs.begin(), hs.end());
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32(out, crc32(payload.data(), payload.size()));
  write_file_bytes(path, out.data(), out.size());
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const std::vector<uint8_t> raw = read_file_bytes(path);
  if (raw.size() < 16 || raw[0] != 'R' || raw[1] != 'F' || raw[2] != 'C' || raw[3] != 'K')
    throw std::runtime_error("checkpoint integrity check failed: bad magic");
  if (get_u32(raw.data() + 4) != 1)
    throw std::runtime_error("checkpoint integrity check failed: unknown version");
  const uint32_t hlen = get_u32(raw.data() + 8);
  if (raw.size() < 16 + static_cast<size_t>(hlen))
    throw std::runtime_error("checkpoint integrity check failed: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.begin() + 12, raw.begin() + 12 + hlen);
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("checkpoint integrity check failed: bad header");
  }

  Checkpoint ck;
  ck.kind = header.at("kind").get<std::string>();
  ck.step = header.at("step").get<long>();
  ck.config = header.value("config", nlohmann::json::object());
  size_t off = 12 + hlen;
  long total = 0;
  for (const auto& e : header.at("arrays")) {
    std::vector<long> shape = e.at("shape").get<std::vector<long>>();
    total += Tensor::count_of(shape);
    ck.arrays.emplace_back(e.at("name").get<std::string>(), Tensor::zeros(std::move(shape)));
  }
  if (raw.size() != off + 4 * static_cast<size_t>(total) + 4)
    throw std::runtime_error("checkpoint integrity check failed: payload size mismatch");
  const uint32_t want = get_u32(raw.data() + off + 4 * total);
  const uint32_t got = crc32(raw.data() + off, 4 * static_cast<size_t>(total));
  if (want != got) throw std::runtime_error("checkpoint integrity check failed: crc mismatch");
  for (auto& [name, t] : ck.arrays)
    for (auto& v : t.data) {
      v = static_cast<double>(get_f32(raw.data() + off));
      off += 4;
    }
  return ck;
}

/// Whole-file CRC, used as the checkpoint hash echoed into run metadata.
inline uint32_t checkpoint_hash(const std::string& path) {
  const std::vector<uint8_t> raw = read_file_bytes(path);
  return crc32(raw.data(), raw.size());
}

inline void store_to_checkpoint(const ParamStore& ps, Checkpoint& ck) {
  for (const auto& [name, p] : ps.items) ck.arrays.emplace_back(name, p->value);
}

inline void load_into_store(const Checkpoint& ck, ParamStore& ps) {
  for (auto& [name, p] : ps.items) {
    const Tensor& t = ck.find(name);
    if (!t.same_shape(p->value))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    p->value = t;
  }
}

}  // namespace rirflow
