// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "rirflow/core/io.hpp"
#include "rirflow/core/rng.hpp"
#include "rirflow/geom/equirect.hpp"
#include "rirflow/sim/image_source.hpp"
#include "rirflow/sim/pano.hpp"
#include "rirflow/sim/room.hpp"
#include "rirflow/signal/waveform.hpp"

namespace rirflow {

struct DatasetConfig {
  std::string out_dir;
  int rooms = 20;
  double unseen_frac = 0.1;  // trailing rooms are held out
  int sources_per_room = 10;
  int receivers_per_room = 2;
  int k = 8;
  int sample_rate = 8000;
  long rir_length = 2048;
  int max_order = 6;
  long pano_h = 32;
  long pano_w = 64;
  double amplitude_scale = 0.25;  // keeps peaks inside the decoder's tanh range
  double clearance = 0.2;
  double min_pair_distance = 0.5;
  Vec3 dims_lo{3.0, 3.0, 2.5};
  Vec3 dims_hi{6.0, 6.0, 4.0};
  double absorption_lo = 0.1;
  double absorption_hi = 0.9;
  uint64_t seed = 0;

  void validate() const {
    if (rooms < 1 || sources_per_room < 2 || receivers_per_room < 1)
      throw std::invalid_argument("DatasetConfig: too few rooms/sources/receivers");
    if (k < 1 || k >= sources_per_room)
      throw std::invalid_argument("DatasetConfig: need k in [1, sources_per_room)");
    if (unseen_frac < 0.0 || unseen_frac >= 1.0)
      throw std::invalid_argument("DatasetConfig: unseen_frac outside [0,1)");
    if (sample_rate <= 0 || rir_length <= 0 || pano_h <= 0 || pano_w <= 0)
      throw std::invalid_argument("DatasetConfig: bad signal/pano sizes");
  }
};

struct RoomRecord {
  std::string id;
  bool unseen = false;
  ShoeboxRoom room;
  std::vector<Pose> receivers;
  std::vector<Pose> sources;
};

struct DatasetManifest {
  uint64_t seed = 0;
  int sample_rate = 0;
  long rir_length = 0;
  int k = 0;
  int max_order = 0;
  long pano_h = 0, pano_w = 0;
  double amplitude_scale = 1.0;
  int sources_per_room = 0;
  int receivers_per_room = 0;
  std::vector<std::string> room_ids;
  std::vector<bool> room_unseen;
};

/// One few-shot task: K context RIRs at a fixed receiver, the target source
/// pose, the panorama at the receiver, and the held-out target RIR.
struct FewShotBundle {
  std::vector<RirWaveform> context_rirs;
  std::vector<Pose> context_sources;
  Pose receiver;
  Pose target_source;
  RirWaveform target_rir;
  PanoDepth pano_depth;
  ShoeboxRoom room;
  long room_index = -1;
};

struct InstanceRef {
  long room = 0;
  int rcv = 0;
  int src = 0;  // the target source
};

namespace detail {

inline std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline Pose sample_pose(const ShoeboxRoom& room, double clearance, Rng& rng) {
  auto axis = [&rng, clearance](double len) {
    if (len - 2.0 * clearance <= 0.0) throw std::runtime_error("infeasible pose sampling");
    return clearance + (len - 2.0 * clearance) * rng.uniform();
  };
  return Pose{{axis(room.dims.x), axis(room.dims.y), axis(room.dims.z)}};
}

}  // namespace detail

inline std::string room_dir(const std::string& root, const std::string& id) {
  return root + "/rooms/" + id;
}
inline std::string rir_path(const std::string& root, const std::string& id, int src, int rcv) {
  return room_dir(root, id) + "/rir_" + std::to_string(src) + "_" + std::to_string(rcv) + ".wav";
}
inline std::string depth_path(const std::string& root, const std::string& id, int rcv) {
  return room_dir(root, id) + "/depth_" + std::to_string(rcv) + ".f32";
}

inline RoomRecord sample_room(const DatasetConfig& cfg, long index) {
  Rng rng = Rng::substream(cfg.seed, "room_" + std::to_string(index));
  RoomRecord rec;
  char id[16];
  std::snprintf(id, sizeof(id), "room_%03ld", index);
  rec.id = id;

  auto range = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  rec.room.dims = {range(cfg.dims_lo.x, cfg.dims_hi.x), range(cfg.dims_lo.y, cfg.dims_hi.y),
                   range(cfg.dims_lo.z, cfg.dims_hi.z)};
  for (auto& a : rec.room.wall_absorption) a = range(cfg.absorption_lo, cfg.absorption_hi);

  for (int r = 0; r < cfg.receivers_per_room; ++r)
    rec.receivers.push_back(detail::sample_pose(rec.room, cfg.clearance, rng));

  for (int s = 0; s < cfg.sources_per_room; ++s) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Pose p = detail::sample_pose(rec.room, cfg.clearance, rng);
      placed = true;
      for (const auto& rv : rec.receivers)
        placed = placed && distance(p.position, rv.position) >= cfg.min_pair_distance;
      if (placed) rec.sources.push_back(p);
    }
    if (!placed) throw std::runtime_error("infeasible pose sampling");
  }
  return rec;
}

inline void write_room_meta(const std::string& root, const RoomRecord& rec) {
  std::string t;
  t += "room " + rec.id + "\n";
  t += std::string("split ") + (rec.unseen ? "unseen" : "seen") + "\n";
  t += "dims " + detail::g17(rec.room.dims.x) + " " + detail::g17(rec.room.dims.y) + " " +
       detail::g17(rec.room.dims.z) + "\n";
  t += "absorption";
  for (double a : rec.room.wall_absorption) t += " " + detail::g17(a);
  t += "\nspeed_of_sound " + detail::g17(rec.room.speed_of_sound) + "\n";
  for (size_t i = 0; i < rec.receivers.size(); ++i) {
    const Vec3& p = rec.receivers[i].position;
    t += "rcv " + std::to_string(i) + " " + detail::g17(p.x) + " " + detail::g17(p.y) + " " +
         detail::g17(p.z) + "\n";
  }
  for (size_t i = 0; i < rec.sources.size(); ++i) {
    const Vec3& p = rec.sources[i].position;
    t += "src " + std::to_string(i) + " " + detail::g17(p.x) + " " + detail::g17(p.y) + " " +
         detail::g17(p.z) + "\n";
  }
  write_file_text(room_dir(root, rec.id) + "/meta", t);
}

inline RoomRecord read_room_meta(const std::string& root, const std::string& id) {
  std::istringstream in(read_file_text(room_dir(root, id) + "/meta"));
  RoomRecord rec;
  std::string line;
  while (std::getline(in, line)) {
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "room") rec.id = tok.at(1);
    else if (tok[0] == "split") rec.unseen = tok.at(1) == "unseen";
    else if (tok[0] == "dims")
      rec.room.dims = {std::stod(tok.at(1)), std::stod(tok.at(2)), std::stod(tok.at(3))};
    else if (tok[0] == "absorption")
      for (int i = 0; i < 6; ++i) rec.room.wall_absorption[i] = std::stod(tok.at(i + 1));
    else if (tok[0] == "speed_of_sound") rec.room.speed_of_sound = std::stod(tok.at(1));
    else if (tok[0] == "rcv")
      rec.receivers.push_back(Pose{{std::stod(tok.at(2)), std::stod(tok.at(3)), std::stod(tok.at(4))}});
    else if (tok[0] == "src")
      rec.sources.push_back(Pose{{std::stod(tok.at(2)), std::stod(tok.at(3)), std::stod(tok.at(4))}});
  }
  if (rec.id != id) throw std::runtime_error("room meta id mismatch: " + id);
  return rec;
}

inline void write_manifest(const std::string& root, const DatasetManifest& m) {
  std::string t = "rirflow-dataset 1\n";
  t += "seed " + std::to_string(m.seed) + "\n";
  t += "sample_rate " + std::to_string(m.sample_rate) + "\n";
  t += "rir_length " + std::to_string(m.rir_length) + "\n";
  t += "k " + std::to_string(m.k) + "\n";
  t += "max_order " + std::to_string(m.max_order) + "\n";
  t += "pano " + std::to_string(m.pano_h) + " " + std::to_string(m.pano_w) + "\n";
  t += "amplitude_scale " + detail::g17(m.amplitude_scale) + "\n";
  t += "sources_per_room " + std::to_string(m.sources_per_room) + "\n";
  t += "receivers_per_room " + std::to_string(m.receivers_per_room) + "\n";
  for (size_t i = 0; i < m.room_ids.size(); ++i)
    t += "room " + m.room_ids[i] + (m.room_unseen[i] ? " unseen" : " seen") + "\n";
  write_file_text(root + "/manifest", t);
}

inline DatasetManifest read_manifest(const std::string& root) {
  std::istringstream in(read_file_text(root + "/manifest"));
  DatasetManifest m;
  std::string line;
  std::getline(in, line);
  if (line != "rirflow-dataset 1") throw std::runtime_error("unrecognized dataset manifest");
  while (std::getline(in, line)) {
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "seed") m.seed = std::stoull(tok.at(1));
    else if (tok[0] == "sample_rate") m.sample_rate = std::stoi(tok.at(1));
    else if (tok[0] == "rir_length") m.rir_length = std::stol(tok.at(1));
    else if (tok[0] == "k") m.k = std::stoi(tok.at(1));
    else if (tok[0] == "max_order") m.max_order = std::stoi(tok.at(1));
    else if (tok[0] == "pano") {
      m.pano_h = std::stol(tok.at(1));
      m.pano_w = std::stol(tok.at(2));
    } else if (tok[0] == "amplitude_scale") m.amplitude_scale = std::stod(tok.at(1));
    else if (tok[0] == "sources_per_room") m.sources_per_room = std::stoi(tok.at(1));
    else if (tok[0] == "receivers_per_room") m.receivers_per_room = std::stoi(tok.at(1));
    else if (tok[0] == "room") {
      m.room_ids.push_back(tok.at(1));
      m.room_unseen.push_back(tok.at(2) == "unseen");
    }
  }
  return m;
}

/// Synthesizes the full on-disk dataset.  Deterministic: every random choice
/// comes from a named substream of the config seed.
inline DatasetManifest build_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const long unseen = std::lround(cfg.rooms * cfg.unseen_frac);
  std::filesystem::create_directories(cfg.out_dir + "/rooms");

  DatasetManifest m;
  m.seed = cfg.seed;
  m.sample_rate = cfg.sample_rate;
  m.rir_length = cfg.rir_length;
  m.k = cfg.k;
  m.max_order = cfg.max_order;
  m.pano_h = cfg.pano_h;
  m.pano_w = cfg.pano_w;
  m.amplitude_scale = cfg.amplitude_scale;
  m.sources_per_room = cfg.sources_per_room;
  m.receivers_per_room = cfg.receivers_per_room;

  for (long i = 0; i < cfg.rooms; ++i) {
    RoomRecord rec = sample_room(cfg, i);
    rec.unseen = i >= cfg.rooms - unseen;
    std::filesystem::create_directories(room_dir(cfg.out_dir, rec.id));
    write_room_meta(cfg.out_dir, rec);

    for (int r = 0; r < cfg.receivers_per_room; ++r) {
      const PanoDepth pd = render_pano_depth(rec.room, rec.receivers[r], cfg.pano_h, cfg.pano_w);
      write_f32_raw(depth_path(cfg.out_dir, rec.id, r), pd.depths.data);
      for (int s = 0; s < cfg.sources_per_room; ++s) {
        RirWaveform rir = image_source_rir(rec.room, rec.sources[s], rec.receivers[r],
                                           cfg.max_order, cfg.sample_rate, cfg.rir_length);
        for (auto& v : rir.samples) v *= cfg.amplitude_scale;
        save_rir_wav(rir_path(cfg.out_dir, rec.id, s, r), rir);
      }
    }
    m.room_ids.push_back(rec.id);
    m.room_unseen.push_back(rec.unseen);
  }
  write_manifest(cfg.out_dir, m);
  return m;
}

struct Dataset {
  std::string dir;
  DatasetManifest manifest;
  std::vector<RoomRecord> rooms;
};

inline Dataset load_dataset(const std::string& dir) {
  Dataset d;
  d.dir = dir;
  d.manifest = read_manifest(dir);
  for (const auto& id : d.manifest.room_ids) d.rooms.push_back(read_room_meta(dir, id));
  for (size_t i = 0; i < d.rooms.size(); ++i) d.rooms[i].unseen = d.manifest.room_unseen[i];
  return d;
}

inline PanoDepth load_depth(const Dataset& d, long room, int rcv) {
  PanoDepth pd;
  pd.depths = Tensor::from(read_f32_raw(depth_path(d.dir, d.manifest.room_ids[room], rcv)),
                           {d.manifest.pano_h, d.manifest.pano_w});
  return pd;
}

/// Deterministic instance enumeration: every (room, receiver, target source)
/// triple of the requested split, in index order.
inline std::vector<InstanceRef> list_instances(const Dataset& d, bool unseen) {
  std::vector<InstanceRef> out;
  for (long i = 0; i < static_cast<long>(d.rooms.size()); ++i) {
    if (d.rooms[i].unseen != unseen) continue;
    for (int r = 0; r < d.manifest.receivers_per_room; ++r)
      for (int s = 0; s < d.manifest.sources_per_room; ++s) out.push_back({i, r, s});
  }
  return out;
}

/// Context sources for a target: the next k source indices cyclically, which
/// are distinct and exclude the target whenever k < sources_per_room.
inline FewShotBundle load_bundle(const Dataset& d, const InstanceRef& ref, int k) {
  if (k < 1 || k >= d.manifest.sources_per_room)
    throw std::invalid_argument("load_bundle: need 1 <= k < sources_per_room");
  const RoomRecord& room = d.rooms.at(ref.room);
  const std::string& id = d.manifest.room_ids.at(ref.room);
  FewShotBundle b;
  b.room = room.room;
  b.room_index = ref.room;
  b.receiver = room.receivers.at(ref.rcv);
  b.target_source = room.sources.at(ref.src);
  b.target_rir = load_rir_wav(rir_path(d.dir, id, ref.src, ref.rcv));
  for (int j = 1; j <= k; ++j) {
    const int s = (ref.src + j) % d.manifest.sources_per_room;
    b.context_sources.push_back(room.sources.at(s));
    b.context_rirs.push_back(load_rir_wav(rir_path(d.dir, id, s, ref.rcv)));
  }
  b.pano_depth = load_depth(d, ref.room, ref.rcv);
  return b;
}

}  // namespace rirflow
