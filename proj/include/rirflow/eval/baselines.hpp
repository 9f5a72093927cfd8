// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Non-learned prediction baselines over a few-shot bundle: random picks from
// reference pools, inverse-distance interpolation, and nearest-source copy.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/core/rng.hpp"
#include "rirflow/sim/dataset.hpp"

namespace rirflow {

enum class BaselineKind { random_across_rooms, random_same_room, linear_interp, knn };

inline std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::random_across_rooms: return "random_across_rooms";
    case BaselineKind::random_same_room: return "random_same_room";
    case BaselineKind::linear_interp: return "linear_interp";
    case BaselineKind::knn: return "knn";
  }
  throw std::logic_error("unreachable");
}

inline BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "random_across_rooms") return BaselineKind::random_across_rooms;
  if (s == "random_same_room") return BaselineKind::random_same_room;
  if (s == "linear_interp") return BaselineKind::linear_interp;
  if (s == "knn") return BaselineKind::knn;
  throw std::invalid_argument("unknown baseline kind: " + s);
}

namespace detail {

inline RirWaveform load_instance_rir(const Dataset& d, const InstanceRef& ref) {
  return load_rir_wav(rir_path(d.dir, d.manifest.room_ids.at(ref.room), ref.src, ref.rcv));
}

inline bool same_instance(const InstanceRef& a, const InstanceRef& b) {
  return a.room == b.room && a.rcv == b.rcv && a.src == b.src;
}

}  // namespace detail

/// Normalized inverse-distance mix of the context RIRs, weight 1/(r + eps)
/// per context with r the source-to-target Euclidean distance.
inline RirWaveform linear_interp_predict(const FewShotBundle& b, double eps = 1e-4) {
  const size_t k = b.context_rirs.size();
  if (k == 0) throw std::invalid_argument("baseline: empty candidate pool");
  std::vector<double> w(k);
  double total = 0.0;
  for (size_t i = 0; i < k; ++i) {
    const double r = (b.context_sources[i].position - b.target_source.position).norm();
    w[i] = 1.0 / (r + eps);
    total += w[i];
  }
  RirWaveform out;
  out.sample_rate = b.context_rirs[0].sample_rate;
  out.samples.assign(b.context_rirs[0].samples.size(), 0.0);
  for (size_t i = 0; i < k; ++i) {
    const double wi = w[i] / total;
    for (size_t n = 0; n < out.samples.size(); ++n)
      out.samples[n] += wi * b.context_rirs[i].samples[n];
  }
  return out;
}

/// The context RIR whose source is nearest (Euclidean) to the target source;
/// ties resolve to the lowest context index.
inline RirWaveform knn_predict(const FewShotBundle& b) {
  if (b.context_rirs.empty()) throw std::invalid_argument("baseline: empty candidate pool");
  size_t best = 0;
  double best_r = (b.context_sources[0].position - b.target_source.position).norm();
  for (size_t i = 1; i < b.context_sources.size(); ++i) {
    const double r = (b.context_sources[i].position - b.target_source.position).norm();
    if (r < best_r) {
      best = i;
      best_r = r;
    }
  }
  return b.context_rirs[best];
}

/// Uniform pick over a reference pool: all seen-room RIRs (across), or all
/// RIRs of the target's room (same), excluding the target instance itself.
inline RirWaveform random_pool_predict(BaselineKind kind, const InstanceRef& target,
                                       const Dataset& d, Rng& rng) {
  std::vector<InstanceRef> pool;
  if (kind == BaselineKind::random_across_rooms) {
    pool = list_instances(d, /*unseen=*/false);
  } else {
    for (int r = 0; r < d.manifest.receivers_per_room; ++r)
      for (int s = 0; s < d.manifest.sources_per_room; ++s)
        pool.push_back({target.room, r, s});
  }
  std::erase_if(pool, [&](const InstanceRef& p) { return detail::same_instance(p, target); });
  if (pool.empty()) throw std::invalid_argument("baseline: empty candidate pool");
  const auto& pick = pool[rng.uniform_int(static_cast<long>(pool.size()))];
  return detail::load_instance_rir(d, pick);
}

/// Kind dispatch.  Random kinds draw from `rng` and read the dataset; the
/// bundle-local kinds use only the bundle.
inline RirWaveform baseline_predict(BaselineKind kind, const FewShotBundle& b,
                                    const InstanceRef& target, const Dataset& d, Rng& rng,
                                    double interp_eps = 1e-4) {
  switch (kind) {
    case BaselineKind::linear_interp: return linear_interp_predict(b, interp_eps);
    case BaselineKind::knn: return knn_predict(b);
    default: return random_pool_predict(kind, target, d, rng);
  }
}

}  // namespace rirflow
