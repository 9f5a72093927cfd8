// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Method evaluation harness: runs a predictor over a few-shot eval set,
// scores signal metrics and embedding-space retrieval/Frechet metrics, and
// aggregates mean +- std across generations.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/agree/train.hpp"
#include "rirflow/eval/baselines.hpp"
#include "rirflow/eval/frechet.hpp"
#include "rirflow/flow/generate.hpp"
#include "rirflow/flow/train.hpp"
#include "rirflow/geom/equirect.hpp"
#include "rirflow/signal/metrics.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Methods and eval instances
// ---------------------------------------------------------------------------

enum class EvalMethod { flac, random_across_rooms, random_same_room, linear_interp, knn, copy_gt };

inline std::string to_string(EvalMethod m) {
  switch (m) {
    case EvalMethod::flac: return "flac";
    case EvalMethod::random_across_rooms: return "random_across_rooms";
    case EvalMethod::random_same_room: return "random_same_room";
    case EvalMethod::linear_interp: return "linear_interp";
    case EvalMethod::knn: return "knn";
    case EvalMethod::copy_gt: return "copy_gt";
  }
  throw std::logic_error("unreachable");
}

inline EvalMethod eval_method_from_string(const std::string& s) {
  if (s == "flac") return EvalMethod::flac;
  if (s == "random_across_rooms") return EvalMethod::random_across_rooms;
  if (s == "random_same_room") return EvalMethod::random_same_room;
  if (s == "linear_interp") return EvalMethod::linear_interp;
  if (s == "knn") return EvalMethod::knn;
  if (s == "copy_gt") return EvalMethod::copy_gt;
  throw std::invalid_argument("unknown eval method: " + s);
}

/// Stochastic methods rerun per generation; deterministic ones run once.
inline bool method_is_stochastic(EvalMethod m) {
  return m == EvalMethod::flac || m == EvalMethod::random_across_rooms ||
         m == EvalMethod::random_same_room;
}

/// One scored few-shot task.  The id names (room, receiver, source) and keys
/// the retrieval galleries; seeds derive from it, never from list position.
struct EvalInstance {
  InstanceRef ref;
  FewShotBundle bundle;
  std::string id;
};

inline std::vector<EvalInstance> make_eval_set(const Dataset& d, bool unseen, int k) {
  std::vector<EvalInstance> out;
  for (const auto& ref : list_instances(d, unseen)) {
    EvalInstance inst;
    inst.ref = ref;
    inst.bundle = load_bundle(d, ref, k);
    inst.id = "room" + std::to_string(ref.room) + "_r" + std::to_string(ref.rcv) + "_s" +
              std::to_string(ref.src);
    out.push_back(std::move(inst));
  }
  return out;
}

/// Everything a method might need; unused members may stay null.
struct EvalContext {
  const Dataset* dataset = nullptr;         // random baselines
  const LoadedFlowModel* flow = nullptr;    // few-shot generator
  const VaeModel* vae = nullptr;            // latent decoder for the generator
  const LoadedAgreeModel* agree = nullptr;  // embedding metrics; optional
  GenerateConfig gen;                       // steps, guidance, root seed
  long n_generations = 5;
  double interp_eps = 1e-4;
  bool per_room_average = false;  // average within rooms before across rooms
};

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct InstanceRecord {
  std::string id;
  long generation = 0;
  std::map<std::string, double> values;
  std::map<std::string, std::string> failures;  // metric -> reason, excluded from aggregates
};

struct AggregateStat {
  double mean = 0.0;
  double stddev = 0.0;  // across generations
  long count = 0;       // records (or generations, for set-level metrics) included
};

struct MetricsReport {
  std::string method;
  long generations = 0;
  std::vector<InstanceRecord> records;
  std::map<std::string, AggregateStat> aggregates;
};

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

namespace detail {

inline uint64_t derive_seed(uint64_t root, const std::string& label) {
  return Rng::substream(root, label).next_u64();
}

inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace detail

/// One prediction for one instance.  Stochastic draws are keyed by the
/// instance id and generation index, so results are independent of eval-set
/// ordering and of context truncation.
inline RirWaveform predict_rir(EvalMethod m, const EvalInstance& inst, const EvalContext& ctx,
                               long generation) {
  const std::string label = inst.id + "#g" + std::to_string(generation);
  switch (m) {
    case EvalMethod::copy_gt: return inst.bundle.target_rir;
    case EvalMethod::linear_interp: return linear_interp_predict(inst.bundle, ctx.interp_eps);
    case EvalMethod::knn: return knn_predict(inst.bundle);
    case EvalMethod::random_across_rooms:
    case EvalMethod::random_same_room: {
      detail::require(ctx.dataset != nullptr, "evaluate: method requires the dataset");
      Rng rng(detail::derive_seed(ctx.gen.seed, label));
      const auto kind = m == EvalMethod::random_across_rooms ? BaselineKind::random_across_rooms
                                                             : BaselineKind::random_same_room;
      return random_pool_predict(kind, inst.ref, *ctx.dataset, rng);
    }
    case EvalMethod::flac: {
      detail::require(ctx.flow != nullptr, "evaluate: method requires a flow checkpoint");
      detail::require(ctx.vae != nullptr, "evaluate: method requires an autoencoder checkpoint");
      GenerateConfig gc = ctx.gen;
      gc.seed = detail::derive_seed(ctx.gen.seed, label);
      FlowInputs in = ctx.flow->model.make_inputs(inst.bundle);
      return generate_rir(ctx.flow->model, *ctx.vae, ctx.flow->latent_scale, in, gc,
                          inst.bundle.target_rir.sample_rate);
    }
  }
  throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

/// Mean across instance values; with per-room averaging, rooms first.
inline double eval_set_mean(const std::vector<double>& values, const std::vector<long>& rooms,
                            bool per_room) {
  if (values.empty()) return 0.0;
  if (!per_room) {
    double s = 0.0;
    for (double v : values) s += v;
    return s / double(values.size());
  }
  std::map<long, std::pair<double, long>> by_room;
  for (size_t i = 0; i < values.size(); ++i) {
    auto& [sum, n] = by_room[rooms[i]];
    sum += values[i];
    ++n;
  }
  double s = 0.0;
  for (const auto& [room, acc] : by_room) s += acc.first / double(acc.second);
  return s / double(by_room.size());
}

inline AggregateStat across_generations(const std::vector<double>& per_gen, long count) {
  AggregateStat st;
  st.count = count;
  if (per_gen.empty()) return st;
  for (double v : per_gen) st.mean += v;
  st.mean /= double(per_gen.size());
  if (per_gen.size() > 1) {
    double ss = 0.0;
    for (double v : per_gen) ss += (v - st.mean) * (v - st.mean);
    st.stddev = std::sqrt(ss / double(per_gen.size() - 1));
  }
  return st;
}

}  // namespace detail

/// Runs `method` over the eval set, `ctx.n_generations` times if stochastic.
/// Per-instance metric failures are recorded and excluded from aggregates;
/// embedding metrics require `ctx.agree` and are skipped without it.
inline MetricsReport evaluate_method(EvalMethod method, const std::vector<EvalInstance>& eval_set,
                                     const EvalContext& ctx) {
  if (eval_set.empty()) throw std::invalid_argument("evaluate: empty eval set");
  MetricsReport report;
  report.method = to_string(method);
  report.generations = method_is_stochastic(method) ? ctx.n_generations : 1;
  if (report.generations < 1) throw std::invalid_argument("evaluate: n_generations must be >= 1");

  const long N = static_cast<long>(eval_set.size());
  const bool with_embeddings = ctx.agree != nullptr;

  // Ground-truth galleries are generation-independent.
  Gallery audio_gt, geometry;
  if (with_embeddings) {
    const long d = ctx.agree->model.config().embed_dim;
    audio_gt.embeddings = Tensor::zeros({N, d});
    geometry.embeddings = Tensor::zeros({N, d});
    for (long i = 0; i < N; ++i) {
      const auto& b = eval_set[i].bundle;
      Tensor a = ctx.agree->model.embed_audio(ctx.agree->vae, b.target_rir);
      PointMap pm = unproject_equirect(b.pano_depth);
      ReflectionMap rm = reflection_map(pm, to_receiver_frame(b.target_source, b.receiver));
      Tensor g = ctx.agree->model.embed_geometry(rm);
      for (long j = 0; j < d; ++j) {
        audio_gt.embeddings.data[i * d + j] = a.data[j];
        geometry.embeddings.data[i * d + j] = g.data[j];
      }
      audio_gt.ids.push_back(eval_set[i].id);
      geometry.ids.push_back(eval_set[i].id);
    }
  }

  std::map<std::string, std::vector<double>> per_gen_values;  // metric -> value per generation
  std::map<std::string, long> value_counts;

  for (long g = 0; g < report.generations; ++g) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<long>>> gen_values;
    Gallery audio_gen;
    std::vector<long> embedded;  // instances whose prediction embedded cleanly
    if (with_embeddings) {
      audio_gen.embeddings = Tensor::zeros({N, ctx.agree->model.config().embed_dim});
      audio_gen.ids = audio_gt.ids;
    }

    for (long i = 0; i < N; ++i) {
      const EvalInstance& inst = eval_set[i];
      InstanceRecord rec;
      rec.id = inst.id;
      rec.generation = g;
      try {
        RirWaveform pred = predict_rir(method, inst, ctx, g);
        check_comparable(pred, inst.bundle.target_rir);
        auto score = [&](const std::string& key, auto&& fn) {
          try {
            rec.values[key] = fn();
          } catch (const std::exception& e) {
            rec.failures[key] = e.what();
          }
        };
        const RirWaveform& gt = inst.bundle.target_rir;
        score("t60", [&] { return 100.0 * std::abs(t60_seconds(pred) - t60_seconds(gt)) /
                                  t60_seconds(gt); });
        score("c50", [&] { return std::abs(c50_db(pred) - c50_db(gt)); });
        score("edt", [&] { return std::abs(edt_ms(pred) - edt_ms(gt)); });
        score("mag", [&] { return mag_distance(pred, gt); });
        score("env", [&] { return env_distance(pred, gt); });
        if (with_embeddings) {
          const long d = ctx.agree->model.config().embed_dim;
          Tensor a = ctx.agree->model.embed_audio(ctx.agree->vae, pred);
          for (long j = 0; j < d; ++j) audio_gen.embeddings.data[i * d + j] = a.data[j];
          embedded.push_back(i);
        }
      } catch (const std::exception& e) {
        rec.failures["predict"] = e.what();
      }
      for (const auto& [key, value] : rec.values) {
        auto& [vals, rooms] = gen_values[key];
        vals.push_back(value);
        rooms.push_back(inst.ref.room);
        ++value_counts[key];
      }
      report.records.push_back(std::move(rec));
    }

    for (const auto& [key, acc] : gen_values)
      per_gen_values[key].push_back(
          detail::eval_set_mean(acc.first, acc.second, ctx.per_room_average));

    if (with_embeddings && !embedded.empty()) {
      // Failed instances drop out of the galleries; recalls and the Frechet
      // distance score the successfully embedded subset.
      const long d = ctx.agree->model.config().embed_dim;
      const long M = static_cast<long>(embedded.size());
      auto subset = [&](const Gallery& full) {
        Gallery s;
        s.embeddings = Tensor::zeros({M, d});
        for (long r = 0; r < M; ++r) {
          s.ids.push_back(full.ids[embedded[r]]);
          for (long j = 0; j < d; ++j)
            s.embeddings.data[r * d + j] = full.embeddings.data[embedded[r] * d + j];
        }
        return s;
      };
      const Gallery gen_sub = subset(audio_gen);
      const Gallery geo_sub = subset(geometry);
      const Gallery gt_sub = subset(audio_gt);
      for (const auto& [pair_name, qg] :
           std::vector<std::pair<std::string, std::pair<const Gallery*, const Gallery*>>>{
               {"a2a", {&gen_sub, &audio_gt}},
               {"a2g", {&gen_sub, &geometry}},
               {"g2a", {&geo_sub, &gen_sub}}}) {
        for (long k : {1L, 5L, 10L}) {
          if (k > qg.second->size() || k > M) continue;
          const std::string key = "r" + std::to_string(k) + "_" + pair_name;
          per_gen_values[key].push_back(recall_at_k(*qg.first, *qg.second, k));
          ++value_counts[key];
        }
      }
      per_gen_values["fd_g"].push_back(frechet_distance(
          fit_frechet_stats(gen_sub.embeddings), fit_frechet_stats(gt_sub.embeddings)));
      ++value_counts["fd_g"];
    }
  }

  for (const auto& [key, vals] : per_gen_values)
    report.aggregates[key] = detail::across_generations(vals, value_counts[key]);
  return report;
}

// ---------------------------------------------------------------------------
// Robustness sweep
// ---------------------------------------------------------------------------

/// Evaluates with the context truncated to the first k references, for each
/// requested k.  k equal to the full context reproduces evaluate_method.
inline std::vector<std::pair<long, MetricsReport>> robustness_sweep(
    EvalMethod method, const std::vector<EvalInstance>& eval_set,
    const std::vector<long>& k_values, const EvalContext& ctx) {
  std::vector<std::pair<long, MetricsReport>> out;
  for (long k : k_values) {
    std::vector<EvalInstance> truncated = eval_set;
    for (auto& inst : truncated) {
      const long have = static_cast<long>(inst.bundle.context_rirs.size());
      if (k < 1 || k > have)
        throw std::invalid_argument("robustness_sweep: k exceeds available context");
      inst.bundle.context_rirs.resize(k);
      inst.bundle.context_sources.resize(k);
    }
    out.emplace_back(k, evaluate_method(method, truncated, ctx));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diversity
// ---------------------------------------------------------------------------

struct DiversityStats {
  double intra_mean = 0.0;  // mean pairwise distance within a conditioning
  double intra_std = 0.0;
  double inter_mean = 0.0;  // mean pairwise distance across conditionings
  double ratio = 0.0;       // intra_mean / inter_mean
};

/// groups[c][s]: embedding vector of sample s under conditioning c; Euclidean
/// distances throughout.
inline DiversityStats diversity_from_embeddings(const std::vector<std::vector<Tensor>>& groups) {
  if (groups.size() < 2)
    throw std::invalid_argument("diversity_stats: need at least two conditionings");
  for (const auto& g : groups)
    if (g.size() < 2) throw std::invalid_argument("diversity_stats: n_samples must be >= 2");

  auto dist = [](const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
      const double d = a.data[i] - b.data[i];
      s += d * d;
    }
    return std::sqrt(s);
  };

  std::vector<double> intra;
  for (const auto& g : groups) {
    double s = 0.0;
    long n = 0;
    for (size_t i = 0; i < g.size(); ++i)
      for (size_t j = i + 1; j < g.size(); ++j) {
        s += dist(g[i], g[j]);
        ++n;
      }
    intra.push_back(s / double(n));
  }

  DiversityStats st;
  for (double v : intra) st.intra_mean += v;
  st.intra_mean /= double(intra.size());
  double ss = 0.0;
  for (double v : intra) ss += (v - st.intra_mean) * (v - st.intra_mean);
  st.intra_std = std::sqrt(ss / double(intra.size() - 1));

  double s = 0.0;
  long n = 0;
  for (size_t c = 0; c < groups.size(); ++c)
    for (size_t c2 = c + 1; c2 < groups.size(); ++c2)
      for (const auto& a : groups[c])
        for (const auto& b : groups[c2]) {
          s += dist(a, b);
          ++n;
        }
  st.inter_mean = s / double(n);
  st.ratio = st.inter_mean > 0.0 ? st.intra_mean / st.inter_mean : 0.0;
  return st;
}

/// Generates n_samples RIRs per conditioning with the few-shot model and
/// embeds them with the unnormalized audio projection.
inline DiversityStats diversity_stats(const std::vector<EvalInstance>& eval_set, long n_samples,
                                      const EvalContext& ctx) {
  if (n_samples < 2) throw std::invalid_argument("diversity_stats: n_samples must be >= 2");
  detail::require(ctx.flow != nullptr, "diversity_stats: requires a flow checkpoint");
  detail::require(ctx.vae != nullptr, "diversity_stats: requires an autoencoder checkpoint");
  detail::require(ctx.agree != nullptr, "diversity_stats: requires an embedding checkpoint");
  std::vector<std::vector<Tensor>> groups;
  for (const auto& inst : eval_set) {
    FlowInputs in = ctx.flow->model.make_inputs(inst.bundle);
    std::vector<Tensor> samples;
    for (long s = 0; s < n_samples; ++s) {
      GenerateConfig gc = ctx.gen;
      gc.seed = detail::derive_seed(ctx.gen.seed, inst.id + "#div" + std::to_string(s));
      RirWaveform rir = generate_rir(ctx.flow->model, *ctx.vae, ctx.flow->latent_scale, in, gc,
                                     inst.bundle.target_rir.sample_rate);
      samples.push_back(ctx.agree->model.embed_audio_raw(ctx.agree->vae, rir));
    }
    groups.push_back(std::move(samples));
  }
  return diversity_from_embeddings(groups);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_safe(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

}  // namespace detail

/// Long-format per-instance CSV; failed metrics keep their reason in the
/// error column with an empty value.
inline std::string metrics_csv(const MetricsReport& r) {
  std::string out = "id,generation,metric,value,error\n";
  for (const auto& rec : r.records) {
    for (const auto& [key, value] : rec.values)
      out += rec.id + "," + std::to_string(rec.generation) + "," + key + "," +
             detail::csv_num(value) + ",\n";
    for (const auto& [key, why] : rec.failures)
      out += rec.id + "," + std::to_string(rec.generation) + "," + key + ",," +
             detail::csv_safe(why) + "\n";
  }
  return out;
}

/// Aggregate table, one metric per line.
inline std::string metrics_summary(const MetricsReport& r) {
  std::string out = "method " + r.method + "\ngenerations " + std::to_string(r.generations) + "\n";
  long failures = 0;
  for (const auto& rec : r.records) failures += static_cast<long>(rec.failures.size());
  out += "failures " + std::to_string(failures) + "\n";
  for (const auto& [key, st] : r.aggregates)
    out += key + " mean " + detail::csv_num(st.mean) + " std " + detail::csv_num(st.stddev) +
           " count " + std::to_string(st.count) + "\n";
  return out;
}

/// Sweep results as "k,metric,mean,stddev,count" rows.
inline std::string sweep_csv(const std::vector<std::pair<long, MetricsReport>>& sweep) {
  std::string out = "k,metric,mean,stddev,count\n";
  for (const auto& [k, rep] : sweep)
    for (const auto& [key, st] : rep.aggregates)
      out += std::to_string(k) + "," + key + "," + detail::csv_num(st.mean) + "," +
             detail::csv_num(st.stddev) + "," + std::to_string(st.count) + "\n";
  return out;
}

}  // namespace rirflow
