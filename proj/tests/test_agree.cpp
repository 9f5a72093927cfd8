// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>
#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "rirflow/agree/agree.hpp"
#include "rirflow/agree/train.hpp"
#include "rirflow/nn/gradcheck.hpp"
#include "rirflow/sim/image_source.hpp"
#include "rirflow/sim/pano.hpp"

using namespace rirflow;

namespace {

Tensor unit_rows(long B, long d, Rng& rng) {
  Tensor t = Tensor::zeros({B, d});
  for (long i = 0; i < B; ++i) {
    double sq = 0.0;
    for (long j = 0; j < d; ++j) {
      t.data[i * d + j] = rng.normal();
      sq += t.data[i * d + j] * t.data[i * d + j];
    }
    for (long j = 0; j < d; ++j) t.data[i * d + j] /= std::sqrt(sq);
  }
  return t;
}

/// Small dual-encoder configuration for fast tests.
AgreeConfig tiny_agree_cfg() {
  AgreeConfig c;
  c.embed_dim = 32;
  c.batch_size = 64;
  c.geometry.vit_patch = 8;
  c.geometry.vit_depth = 1;
  c.geometry.vit_width = 16;
  c.geometry.vit_heads = 2;
  c.geo_h = 16;
  c.geo_w = 16;
  return c;
}

VaeConfig tiny_vae_cfg() {
  VaeConfig c;
  c.latent_channels = 8;
  c.base_width = 8;
  c.disc_windows = {128, 64, 32};
  c.disc_channels = 4;
  c.mr_windows = {128, 64};
  return c;
}

/// Matched (RIR, reflection-map) pairs: one receiver, many sources.
std::vector<AgreePair> make_pairs(long count, long rir_len, uint64_t seed) {
  ShoeboxRoom room;
  room.dims = {4.0, 3.0, 2.5};
  for (auto& a : room.wall_absorption) a = 0.35;
  Pose receiver{{2.0, 1.5, 1.2}};
  PanoDepth pano = render_pano_depth(room, receiver, 16, 16);
  PointMap pm = unproject_equirect(pano);
  Rng rng(seed);
  std::vector<AgreePair> out;
  for (long i = 0; i < count; ++i) {
    Pose src{{0.4 + 3.2 * rng.uniform(), 0.4 + 2.2 * rng.uniform(), 0.4 + 1.7 * rng.uniform()}};
    AgreePair p;
    p.rir = image_source_rir(room, src, receiver, 4, 8000, rir_len);
    for (auto& v : p.rir.samples) v *= 0.25;
    p.rmap = reflection_map(pm, to_receiver_frame(src, receiver));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("contrastive loss anchors") {
  auto lam = constant(Tensor::from({14.28}, {1}));

  // B = 1: a single-class softmax is certain.
  Tensor one = Tensor::zeros({1, 4});
  one.data[0] = 1.0;
  CHECK(agree_contrastive_loss(constant(one), constant(one), lam)->scalar() == 0.0);

  // B = 2, all similarities equal -> uniform softmax -> ln 2.
  Tensor dup = Tensor::zeros({2, 4});
  dup.data[0] = 1.0;
  dup.data[4] = 1.0;
  CHECK(agree_contrastive_loss(constant(dup), constant(dup), lam)->scalar() ==
        Catch::Approx(std::log(2.0)).margin(1e-12));

  // Orthonormal G = A at large scale separates perfectly.
  Tensor eye = Tensor::zeros({3, 3});
  for (long i = 0; i < 3; ++i) eye.data[i * 3 + i] = 1.0;
  auto big = constant(Tensor::from({100.0}, {1}));
  CHECK(agree_contrastive_loss(constant(eye), constant(eye), big)->scalar() < 1e-12);

  // Non-unit rows and shape mismatches are rejected.
  Tensor bad = eye;
  bad.data[0] = 0.5;
  CHECK_THROWS_WITH(agree_contrastive_loss(constant(bad), constant(eye), lam),
                    Catch::Matchers::ContainsSubstring("unit-norm"));
  Rng rng(3);
  CHECK_THROWS(agree_contrastive_loss(constant(unit_rows(3, 4, rng)),
                                      constant(unit_rows(2, 4, rng)), lam));
}

TEST_CASE("contrastive loss symmetry, rotation invariance, positivity") {
  Rng rng(5);
  Tensor G = unit_rows(6, 8, rng), A = unit_rows(6, 8, rng);
  auto lam = constant(Tensor::from({5.0}, {1}));

  const double fwd = agree_contrastive_loss(constant(G), constant(A), lam)->scalar();
  const double swapped = agree_contrastive_loss(constant(A), constant(G), lam)->scalar();
  CHECK(fwd == Catch::Approx(swapped).margin(1e-12));
  CHECK(fwd > 0.0);

  // Common orthogonal rotation of both sets preserves all similarities.
  Eigen::MatrixXd R(8, 8);
  for (long i = 0; i < 8; ++i)
    for (long j = 0; j < 8; ++j) R(i, j) = rng.normal();
  Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(R).householderQ();
  auto rotate = [&](const Tensor& m) {
    Tensor out = m;
    for (long i = 0; i < 6; ++i)
      for (long j = 0; j < 8; ++j) {
        double acc = 0.0;
        for (long k = 0; k < 8; ++k) acc += m.data[i * 8 + k] * Q(k, j);
        out.data[i * 8 + j] = acc;
      }
    return out;
  };
  const double rotated =
      agree_contrastive_loss(constant(rotate(G)), constant(rotate(A)), lam)->scalar();
  CHECK(rotated == Catch::Approx(fwd).margin(1e-9));
}

TEST_CASE("contrastive loss gradient matches finite differences") {
  Rng rng(7);
  auto g_raw = leaf(unit_rows(3, 4, rng));
  auto a_raw = leaf(unit_rows(3, 4, rng));
  auto log_lam = leaf(Tensor::from({2.659}, {1}));
  auto build = [&]() {
    return agree_contrastive_loss(l2_normalize_rows(g_raw), l2_normalize_rows(a_raw),
                                  clamp(exp_op(log_lam), 0.0, 100.0));
  };
  auto res = grad_check(build, {g_raw, a_raw, log_lam});
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("embedders emit unit-norm deterministic vectors") {
  AgreeConfig cfg = tiny_agree_cfg();
  VaeModel vae(tiny_vae_cfg(), 2);
  AgreeModel model(cfg, 8, 4);
  auto pairs = make_pairs(2, 256, 11);

  Tensor a1 = model.embed_audio(vae, pairs[0].rir);
  Tensor a2 = model.embed_audio(vae, pairs[0].rir);
  REQUIRE(a1.shape == std::vector<long>({32}));
  double nrm = 0.0, gap = 0.0;
  for (long i = 0; i < 32; ++i) {
    nrm += a1.data[i] * a1.data[i];
    gap += std::abs(a1.data[i] - a2.data[i]);
  }
  CHECK(std::sqrt(nrm) == Catch::Approx(1.0).margin(1e-6));
  CHECK(gap == 0.0);

  // Gain scaling changes the embedding; no scale invariance is claimed.
  RirWaveform half = pairs[0].rir;
  for (auto& v : half.samples) v *= 0.5;
  Tensor ah = model.embed_audio(vae, half);
  double d_gain = 0.0;
  for (long i = 0; i < 32; ++i) d_gain += std::abs(a1.data[i] - ah.data[i]);
  CHECK(d_gain > 1e-9);

  Tensor g1 = model.embed_geometry(pairs[0].rmap);
  Tensor g1b = model.embed_geometry(pairs[0].rmap);
  Tensor g2 = model.embed_geometry(pairs[1].rmap);
  double gn = 0.0, gd = 0.0, goff = 0.0;
  for (long i = 0; i < 32; ++i) {
    gn += g1.data[i] * g1.data[i];
    gd += std::abs(g1.data[i] - g1b.data[i]);
    goff += std::abs(g1.data[i] - g2.data[i]);
  }
  CHECK(std::sqrt(gn) == Catch::Approx(1.0).margin(1e-6));
  CHECK(gd == 0.0);
  CHECK(goff > 1e-9);  // sensitivity to the source offset

  // The logit scale is clamped from above.
  model.params().find("logit_scale")->value.data[0] = std::log(1000.0);
  CHECK(model.lambda_value() == 100.0);
}

TEST_CASE("finetune mode backpropagates into the audio encoder") {
  AgreeConfig cfg = tiny_agree_cfg();
  cfg.audio_mode = AudioMode::finetune_vae;
  VaeModel vae(tiny_vae_cfg(), 2);
  AgreeModel model(cfg, 8, 4);
  auto pairs = make_pairs(1, 256, 13);

  vae.params().zero_grads();
  model.params().zero_grads();
  auto row = model.embed_audio_node(vae, pairs[0].rir);
  backward(mean_all(square(row)));
  double asum = 0.0;
  auto p = vae.params().find("enc.in.v");
  REQUIRE(p->grad.count() > 0);
  for (double g : p->grad.data) asum += std::abs(g);
  CHECK(asum > 0.0);
}

TEST_CASE("initial loss sits near ln B for random projections") {
  // Random unit rows at the default embedding width: similarities concentrate
  // near zero, so both CE terms sit close to the uniform-softmax value ln B.
  Rng rng(17);
  AgreeConfig cfg;  // embed_dim 512, log_lambda_init 2.659
  auto lam = constant(Tensor::from({std::exp(cfg.log_lambda_init)}, {1}));
  const long B = 16;
  const double loss = agree_contrastive_loss(constant(unit_rows(B, cfg.embed_dim, rng)),
                                             constant(unit_rows(B, cfg.embed_dim, rng)), lam)
                          ->scalar();
  const double lnB = std::log(double(B));
  CHECK(loss > 0.8 * lnB);
  CHECK(loss < 1.2 * lnB);
}

TEST_CASE("short contrastive runs are seed-deterministic") {
  VaeModel vae(tiny_vae_cfg(), 2);
  auto pairs = make_pairs(8, 256, 19);
  AgreeTrainConfig tc;
  tc.agree = tiny_agree_cfg();
  tc.agree.batch_size = 8;
  tc.agree.warmup_steps = 5;
  tc.steps = 12;
  tc.seed = 3;
  auto r1 = train_agree(pairs, vae, tc);
  auto r2 = train_agree(pairs, vae, tc);
  REQUIRE(r1.log.size() == r2.log.size());
  for (size_t i = 0; i < r1.log.size(); ++i) CHECK(r1.log[i].loss == r2.log[i].loss);
}

TEST_CASE("contrastive training aligns matched pairs diagonally") {
  VaeModel vae(tiny_vae_cfg(), 2);
  auto pairs = make_pairs(64, 256, 23);

  const std::string dir = "agree_test_out";
  std::filesystem::remove_all(dir);

  AgreeTrainConfig tc;
  tc.agree = tiny_agree_cfg();
  tc.agree.batch_size = 64;
  tc.agree.lr = 3e-3;
  tc.agree.warmup_steps = 30;
  tc.steps = 300;
  tc.seed = 6;
  tc.out_dir = dir;
  AgreeModel trained(tc.agree, 8, 0);
  auto res = train_agree(pairs, vae, tc, &trained);

  INFO("loss first " << res.loss_first << " last " << res.loss_last);
  CHECK(res.loss_last < res.loss_first);

  // In-batch similarity: the diagonal must dominate the off-diagonal mean.
  std::vector<Tensor> G, A;
  for (const auto& p : pairs) {
    G.push_back(trained.embed_geometry(p.rmap));
    A.push_back(trained.embed_audio(vae, p.rir));
  }
  double diag = 0.0, off = 0.0;
  for (size_t i = 0; i < G.size(); ++i)
    for (size_t j = 0; j < A.size(); ++j) {
      double s = 0.0;
      for (long k = 0; k < 32; ++k) s += G[i].data[k] * A[j].data[k];
      (i == j ? diag : off) += s;
    }
  diag /= double(G.size());
  off /= double(G.size() * (G.size() - 1));
  INFO("diag " << diag << " off " << off);
  CHECK(diag > off);

  // The self-contained checkpoint reproduces both embedders bit-exactly.
  REQUIRE(std::filesystem::exists(res.ckpt_path));
  LoadedAgreeModel loaded = load_agree_model(res.ckpt_path);
  Tensor ga = loaded.model.embed_geometry(pairs[0].rmap);
  Tensor aa = loaded.model.embed_audio(loaded.vae, pairs[0].rir);
  Tensor ge = trained.embed_geometry(pairs[0].rmap);
  Tensor ae = trained.embed_audio(vae, pairs[0].rir);
  for (long i = 0; i < 32; ++i) {
    CHECK(ga.data[i] == ge.data[i]);
    CHECK(aa.data[i] == ae.data[i]);
  }

  std::filesystem::remove_all(dir);
}
