// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "rirflow/core/rng.hpp"
#include "rirflow/nn/gradcheck.hpp"
#include "rirflow/vae/discriminator.hpp"
#include "rirflow/vae/losses.hpp"
#include "rirflow/vae/train.hpp"
#include "rirflow/vae/vae.hpp"

using namespace rirflow;

namespace {

Tensor randn(std::vector<long> shape, Rng& rng, double s = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.data) x = s * rng.normal();
  return t;
}

RirWaveform decaying_noise(long n, uint64_t seed, double t60 = 0.12, int sr = 8000) {
  Rng rng(seed);
  RirWaveform w;
  w.sample_rate = sr;
  w.samples.resize(n);
  for (long i = 0; i < n; ++i)
    w.samples[i] = 0.25 * rng.normal() * std::exp(-6.908 * (double(i) / sr) / t60);
  return w;
}

/// Small configuration for fast training tests: 512-sample inputs.
VaeConfig tiny_cfg() {
  VaeConfig c;
  c.base_width = 8;
  c.disc_windows = {128, 64, 32};
  c.disc_channels = 4;
  c.mr_windows = {128, 64};
  return c;
}

}  // namespace

TEST_CASE("encode maps 2048 samples to a 32x128 latent grid") {
  VaeConfig cfg = desk_vae_config();
  REQUIRE(cfg.total_stride() == 16);
  VaeModel model(cfg, 11);
  RirWaveform w = decaying_noise(2048, 5);
  PosteriorParams post = model.encode(w);
  CHECK(post.mean.shape == std::vector<long>({32, 128}));
  CHECK(post.log_var.shape == std::vector<long>({32, 128}));
  post.validate();
  for (double v : post.log_var.data) {
    CHECK(v >= -30.0);
    CHECK(v <= 20.0);
  }
}

TEST_CASE("indivisible input length is rejected") {
  VaeModel model(tiny_cfg(), 3);
  RirWaveform w = decaying_noise(500, 1);  // 500 % 16 != 0
  CHECK_THROWS_WITH(model.encode(w), Catch::Matchers::ContainsSubstring("divisible"));
}

TEST_CASE("vae_sample with zero noise returns the mean") {
  Rng rng(7);
  PosteriorParams post;
  post.mean = randn({4, 6}, rng);
  post.log_var = randn({4, 6}, rng, 0.3);
  Tensor z = vae_sample(post, Tensor::zeros({4, 6}));
  for (long i = 0; i < z.count(); ++i) CHECK(z.data[i] == post.mean.data[i]);

  // and with noise, matches mean + sigma * eps elementwise
  Tensor eps = randn({4, 6}, rng);
  Tensor z2 = vae_sample(post, eps);
  for (long i = 0; i < z2.count(); ++i)
    CHECK(z2.data[i] ==
          Catch::Approx(post.mean.data[i] + std::exp(0.5 * post.log_var.data[i]) * eps.data[i])
              .epsilon(1e-12));
}

TEST_CASE("decoder output lies strictly inside (-1, 1) and matches input length") {
  VaeModel model(tiny_cfg(), 19);
  Rng rng(23);
  Tensor z = randn({32, 32}, rng, 3.0);
  RirWaveform out = model.decode(z, 8000);
  CHECK(out.samples.size() == 512);
  for (double v : out.samples) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }

  // round trip preserves length, and encode/decode are deterministic
  RirWaveform w = decaying_noise(512, 2);
  PosteriorParams p1 = model.encode(w);
  PosteriorParams p2 = model.encode(w);
  for (long i = 0; i < p1.mean.count(); ++i) CHECK(p1.mean.data[i] == p2.mean.data[i]);
  RirWaveform rec = model.decode(p1.mean, w.sample_rate);
  CHECK(rec.samples.size() == w.samples.size());
}

TEST_CASE("mr loss: zero for identical inputs, exact parts for a doubled spectrum") {
  Rng rng(31);
  auto bases = mr_bases({128, 64});
  Tensor xs = randn({512}, rng, 0.1);
  auto x = constant(xs);

  auto same = mr_loss(x, constant(xs), bases);
  CHECK(same.total->scalar() == Catch::Approx(0.0).margin(1e-9));

  Tensor x2 = xs;
  for (auto& v : x2.data) v *= 2.0;  // STFT is linear: Xhat = 2X
  auto doubled = mr_loss(x, constant(x2), bases);
  for (double sc : doubled.sc) CHECK(sc == Catch::Approx(1.0).epsilon(1e-9));
  for (double ed : doubled.ed)
    CHECK(ed == Catch::Approx(10.0 * std::log10(4.0)).epsilon(1e-9));
  // sl part: log((2X+eta)/(X+eta)) ~= log 2 everywhere
  for (double sl : doubled.sl) CHECK(sl == Catch::Approx(std::log(2.0)).epsilon(0.01));

  // zero reference spectrum errors in the sc term
  auto zero = constant(Tensor::zeros({512}));
  CHECK_THROWS_WITH(mr_loss(zero, x, bases),
                    Catch::Matchers::ContainsSubstring("zero reference spectrum"));
}

TEST_CASE("kl loss closed-form values and nonnegativity") {
  // mu = 0, sigma = 1 -> 0
  auto mean0 = constant(Tensor::zeros({3, 4}));
  auto lv0 = constant(Tensor::zeros({3, 4}));
  CHECK(kl_loss(mean0, lv0)->scalar() == Catch::Approx(0.0).margin(1e-15));

  // mu = 1, sigma = 1, single dim -> 0.5
  auto mean1 = constant(Tensor::full({1}, 1.0));
  auto lv1 = constant(Tensor::zeros({1}));
  CHECK(kl_loss(mean1, lv1)->scalar() == Catch::Approx(0.5).epsilon(1e-12));

  // random posteriors stay nonnegative
  Rng rng(37);
  for (int i = 0; i < 20; ++i) {
    auto m = constant(randn({2, 5}, rng));
    auto lv = constant(randn({2, 5}, rng));
    CHECK(kl_loss(m, lv)->scalar() >= 0.0);
  }
}

TEST_CASE("discriminator shape contract on desk windows") {
  VaeConfig cfg = desk_vae_config();
  MsStftDiscriminator disc(cfg.disc_windows, cfg.disc_channels, 41);
  Rng rng(43);
  auto x = constant(randn({2048}, rng, 0.1));
  DiscOutput out = disc.forward(x);
  REQUIRE(out.scores.size() == 5);
  REQUIRE(out.features.size() == 5);
  for (size_t s = 0; s < 5; ++s) {
    CHECK(out.features[s].size() >= 4);
    CHECK(out.scores[s]->value.all_finite());
    for (const auto& f : out.features[s]) CHECK(f->value.all_finite());
  }

  // too-short input fails the largest window
  auto shorty = constant(randn({256}, rng));
  CHECK_THROWS_WITH(disc.forward(shorty), Catch::Matchers::ContainsSubstring("too short"));
}

TEST_CASE("hinge and feature losses hit their closed-form anchors") {
  auto make_const_output = [](double score, int scales) {
    DiscOutput o;
    for (int s = 0; s < scales; ++s) {
      o.scores.push_back(constant(Tensor::full({1, 3, 4}, score)));
      o.features.push_back({constant(Tensor::full({2, 3, 4}, 0.5 + s))});
    }
    return o;
  };

  // D(x) = 2, D(xhat) = -2 at every scale -> hinge 0
  auto real2 = make_const_output(2.0, 5);
  auto fake2 = make_const_output(-2.0, 5);
  CHECK(hinge_disc_loss(real2, fake2)->scalar() == Catch::Approx(0.0).margin(1e-15));

  // D = 0 everywhere -> 2 per scale
  auto real0 = make_const_output(0.0, 5);
  auto fake0 = make_const_output(0.0, 5);
  CHECK(hinge_disc_loss(real0, fake0)->scalar() == Catch::Approx(10.0).epsilon(1e-12));

  // generator adversarial term: -sum of means
  CHECK(gen_adv_loss(fake2)->scalar() == Catch::Approx(10.0).epsilon(1e-12));

  // identical features -> 0
  CHECK(feat_match_loss(real0, real0)->scalar() == Catch::Approx(0.0).margin(1e-15));

  // mismatched shapes error
  DiscOutput bad = make_const_output(0.0, 5);
  bad.features[0][0] = constant(Tensor::full({2, 3, 5}, 1.0));
  CHECK_THROWS_WITH(feat_match_loss(real0, bad),
                    Catch::Matchers::ContainsSubstring("shape mismatch"));
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(53);
  auto bases = mr_bases({64, 32});

  SECTION("mr loss") {
    auto xhat = leaf(randn({128}, rng, 0.2));
    auto x = constant(randn({128}, rng, 0.2));
    auto res = grad_check([&] { return mr_loss(x, xhat, bases).total; }, {xhat}, 1e-6);
    CHECK(res.max_rel_err < 1e-4);
  }
  SECTION("kl loss") {
    auto mean = leaf(randn({3, 8}, rng));
    auto lv = leaf(randn({3, 8}, rng, 0.5));
    auto res = grad_check([&] { return kl_loss(mean, lv); }, {mean, lv});
    CHECK(res.max_rel_err < 1e-4);
  }
  SECTION("snake") {
    auto x = leaf(randn({2, 9}, rng));
    auto beta = leaf(Tensor::from({0.7, 1.9}, {2}));
    auto res = grad_check([&] { return mean_all(square(snake(x, beta))); }, {x, beta});
    CHECK(res.max_rel_err < 1e-4);
  }
  SECTION("encode/decode wiring reaches every vae parameter class") {
    // A smooth objective keeps finite differences trustworthy; the mr-loss
    // sections above already cover the high-curvature log terms op-level.
    VaeConfig cfg = tiny_cfg();
    cfg.base_width = 4;
    cfg.latent_channels = 4;
    VaeModel model(cfg, 59);
    RirWaveform w = decaying_noise(64, 8);
    auto build = [&] {
      auto x2 = constant(Tensor::from(w.samples, {1, 64}));
      auto post = model.encode_node(x2);
      auto xhat = model.decode_node(post.mean);
      return add(mse(xhat, x2), scale(kl_loss(post.mean, post.log_var), 1e-4));
    };
    // spot check a conv direction, a gain, a bias, and a snake beta
    std::vector<NodePtr> probes{model.params().find("enc.stage0.down.v"),
                                model.params().find("enc.stage0.down.g"),
                                model.params().find("dec.head.b"),
                                model.params().find("enc.head_act.log_beta")};
    auto res = grad_check(build, probes, 1e-5);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("snake activation spec anchors") {
  auto beta = constant(Tensor::full({1}, 1.0));
  auto zero = snake(constant(Tensor::zeros({1, 1})), beta);
  CHECK(zero->value.data[0] == 0.0);
  auto pi = snake(constant(Tensor::full({1, 1}, std::numbers::pi)), beta);
  CHECK(pi->value.data[0] == Catch::Approx(std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("short vae training run learns, reproduces, and round-trips") {
  std::vector<RirWaveform> items;
  for (int i = 0; i < 8; ++i) items.push_back(decaying_noise(512, 100 + i));

  VaeTrainConfig tc;
  tc.vae = tiny_cfg();
  tc.steps = 200;
  tc.batch_size = 8;
  tc.seed = 77;
  VaeModel model(tc.vae, 0);
  VaeTrainResult r1 = train_vae(items, tc, &model);
  CHECK(r1.mr_last < r1.mr_first);

  VaeTrainResult r2 = train_vae(items, tc);
  REQUIRE(r1.log.size() == r2.log.size());
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].mr == r2.log[i].mr);
    CHECK(r1.log[i].disc == r2.log[i].disc);
  }

  // checkpoint round trip: identical reconstructions
  const std::string dir = (std::filesystem::temp_directory_path() / "rf_vae_test").string();
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/vae.ckpt";
  save_vae_checkpoint(model, path, tc.steps);
  VaeModel loaded = load_vae_model(path);
  PosteriorParams p_orig = model.encode(items[0]);
  PosteriorParams p_load = loaded.encode(items[0]);
  for (long i = 0; i < p_orig.mean.count(); ++i) {
    CHECK(p_load.mean.data[i] == p_orig.mean.data[i]);
    CHECK(p_load.log_var.data[i] == p_orig.log_var.data[i]);
  }
  RirWaveform rec_o = model.decode(p_orig.mean, 8000);
  RirWaveform rec_l = loaded.decode(p_load.mean, 8000);
  for (size_t i = 0; i < rec_o.samples.size(); ++i)
    CHECK(rec_l.samples[i] == rec_o.samples[i]);
  std::filesystem::remove_all(dir);
}
