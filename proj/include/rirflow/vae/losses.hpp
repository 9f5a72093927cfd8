// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "rirflow/nn/stft_op.hpp"
#include "rirflow/vae/discriminator.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Multi-resolution STFT reconstruction loss: per resolution, spectral
// convergence + mean-L1 log magnitude + mean-L1 energy-decay mismatch in dB,
// summed over resolutions.
// ---------------------------------------------------------------------------

struct MrLossParts {
  NodePtr total;
  std::vector<double> sc, sl, ed;  // per-resolution values
};

inline std::vector<std::shared_ptr<StftBasis>> mr_bases(const std::vector<long>& windows) {
  std::vector<std::shared_ptr<StftBasis>> out;
  for (long w : windows) {
    StftParams p;
    p.fft_size = static_cast<int>(w);
    p.win_length = static_cast<int>(w);
    p.hop_length = static_cast<int>(std::max<long>(w / 4, 1));
    out.push_back(std::make_shared<StftBasis>(p));
  }
  return out;
}

inline MrLossParts mr_loss(const NodePtr& x, const NodePtr& xhat,
                           const std::vector<std::shared_ptr<StftBasis>>& bases,
                           double eta = 1e-7) {
  if (x->value.count() != xhat->value.count())
    throw std::invalid_argument("mr_loss: length mismatch");
  MrLossParts parts;
  NodePtr total;
  for (const auto& basis : bases) {
    auto mx = stft_mag_node(x, basis);
    auto mh = stft_mag_node(xhat, basis);
    const long F = mx->value.shape[0];

    // spectral convergence ||X - Xhat||_F / ||X||_F
    auto den_sq = sum_all(square(mx));
    if (den_sq->value.data[0] <= 0.0)
      throw std::invalid_argument("mr_loss: zero reference spectrum in sc term");
    auto sc = div(sqrt_op(sum_all(square(sub(mx, mh)))), sqrt_op(den_sq));

    // mean L1 of log magnitudes
    auto sl = mean_all(abs_op(sub(log_guard(mx, eta), log_guard(mh, eta))));

    // energy decay: E_d sums squared magnitudes over frames k >= d
    const double db = 10.0 / std::numbers::ln10;
    auto ex = reverse_cumsum_vec(scale(mean_over_rows(square(mx)), double(F)));
    auto eh = reverse_cumsum_vec(scale(mean_over_rows(square(mh)), double(F)));
    auto ed = mean_all(
        abs_op(sub(scale(log_guard(ex, 1e-30), db), scale(log_guard(eh, 1e-30), db))));

    parts.sc.push_back(sc->scalar());
    parts.sl.push_back(sl->scalar());
    parts.ed.push_back(ed->scalar());
    auto term = add(add(sc, sl), ed);
    total = total ? add(total, term) : term;
  }
  parts.total = total;
  return parts;
}

// ---------------------------------------------------------------------------
// KL divergence to the standard normal: 0.5 * sum_j (mu^2 + sigma^2 - 1
// - log sigma^2).  Batch averaging is the caller's 1/B scale.
// ---------------------------------------------------------------------------

inline NodePtr kl_loss(const NodePtr& mean, const NodePtr& log_var) {
  detail::check_same_shape(mean, log_var, "kl_loss");
  auto var = exp_op(log_var);
  auto per_dim = sub(sub(add(square(mean), var), constant(Tensor::full(mean->value.shape, 1.0))),
                     log_var);
  return scale(sum_all(per_dim), 0.5);
}

// ---------------------------------------------------------------------------
// Adversarial pieces (hinge formulation)
// ---------------------------------------------------------------------------

/// Discriminator objective: sum over scales of
/// mean max(0, 1 - D(x)) + mean max(0, 1 + D(xhat)).
inline NodePtr hinge_disc_loss(const DiscOutput& real, const DiscOutput& fake) {
  if (real.scores.size() != fake.scores.size())
    throw std::invalid_argument("hinge_disc_loss: scale count mismatch");
  NodePtr total;
  for (size_t s = 0; s < real.scores.size(); ++s) {
    auto r = mean_all(relu(add_scalar(scale(real.scores[s], -1.0), 1.0)));
    auto f = mean_all(relu(add_scalar(fake.scores[s], 1.0)));
    auto term = add(r, f);
    total = total ? add(total, term) : term;
  }
  return total;
}

/// Generator adversarial term: sum over scales of -mean D(xhat).
inline NodePtr gen_adv_loss(const DiscOutput& fake) {
  NodePtr total;
  for (const auto& s : fake.scores) {
    auto term = scale(mean_all(s), -1.0);
    total = total ? add(total, term) : term;
  }
  return total;
}

/// Feature matching: mean over scales and layers of
/// mean|f_real - f_fake| / mean|f_real|.
inline NodePtr feat_match_loss(const DiscOutput& real, const DiscOutput& fake,
                               double eps = 1e-12) {
  if (real.features.size() != fake.features.size())
    throw std::invalid_argument("feat_match_loss: scale count mismatch");
  NodePtr total;
  long n = 0;
  for (size_t s = 0; s < real.features.size(); ++s) {
    if (real.features[s].size() != fake.features[s].size())
      throw std::invalid_argument("feat_match_loss: layer count mismatch");
    for (size_t l = 0; l < real.features[s].size(); ++l) {
      const auto& fr = real.features[s][l];
      const auto& ff = fake.features[s][l];
      if (!fr->value.same_shape(ff->value))
        throw std::invalid_argument("feat_match_loss: feature shape mismatch");
      auto term = div(l1(fr, ff), add_scalar(mean_all(abs_op(fr)), eps));
      total = total ? add(total, term) : term;
      ++n;
    }
  }
  return scale(total, 1.0 / n);
}

}  // namespace rirflow
