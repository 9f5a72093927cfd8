// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rirflow/nn/layers.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Learning-rate schedule: linear warmup then cosine decay to zero.
// ---------------------------------------------------------------------------

inline double cosine_warmup_lr(double base_lr, long step, long total_steps, long warmup_steps) {
  if (total_steps <= 0) throw std::invalid_argument("cosine_warmup_lr: total_steps <= 0");
  if (warmup_steps > 0 && step < warmup_steps) return base_lr * double(step + 1) / warmup_steps;
  if (total_steps <= warmup_steps) return base_lr;
  const double u = double(step - warmup_steps) / double(total_steps - warmup_steps);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * std::min(u, 1.0)));
}

// ---------------------------------------------------------------------------
// AdamW (decoupled weight decay)
// ---------------------------------------------------------------------------

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class AdamW {
 public:
  AdamW(const ParamStore& ps, AdamWConfig cfg) : cfg_(cfg) {
    m_.reserve(ps.items.size());
    v_.reserve(ps.items.size());
    for (const auto& [k, p] : ps.items) {
      m_.push_back(Tensor::zeros(p->value.shape));
      v_.push_back(Tensor::zeros(p->value.shape));
    }
  }

  /// One update using the gradients currently stored on the parameters.
  /// `lr` overrides the configured rate (pass the scheduled value).
  void step(ParamStore& ps, double lr) {
    if (ps.items.size() != m_.size()) throw std::logic_error("AdamW: store size changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t i = 0; i < ps.items.size(); ++i) {
      auto& p = ps.items[i].second;
      if (p->grad.data.empty()) continue;
      auto& val = p->value.data;
      auto& g = p->grad.data;
      auto& m = m_[i].data;
      auto& v = v_[i].data;
      for (size_t j = 0; j < val.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double mh = m[j] / bc1, vh = v[j] / bc2;
        val[j] -= lr * cfg_.weight_decay * val[j];
        val[j] -= lr * mh / (std::sqrt(vh) + cfg_.eps);
      }
    }
  }

  void step(ParamStore& ps) { step(ps, cfg_.lr); }

  long steps_taken() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Exponential moving average of parameters
// ---------------------------------------------------------------------------

class Ema {
 public:
  Ema(const ParamStore& ps, double decay) : decay_(decay) {
    shadow_.reserve(ps.items.size());
    for (const auto& [k, p] : ps.items) shadow_.push_back(p->value);
  }

  void update(const ParamStore& ps) {
    if (ps.items.size() != shadow_.size()) throw std::logic_error("Ema: store size changed");
    for (size_t i = 0; i < shadow_.size(); ++i) {
      const auto& val = ps.items[i].second->value.data;
      auto& s = shadow_[i].data;
      for (size_t j = 0; j < s.size(); ++j) s[j] = decay_ * s[j] + (1.0 - decay_) * val[j];
    }
  }

  /// Write the averaged weights into the live parameters.
  void apply_to(ParamStore& ps) const {
    if (ps.items.size() != shadow_.size()) throw std::logic_error("Ema: store size changed");
    for (size_t i = 0; i < shadow_.size(); ++i) ps.items[i].second->value = shadow_[i];
  }

  const std::vector<Tensor>& shadow() const { return shadow_; }
  std::vector<Tensor>& shadow() { return shadow_; }
  double decay() const { return decay_; }

 private:
  double decay_;
  std::vector<Tensor> shadow_;
};

}  // namespace rirflow
