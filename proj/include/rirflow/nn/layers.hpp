// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rirflow/core/rng.hpp"
#include "rirflow/nn/conv.hpp"
#include "rirflow/nn/graph.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Parameter registry.  Layers register named leaves here; the optimizer and
// checkpoint code walk the registry in registration order.
// ---------------------------------------------------------------------------

struct ParamStore {
  std::vector<std::pair<std::string, NodePtr>> items;

  NodePtr add(const std::string& name, Tensor init) {
    for (const auto& [k, v] : items)
      if (k == name) throw std::invalid_argument("ParamStore: duplicate name " + name);
    auto n = leaf(std::move(init));
    items.emplace_back(name, n);
    return n;
  }

  NodePtr find(const std::string& name) const {
    for (const auto& [k, v] : items)
      if (k == name) return v;
    throw std::out_of_range("ParamStore: unknown name " + name);
  }

  long scalar_count() const {
    long n = 0;
    for (const auto& [k, v] : items) n += v->value.count();
    return n;
  }

  void zero_grads() {
    for (auto& [k, v] : items) v->zero_grad();
  }

  /// Round every parameter to the nearest float32.  Values then survive a
  /// float32 save/load round trip bit exactly.
  void snap_to_float32() {
    for (auto& [k, v] : items)
      for (auto& x : v->value.data) x = static_cast<double>(static_cast<float>(x));
  }
};

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

inline Tensor init_uniform(std::vector<long> shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.data) x = (2.0 * rng.uniform() - 1.0) * bound;
  return t;
}

/// Fan-in scaled uniform init, bound = sqrt(1 / fan_in).
inline Tensor init_fan_in(std::vector<long> shape, long fan_in, Rng& rng) {
  return init_uniform(std::move(shape), std::sqrt(1.0 / fan_in), rng);
}

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

struct Linear {
  NodePtr w, b;

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, long in, long out, Rng& rng,
         bool bias = true, bool zero_init = false) {
    Tensor wi = zero_init ? Tensor::zeros({out, in}) : init_fan_in({out, in}, in, rng);
    w = ps.add(name + ".w", std::move(wi));
    if (bias) b = ps.add(name + ".b", Tensor::zeros({out}));
  }

  NodePtr operator()(const NodePtr& x) const { return linear(x, w, b); }
};

// ---------------------------------------------------------------------------
// Convolution layers (optionally weight normalized: w = g * v / ||v||, the
// norm taken per output row of the flattened weight)
// ---------------------------------------------------------------------------

namespace detail {

struct ConvWeight {
  NodePtr v;            // raw weight (or the direct weight when !wn)
  NodePtr g;            // per-row gains when wn
  std::vector<long> shape;
  bool wn = false;

  NodePtr node() const {
    if (!wn) return v;
    const long rows = shape[0];
    const long cols = Tensor::count_of(shape) / rows;
    auto flat = reshape(v, {rows, cols});
    auto unit = l2_normalize_rows(flat);
    return reshape(mul_colvec(unit, g), shape);
  }
};

inline ConvWeight make_conv_weight(ParamStore& ps, const std::string& name,
                                   std::vector<long> shape, long fan_in, Rng& rng, bool wn) {
  ConvWeight cw;
  cw.shape = shape;
  cw.wn = wn;
  Tensor init = init_fan_in(shape, fan_in, rng);
  if (wn) {
    const long rows = shape[0];
    const long cols = Tensor::count_of(shape) / rows;
    Tensor g = Tensor::zeros({rows});
    for (long r = 0; r < rows; ++r) {
      double s = 0.0;
      for (long c = 0; c < cols; ++c) s += init.data[r * cols + c] * init.data[r * cols + c];
      g.data[r] = std::sqrt(s);
    }
    cw.v = ps.add(name + ".v", std::move(init));
    cw.g = ps.add(name + ".g", std::move(g));
  } else {
    cw.v = ps.add(name + ".w", std::move(init));
  }
  return cw;
}

}  // namespace detail

struct Conv1dLayer {
  detail::ConvWeight w;
  NodePtr b;
  long stride = 1, pad = 0, dil = 1;

  Conv1dLayer() = default;
  Conv1dLayer(ParamStore& ps, const std::string& name, long cin, long cout, long k, Rng& rng,
              long stride_ = 1, long pad_ = 0, long dil_ = 1, bool wn = true)
      : stride(stride_), pad(pad_), dil(dil_) {
    w = detail::make_conv_weight(ps, name, {cout, cin, k}, cin * k, rng, wn);
    b = ps.add(name + ".b", Tensor::zeros({cout}));
  }

  NodePtr operator()(const NodePtr& x) const {
    return conv1d(x, w.node(), b, stride, pad, dil);
  }
};

struct ConvT1dLayer {
  detail::ConvWeight w;  // [Cin, Cout, K]
  NodePtr b;
  long stride = 1, pad = 0;

  ConvT1dLayer() = default;
  ConvT1dLayer(ParamStore& ps, const std::string& name, long cin, long cout, long k, Rng& rng,
               long stride_ = 1, long pad_ = 0, bool wn = true)
      : stride(stride_), pad(pad_) {
    w = detail::make_conv_weight(ps, name, {cin, cout, k}, cin * k, rng, wn);
    b = ps.add(name + ".b", Tensor::zeros({cout}));
  }

  NodePtr operator()(const NodePtr& x) const {
    return conv_transpose1d(x, w.node(), b, stride, pad);
  }
};

struct Conv2dLayer {
  detail::ConvWeight w;  // [Cout, Cin, kh, kw]
  NodePtr b;
  long stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0, dil_h = 1, dil_w = 1;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore& ps, const std::string& name, long cin, long cout, long kh, long kw,
              Rng& rng, long sh = 1, long sw = 1, long ph = 0, long pw = 0, long dh = 1,
              long dw = 1, bool wn = true)
      : stride_h(sh), stride_w(sw), pad_h(ph), pad_w(pw), dil_h(dh), dil_w(dw) {
    w = detail::make_conv_weight(ps, name, {cout, cin, kh, kw}, cin * kh * kw, rng, wn);
    b = ps.add(name + ".b", Tensor::zeros({cout}));
  }

  NodePtr operator()(const NodePtr& x) const {
    return conv2d(x, w.node(), b, stride_h, stride_w, pad_h, pad_w, dil_h, dil_w);
  }
};

// ---------------------------------------------------------------------------
// Multi-head attention over row-token matrices [T, D].
// ---------------------------------------------------------------------------

struct MultiheadAttention {
  Linear wq, wk, wv, wo;
  long heads = 1, dim = 0;

  MultiheadAttention() = default;
  MultiheadAttention(ParamStore& ps, const std::string& name, long d, long heads_, Rng& rng)
      : heads(heads_), dim(d) {
    if (d % heads_ != 0) throw std::invalid_argument("attention: dim not divisible by heads");
    wq = Linear(ps, name + ".q", d, d, rng);
    wk = Linear(ps, name + ".k", d, d, rng);
    wv = Linear(ps, name + ".v", d, d, rng);
    wo = Linear(ps, name + ".o", d, d, rng);
  }

  /// rope_pos, when given, applies rotary embeddings to queries and keys
  /// (self-attention use; both sequences must share the position list).
  NodePtr operator()(const NodePtr& q_in, const NodePtr& kv_in,
                     const std::vector<double>* rope_pos = nullptr) const {
    const long dh = dim / heads;
    auto q = wq(q_in), k = wk(kv_in), v = wv(kv_in);
    std::vector<NodePtr> outs;
    outs.reserve(heads);
    for (long h = 0; h < heads; ++h) {
      auto qh = slice_cols(q, h * dh, (h + 1) * dh);
      auto kh = slice_cols(k, h * dh, (h + 1) * dh);
      auto vh = slice_cols(v, h * dh, (h + 1) * dh);
      if (rope_pos) {
        qh = rope_rows(qh, *rope_pos);
        kh = rope_rows(kh, *rope_pos);
      }
      auto scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dh)));
      outs.push_back(matmul(softmax_rows(scores), vh));
    }
    return wo(concat_cols(outs));
  }
};

// ---------------------------------------------------------------------------
// Transformer feed-forward block
// ---------------------------------------------------------------------------

struct FeedForward {
  Linear fc1, fc2;

  FeedForward() = default;
  FeedForward(ParamStore& ps, const std::string& name, long d, long hidden, Rng& rng) {
    fc1 = Linear(ps, name + ".fc1", d, hidden, rng);
    fc2 = Linear(ps, name + ".fc2", hidden, d, rng);
  }

  NodePtr operator()(const NodePtr& x) const { return fc2(gelu(fc1(x))); }
};

}  // namespace rirflow
