// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "rirflow/nn/graph.hpp"
#include "rirflow/signal/stft.hpp"

namespace rirflow {

// Differentiable STFT of a rank-1 signal node.  The windowed-frame matrix
// Xw [win, T] turns analysis and its adjoint into two small GEMMs.

namespace detail {

inline Tensor frame_matrix(const Tensor& x, const StftBasis& basis, long T) {
  const auto& p = basis.params;
  const long N = x.count(), W = p.win_length;
  Tensor xw = Tensor::zeros({W, T});
  for (long t = 0; t < T; ++t)
    for (long i = 0; i < W; ++i) {
      const long j = t * p.hop_length + i;
      if (j < N) xw.data[i * T + t] = x.data[j] * basis.window[i];
    }
  return xw;
}

inline void scatter_frame_grads(const Tensor& dxw, const StftBasis& basis, long N,
                                std::vector<double>& xg) {
  const auto& p = basis.params;
  const long W = p.win_length, T = dxw.shape[1];
  for (long t = 0; t < T; ++t)
    for (long i = 0; i < W; ++i) {
      const long j = t * p.hop_length + i;
      if (j < N) xg[j] += dxw.data[i * T + t] * basis.window[i];
    }
}

}  // namespace detail

/// Complex STFT node: x [N] -> [2, F, T] (re, im).
inline NodePtr stft_complex_node(const NodePtr& x, const std::shared_ptr<StftBasis>& basis) {
  if (x->value.rank() != 1) throw std::invalid_argument("stft_complex_node: rank-1 input");
  const auto& p = basis->params;
  const long N = x->value.count(), T = p.frames(N), F = p.bins(), W = p.win_length;
  Tensor xw = detail::frame_matrix(x->value, *basis, T);
  Tensor v = Tensor::zeros({2, F, T});
  CMapMat C(basis->cos_mat.data(), F, W), S(basis->sin_mat.data(), F, W);
  CMapMat Xw(xw.data.data(), W, T);
  MapMat(v.data.data(), F, T).noalias() = C * Xw;
  MapMat(v.data.data() + F * T, F, T).noalias() = -(S * Xw);
  return apply(std::move(v), {x}, [basis, N, T, F, W](Node& n) {
    CMapMat dRe(n.grad.data.data(), F, T), dIm(n.grad.data.data() + F * T, F, T);
    CMapMat C(basis->cos_mat.data(), F, W), S(basis->sin_mat.data(), F, W);
    Tensor dxw = Tensor::zeros({W, T});
    MapMat(dxw.data.data(), W, T).noalias() = C.transpose() * dRe - S.transpose() * dIm;
    detail::scatter_frame_grads(dxw, *basis, N, n.inputs[0]->g().data);
  });
}

/// Magnitude STFT node: x [N] -> [F, T].  Forward is the exact magnitude;
/// the backward pass guards the 1/|X| factor to stay finite at zeros.
inline NodePtr stft_mag_node(const NodePtr& x, const std::shared_ptr<StftBasis>& basis,
                             double grad_eps = 1e-12) {
  if (x->value.rank() != 1) throw std::invalid_argument("stft_mag_node: rank-1 input");
  const auto& p = basis->params;
  const long N = x->value.count(), T = p.frames(N), F = p.bins(), W = p.win_length;
  Tensor xw = detail::frame_matrix(x->value, *basis, T);
  auto re = std::make_shared<Tensor>(Tensor::zeros({F, T}));
  auto im = std::make_shared<Tensor>(Tensor::zeros({F, T}));
  CMapMat C(basis->cos_mat.data(), F, W), S(basis->sin_mat.data(), F, W);
  CMapMat Xw(xw.data.data(), W, T);
  MapMat(re->data.data(), F, T).noalias() = C * Xw;
  MapMat(im->data.data(), F, T).noalias() = -(S * Xw);
  Tensor v = Tensor::zeros({F, T});
  for (long i = 0; i < F * T; ++i) v.data[i] = std::hypot(re->data[i], im->data[i]);
  return apply(std::move(v), {x}, [basis, N, T, F, W, re, im, grad_eps](Node& n) {
    Tensor dre = Tensor::zeros({F, T}), dim = Tensor::zeros({F, T});
    for (long i = 0; i < F * T; ++i) {
      const double inv = n.grad.data[i] / std::max(n.value.data[i], grad_eps);
      dre.data[i] = inv * re->data[i];
      dim.data[i] = inv * im->data[i];
    }
    CMapMat C(basis->cos_mat.data(), F, W), S(basis->sin_mat.data(), F, W);
    CMapMat dRe(dre.data.data(), F, T), dIm(dim.data.data(), F, T);
    Tensor dxw = Tensor::zeros({W, T});
    MapMat(dxw.data.data(), W, T).noalias() = C.transpose() * dRe - S.transpose() * dIm;
    detail::scatter_frame_grads(dxw, *basis, N, n.inputs[0]->g().data);
  });
}

}  // namespace rirflow
