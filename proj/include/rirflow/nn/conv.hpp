// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <vector>

#include "rirflow/nn/graph.hpp"

namespace rirflow {

// im2col-based conv1d / conv_transpose1d / conv2d.  All weights are explicit
// graph inputs so reparameterizations (weight norm) compose naturally.

namespace detail {

inline long conv_out_len(long in, long k, long stride, long pad, long dil) {
  const long eff = (k - 1) * dil + 1;
  const long num = in + 2 * pad - eff;
  if (num < 0) throw std::invalid_argument("conv: input shorter than kernel");
  return num / stride + 1;
}

}  // namespace detail

/// x: [Cin, L], w: [Cout, Cin, K], b: [Cout] (optional) -> [Cout, Lout].
inline NodePtr conv1d(const NodePtr& x, const NodePtr& w, const NodePtr& b = nullptr,
                      long stride = 1, long pad = 0, long dil = 1) {
  if (x->value.rank() != 2 || w->value.rank() != 3)
    throw std::invalid_argument("conv1d: x must be [C,L], w must be [Cout,Cin,K]");
  const long Cin = x->value.shape[0], L = x->value.shape[1];
  const long Cout = w->value.shape[0], K = w->value.shape[2];
  if (w->value.shape[1] != Cin) throw std::invalid_argument("conv1d: channel mismatch");
  const long Lout = detail::conv_out_len(L, K, stride, pad, dil);
  const long rows = Cin * K;

  // Xcol[(c,k), j] = x[c, j*stride + k*dil - pad]
  auto cols = std::make_shared<Tensor>(Tensor::zeros({rows, Lout}));
  for (long c = 0; c < Cin; ++c)
    for (long k = 0; k < K; ++k)
      for (long j = 0; j < Lout; ++j) {
        const long i = j * stride + k * dil - pad;
        if (i >= 0 && i < L) cols->data[(c * K + k) * Lout + j] = x->value.data[c * L + i];
      }
  Tensor v = Tensor::zeros({Cout, Lout});
  CMapMat W(w->value.data.data(), Cout, rows), X(cols->data.data(), rows, Lout);
  MapMat(v.data.data(), Cout, Lout).noalias() = W * X;
  std::vector<NodePtr> ins{x, w};
  if (b) {
    if (b->value.count() != Cout) throw std::invalid_argument("conv1d: bias shape mismatch");
    for (long o = 0; o < Cout; ++o)
      for (long j = 0; j < Lout; ++j) v.data[o * Lout + j] += b->value.data[o];
    ins.push_back(b);
  }
  return apply(std::move(v), std::move(ins),
               [Cin, L, Cout, K, Lout, rows, stride, pad, dil, cols](Node& n) {
                 CMapMat G(n.grad.data.data(), Cout, Lout);
                 if (n.inputs[1]->requires_grad) {
                   CMapMat X(cols->data.data(), rows, Lout);
                   MapMat(n.inputs[1]->g().data.data(), Cout, rows).noalias() +=
                       G * X.transpose();
                 }
                 if (n.inputs[0]->requires_grad) {
                   Tensor dcols = Tensor::zeros({rows, Lout});
                   CMapMat W(n.inputs[1]->value.data.data(), Cout, rows);
                   MapMat(dcols.data.data(), rows, Lout).noalias() = W.transpose() * G;
                   auto& xg = n.inputs[0]->g().data;
                   for (long c = 0; c < Cin; ++c)
                     for (long k = 0; k < K; ++k)
                       for (long j = 0; j < Lout; ++j) {
                         const long i = j * stride + k * dil - pad;
                         if (i >= 0 && i < L)
                           xg[c * L + i] += dcols.data[(c * K + k) * Lout + j];
                       }
                 }
                 if (n.inputs.size() > 2 && n.inputs[2]->requires_grad) {
                   auto& bg = n.inputs[2]->g().data;
                   for (long o = 0; o < Cout; ++o)
                     for (long j = 0; j < Lout; ++j) bg[o] += n.grad.data[o * Lout + j];
                 }
               });
}

/// Transposed conv1d. x: [Cin, L], w: [Cin, Cout, K], b: [Cout].
/// Lout = (L-1)*stride + K - 2*pad; the adjoint of conv1d with same params.
inline NodePtr conv_transpose1d(const NodePtr& x, const NodePtr& w,
                                const NodePtr& b = nullptr, long stride = 1, long pad = 0) {
  if (x->value.rank() != 2 || w->value.rank() != 3)
    throw std::invalid_argument("conv_transpose1d: x must be [C,L], w must be [Cin,Cout,K]");
  const long Cin = x->value.shape[0], L = x->value.shape[1];
  const long Cout = w->value.shape[1], K = w->value.shape[2];
  if (w->value.shape[0] != Cin) throw std::invalid_argument("conv_transpose1d: channel mismatch");
  const long Lout = (L - 1) * stride + K - 2 * pad;
  if (Lout <= 0) throw std::invalid_argument("conv_transpose1d: empty output");
  const long rows = Cout * K;

  // Ycol[(o,k), i] = sum_c w[c,o,k] x[c,i]; scatter Ycol into y[o, i*stride+k-pad].
  Tensor ycol = Tensor::zeros({rows, L});
  CMapMat W(w->value.data.data(), Cin, rows), X(x->value.data.data(), Cin, L);
  MapMat(ycol.data.data(), rows, L).noalias() = W.transpose() * X;
  Tensor v = Tensor::zeros({Cout, Lout});
  for (long o = 0; o < Cout; ++o)
    for (long k = 0; k < K; ++k)
      for (long i = 0; i < L; ++i) {
        const long j = i * stride + k - pad;
        if (j >= 0 && j < Lout) v.data[o * Lout + j] += ycol.data[(o * K + k) * L + i];
      }
  std::vector<NodePtr> ins{x, w};
  if (b) {
    if (b->value.count() != Cout)
      throw std::invalid_argument("conv_transpose1d: bias shape mismatch");
    for (long o = 0; o < Cout; ++o)
      for (long j = 0; j < Lout; ++j) v.data[o * Lout + j] += b->value.data[o];
    ins.push_back(b);
  }
  return apply(std::move(v), std::move(ins),
               [Cin, L, Cout, K, Lout, rows, stride, pad](Node& n) {
                 // dYcol[(o,k), i] = dy[o, i*stride + k - pad]
                 Tensor dycol = Tensor::zeros({rows, L});
                 for (long o = 0; o < Cout; ++o)
                   for (long k = 0; k < K; ++k)
                     for (long i = 0; i < L; ++i) {
                       const long j = i * stride + k - pad;
                       if (j >= 0 && j < Lout)
                         dycol.data[(o * K + k) * L + i] = n.grad.data[o * Lout + j];
                     }
                 CMapMat dY(dycol.data.data(), rows, L);
                 if (n.inputs[0]->requires_grad) {
                   CMapMat W(n.inputs[1]->value.data.data(), Cin, rows);
                   MapMat(n.inputs[0]->g().data.data(), Cin, L).noalias() += W * dY;
                 }
                 if (n.inputs[1]->requires_grad) {
                   CMapMat X(n.inputs[0]->value.data.data(), Cin, L);
                   MapMat(n.inputs[1]->g().data.data(), Cin, rows).noalias() +=
                       X * dY.transpose();
                 }
                 if (n.inputs.size() > 2 && n.inputs[2]->requires_grad) {
                   auto& bg = n.inputs[2]->g().data;
                   for (long o = 0; o < Cout; ++o)
                     for (long j = 0; j < Lout; ++j) bg[o] += n.grad.data[o * Lout + j];
                 }
               });
}

/// x: [Cin, H, W], w: [Cout, Cin, kh, kw] -> [Cout, Hout, Wout].
inline NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b = nullptr,
                      long stride_h = 1, long stride_w = 1, long pad_h = 0, long pad_w = 0,
                      long dil_h = 1, long dil_w = 1) {
  if (x->value.rank() != 3 || w->value.rank() != 4)
    throw std::invalid_argument("conv2d: x must be [C,H,W], w must be [Cout,Cin,kh,kw]");
  const long Cin = x->value.shape[0], H = x->value.shape[1], W = x->value.shape[2];
  const long Cout = w->value.shape[0], kh = w->value.shape[2], kw = w->value.shape[3];
  if (w->value.shape[1] != Cin) throw std::invalid_argument("conv2d: channel mismatch");
  const long Hout = detail::conv_out_len(H, kh, stride_h, pad_h, dil_h);
  const long Wout = detail::conv_out_len(W, kw, stride_w, pad_w, dil_w);
  const long rows = Cin * kh * kw, cols_n = Hout * Wout;

  auto cols = std::make_shared<Tensor>(Tensor::zeros({rows, cols_n}));
  for (long c = 0; c < Cin; ++c)
    for (long a = 0; a < kh; ++a)
      for (long d = 0; d < kw; ++d) {
        const long r = (c * kh + a) * kw + d;
        for (long i = 0; i < Hout; ++i) {
          const long hi = i * stride_h + a * dil_h - pad_h;
          if (hi < 0 || hi >= H) continue;
          for (long j = 0; j < Wout; ++j) {
            const long wi = j * stride_w + d * dil_w - pad_w;
            if (wi >= 0 && wi < W)
              cols->data[r * cols_n + i * Wout + j] = x->value.data[(c * H + hi) * W + wi];
          }
        }
      }
  Tensor v = Tensor::zeros({Cout, Hout, Wout});
  CMapMat Wm(w->value.data.data(), Cout, rows), X(cols->data.data(), rows, cols_n);
  MapMat(v.data.data(), Cout, cols_n).noalias() = Wm * X;
  std::vector<NodePtr> ins{x, w};
  if (b) {
    if (b->value.count() != Cout) throw std::invalid_argument("conv2d: bias shape mismatch");
    for (long o = 0; o < Cout; ++o)
      for (long j = 0; j < cols_n; ++j) v.data[o * cols_n + j] += b->value.data[o];
    ins.push_back(b);
  }
  return apply(std::move(v), std::move(ins),
               [Cin, H, W, Cout, kh, kw, Hout, Wout, rows, cols_n, stride_h, stride_w, pad_h,
                pad_w, dil_h, dil_w, cols](Node& n) {
                 CMapMat G(n.grad.data.data(), Cout, cols_n);
                 if (n.inputs[1]->requires_grad) {
                   CMapMat X(cols->data.data(), rows, cols_n);
                   MapMat(n.inputs[1]->g().data.data(), Cout, rows).noalias() +=
                       G * X.transpose();
                 }
                 if (n.inputs[0]->requires_grad) {
                   Tensor dcols = Tensor::zeros({rows, cols_n});
                   CMapMat Wm(n.inputs[1]->value.data.data(), Cout, rows);
                   MapMat(dcols.data.data(), rows, cols_n).noalias() = Wm.transpose() * G;
                   auto& xg = n.inputs[0]->g().data;
                   for (long c = 0; c < Cin; ++c)
                     for (long a = 0; a < kh; ++a)
                       for (long d = 0; d < kw; ++d) {
                         const long r = (c * kh + a) * kw + d;
                         for (long i = 0; i < Hout; ++i) {
                           const long hi = i * stride_h + a * dil_h - pad_h;
                           if (hi < 0 || hi >= H) continue;
                           for (long j = 0; j < Wout; ++j) {
                             const long wi = j * stride_w + d * dil_w - pad_w;
                             if (wi >= 0 && wi < W)
                               xg[(c * H + hi) * W + wi] +=
                                   dcols.data[r * cols_n + i * Wout + j];
                           }
                         }
                       }
                 }
                 if (n.inputs.size() > 2 && n.inputs[2]->requires_grad) {
                   auto& bg = n.inputs[2]->g().data;
                   for (long o = 0; o < Cout; ++o)
                     for (long j = 0; j < cols_n; ++j) bg[o] += n.grad.data[o * cols_n + j];
                 }
               });
}

}  // namespace rirflow
