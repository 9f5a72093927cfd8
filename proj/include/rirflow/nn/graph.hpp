// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "rirflow/core/tensor.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Reverse-mode autodiff over dense double tensors.  Graphs are built per
// forward pass from shared_ptr nodes; backward() walks a topological order.
// Heavy linear algebra goes through Eigen; everything else is plain loops.
// ---------------------------------------------------------------------------

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on demand, same shape as value
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  Tensor& g() {
    if (grad.data.empty()) grad = Tensor::zeros(value.shape);
    return grad;
  }
  void zero_grad() {
    if (!grad.data.empty()) grad.fill(0.0);
  }
  double scalar() const {
    if (value.count() != 1) throw std::logic_error("Node::scalar on non-scalar");
    return value.data[0];
  }
};

inline NodePtr constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

inline NodePtr leaf(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

inline NodePtr apply(Tensor value, std::vector<NodePtr> inputs,
                     std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& i : n->inputs) n->requires_grad = n->requires_grad || i->requires_grad;
  if (n->requires_grad) n->backward_fn = std::move(bwd);
  return n;
}

/// Backpropagate from a scalar root: seed d(root)/d(root)=1 and run the tape
/// in reverse topological order.  Gradients accumulate; interior nodes start
/// from lazily allocated zeros, persistent leaves are zeroed by the caller,
/// which is what lets several per-sample graphs sum into one batch gradient.
inline void backward(const NodePtr& root) {
  if (root->value.count() != 1) throw std::invalid_argument("backward: root must be scalar");
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->inputs.size()) {
      Node* in = n->inputs[idx++].get();
      if (in->requires_grad && !seen.count(in)) {
        seen.insert(in);
        stack.push_back({in, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root->zero_grad();
  root->g().data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

namespace detail {
inline void check_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                Tensor::shape_str(a->value.shape) + " vs " +
                                Tensor::shape_str(b->value.shape));
}
}  // namespace detail

inline NodePtr add(const NodePtr& a, const NodePtr& b) {
  detail::check_same_shape(a, b, "add");
  Tensor v = a->value;
  for (long i = 0; i < v.count(); ++i) v.data[i] += b->value.data[i];
  return apply(std::move(v), {a, b}, [](Node& n) {
    for (long i = 0; i < n.value.count(); ++i) {
      if (n.inputs[0]->requires_grad) n.inputs[0]->g().data[i] += n.grad.data[i];
      if (n.inputs[1]->requires_grad) n.inputs[1]->g().data[i] += n.grad.data[i];
    }
  });
}

inline NodePtr sub(const NodePtr& a, const NodePtr& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor v = a->value;
  for (long i = 0; i < v.count(); ++i) v.data[i] -= b->value.data[i];
  return apply(std::move(v), {a, b}, [](Node& n) {
    for (long i = 0; i < n.value.count(); ++i) {
      if (n.inputs[0]->requires_grad) n.inputs[0]->g().data[i] += n.grad.data[i];
      if (n.inputs[1]->requires_grad) n.inputs[1]->g().data[i] -= n.grad.data[i];
    }
  });
}

inline NodePtr mul(const NodePtr& a, const NodePtr& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor v = a->value;
  for (long i = 0; i < v.count(); ++i) v.data[i] *= b->value.data[i];
  return apply(std::move(v), {a, b}, [](Node& n) {
    for (long i = 0; i < n.value.count(); ++i) {
      if (n.inputs[0]->requires_grad)
        n.inputs[0]->g().data[i] += n.grad.data[i] * n.inputs[1]->value.data[i];
      if (n.inputs[1]->requires_grad)
        n.inputs[1]->g().data[i] += n.grad.data[i] * n.inputs[0]->value.data[i];
    }
  });
}

inline NodePtr div(const NodePtr& a, const NodePtr& b) {
  detail::check_same_shape(a, b, "div");
  Tensor v = a->value;
  for (long i = 0; i < v.count(); ++i) v.data[i] /= b->value.data[i];
  return apply(std::move(v), {a, b}, [](Node& n) {
    for (long i = 0; i < n.value.count(); ++i) {
      const double bi = n.inputs[1]->value.data[i];
      if (n.inputs[0]->requires_grad) n.inputs[0]->g().data[i] += n.grad.data[i] / bi;
      if (n.inputs[1]->requires_grad)
        n.inputs[1]->g().data[i] -= n.grad.data[i] * n.inputs[0]->value.data[i] / (bi * bi);
    }
  });
}

inline NodePtr scale(const NodePtr& a, double c) {
  Tensor v = a->value;
  for (auto& x : v.data) x *= c;
  return apply(std::move(v), {a}, [c](Node& n) {
    for (long i = 0; i < n.value.count(); ++i) n.inputs[0]->g().data[i] += c * n.grad.data[i];
  });
}

/// y = a * s with s a one-element node (learnable broadcast scalar).
inline NodePtr scale_by(const NodePtr& a, const NodePtr& s) {
  if (s->value.count() != 1)
    throw std::invalid_argument("scale_by: scalar node must have one element");
  Tensor v = a->value;
  const double sv = s->value.data[0];
  for (auto& x : v.data) x *= sv;
  return apply(std::move(v), {a, s}, [](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const double sc = n.inputs[1]->value.data[0];
    if (n.inputs[0]->requires_grad)
      for (long i = 0; i < av.count(); ++i) n.inputs[0]->g().data[i] += sc * n.grad.data[i];
    if (n.inputs[1]->requires_grad) {
      double acc = 0.0;
      for (long i = 0; i < av.count(); ++i) acc += n.grad.data[i] * av.data[i];
      n.inputs[1]->g().data[0] += acc;
    }
  });
}

inline NodePtr add_scalar(const NodePtr& a, double c) {
  Tensor v = a->value;
  for (auto& x : v.data) x += c;
  return apply(std::move(v), {a}, [](Node& n) {
    for (long i = 0; i < n.value.count(); ++i) n.inputs[0]->g().data[i] += n.grad.data[i];
  });
}

template <typename F, typename DF>
inline NodePtr unary_op(const NodePtr& a, F f, DF df) {
  Tensor v = a->value;
  for (auto& x : v.data) x = f(x);
  return apply(std::move(v), {a}, [df](Node& n) {
    for (long i = 0; i < n.value.count(); ++i)
      n.inputs[0]->g().data[i] += n.grad.data[i] * df(n.inputs[0]->value.data[i], n.value.data[i]);
  });
}

inline NodePtr square(const NodePtr& a) {
  return unary_op(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}
inline NodePtr sqrt_op(const NodePtr& a) {
  return unary_op(a, [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / std::max(y, 1e-300); });
}
inline NodePtr abs_op(const NodePtr& a) {
  return unary_op(a, [](double x) { return std::abs(x); },
                  [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}
inline NodePtr exp_op(const NodePtr& a) {
  return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
/// log(x + guard); the guard keeps gradients finite at x = 0.
inline NodePtr log_guard(const NodePtr& a, double eta) {
  return unary_op(a, [eta](double x) { return std::log(x + eta); },
                  [eta](double x, double) { return 1.0 / (x + eta); });
}
inline NodePtr tanh_op(const NodePtr& a) {
  return unary_op(a, [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}
inline NodePtr sigmoid(const NodePtr& a) {
  return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}
inline NodePtr relu(const NodePtr& a) {
  return unary_op(a, [](double x) { return x > 0 ? x : 0.0; },
                  [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}
inline NodePtr leaky_relu(const NodePtr& a, double slope = 0.2) {
  return unary_op(a, [slope](double x) { return x > 0 ? x : slope * x; },
                  [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}
inline NodePtr gelu(const NodePtr& a) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  return unary_op(a,
                  [inv_sqrt2](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
                  [inv_sqrt2](double x, double) {
                    const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                    const double pdf =
                        std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
                    return cdf + x * pdf;
                  });
}

/// Hard clamp; gradient is 1 inside [lo, hi] and 0 outside.
inline NodePtr clamp(const NodePtr& a, double lo, double hi) {
  Tensor v = a->value;
  for (auto& x : v.data) x = std::min(std::max(x, lo), hi);
  return apply(std::move(v), {a}, [lo, hi](Node& n) {
    for (long i = 0; i < n.value.count(); ++i) {
      const double x = n.inputs[0]->value.data[i];
      if (x >= lo && x <= hi) n.inputs[0]->g().data[i] += n.grad.data[i];
    }
  });
}

/// Suffix sums of a vector: y[d] = sum_{k >= d} x[k].
inline NodePtr reverse_cumsum_vec(const NodePtr& a) {
  if (a->value.rank() != 1) throw std::invalid_argument("reverse_cumsum_vec: rank must be 1");
  const long T = a->value.count();
  Tensor v = a->value;
  for (long d = T - 2; d >= 0; --d) v.data[d] += v.data[d + 1];
  return apply(std::move(v), {a}, [T](Node& n) {
    double acc = 0.0;
    for (long k = 0; k < T; ++k) {
      acc += n.grad.data[k];
      n.inputs[0]->g().data[k] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Channel broadcasts: v indexed by dim 0, broadcast over the rest.
// ---------------------------------------------------------------------------

namespace detail {
inline long inner_size(const Tensor& t) { return t.count() / t.shape[0]; }
inline void check_channel_vec(const NodePtr& x, const NodePtr& v, const char* op) {
  if (v->value.rank() != 1 || v->value.shape[0] != x->value.shape[0])
    throw std::invalid_argument(std::string(op) + ": vector must match dim 0");
}
}  // namespace detail

inline NodePtr add_colvec(const NodePtr& x, const NodePtr& v) {
  detail::check_channel_vec(x, v, "add_colvec");
  const long C = x->value.shape[0], inner = detail::inner_size(x->value);
  Tensor out = x->value;
  for (long c = 0; c < C; ++c)
    for (long i = 0; i < inner; ++i) out.data[c * inner + i] += v->value.data[c];
  return apply(std::move(out), {x, v}, [C, inner](Node& n) {
    for (long c = 0; c < C; ++c) {
      double acc = 0.0;
      for (long i = 0; i < inner; ++i) {
        const double g = n.grad.data[c * inner + i];
        if (n.inputs[0]->requires_grad) n.inputs[0]->g().data[c * inner + i] += g;
        acc += g;
      }
      if (n.inputs[1]->requires_grad) n.inputs[1]->g().data[c] += acc;
    }
  });
}

inline NodePtr mul_colvec(const NodePtr& x, const NodePtr& v) {
  detail::check_channel_vec(x, v, "mul_colvec");
  const long C = x->value.shape[0], inner = detail::inner_size(x->value);
  Tensor out = x->value;
  for (long c = 0; c < C; ++c)
    for (long i = 0; i < inner; ++i) out.data[c * inner + i] *= v->value.data[c];
  return apply(std::move(out), {x, v}, [C, inner](Node& n) {
    for (long c = 0; c < C; ++c) {
      double acc = 0.0;
      const double vc = n.inputs[1]->value.data[c];
      for (long i = 0; i < inner; ++i) {
        const double g = n.grad.data[c * inner + i];
        if (n.inputs[0]->requires_grad) n.inputs[0]->g().data[c * inner + i] += g * vc;
        acc += g * n.inputs[0]->value.data[c * inner + i];
      }
      if (n.inputs[1]->requires_grad) n.inputs[1]->g().data[c] += acc;
    }
  });
}

/// Snake activation x + sin^2(beta x)/beta with per-channel beta (dim 0).
inline NodePtr snake(const NodePtr& x, const NodePtr& beta) {
  detail::check_channel_vec(x, beta, "snake");
  for (double b : beta->value.data)
    if (!(b > 0.0)) throw std::invalid_argument("snake: beta must be positive");
  const long C = x->value.shape[0], inner = detail::inner_size(x->value);
  Tensor out = x->value;
  for (long c = 0; c < C; ++c) {
    const double b = beta->value.data[c];
    for (long i = 0; i < inner; ++i) {
      const double s = std::sin(b * out.data[c * inner + i]);
      out.data[c * inner + i] += s * s / b;
    }
  }
  return apply(std::move(out), {x, beta}, [C, inner](Node& n) {
    for (long c = 0; c < C; ++c) {
      const double b = n.inputs[1]->value.data[c];
      double acc = 0.0;
      for (long i = 0; i < inner; ++i) {
        const double xi = n.inputs[0]->value.data[c * inner + i];
        const double g = n.grad.data[c * inner + i];
        const double s = std::sin(b * xi), co = std::cos(b * xi);
        // d/dx = 1 + 2 sin cos = 1 + sin(2 b x)
        if (n.inputs[0]->requires_grad)
          n.inputs[0]->g().data[c * inner + i] += g * (1.0 + 2.0 * s * co);
        // d/db = (2 b x sin cos - sin^2) / b^2
        acc += g * (2.0 * b * xi * s * co - s * s) / (b * b);
      }
      if (n.inputs[1]->requires_grad) n.inputs[1]->g().data[c] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Row broadcasts over [T, D]: v indexed by the last dim.
// ---------------------------------------------------------------------------

namespace detail {
inline void check_row_vec(const NodePtr& x, const NodePtr& v, const char* op) {
  if (x->value.rank() != 2 || v->value.rank() != 1 ||
      v->value.shape[0] != x->value.shape[1])
    throw std::invalid_argument(std::string(op) + ": vector must match dim 1");
}
}  // namespace detail

inline NodePtr add_rowvec(const NodePtr& x, const NodePtr& v) {
  detail::check_row_vec(x, v, "add_rowvec");
  const long T = x->value.shape[0], D = x->value.shape[1];
  Tensor out = x->value;
  for (long t = 0; t < T; ++t)
    for (long d = 0; d < D; ++d) out.data[t * D + d] += v->value.data[d];
  return apply(std::move(out), {x, v}, [T, D](Node& n) {
    for (long t = 0; t < T; ++t)
      for (long d = 0; d < D; ++d) {
        const double g = n.grad.data[t * D + d];
        if (n.inputs[0]->requires_grad) n.inputs[0]->g().data[t * D + d] += g;
        if (n.inputs[1]->requires_grad) n.inputs[1]->g().data[d] += g;
      }
  });
}

inline NodePtr mul_rowvec(const NodePtr& x, const NodePtr& v) {
  detail::check_row_vec(x, v, "mul_rowvec");
  const long T = x->value.shape[0], D = x->value.shape[1];
  Tensor out = x->value;
  for (long t = 0; t < T; ++t)
    for (long d = 0; d < D; ++d) out.data[t * D + d] *= v->value.data[d];
  return apply(std::move(out), {x, v}, [T, D](Node& n) {
    for (long t = 0; t < T; ++t)
      for (long d = 0; d < D; ++d) {
        const double g = n.grad.data[t * D + d];
        if (n.inputs[0]->requires_grad)
          n.inputs[0]->g().data[t * D + d] += g * n.inputs[1]->value.data[d];
        if (n.inputs[1]->requires_grad)
          n.inputs[1]->g().data[d] += g * n.inputs[0]->value.data[t * D + d];
      }
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline NodePtr sum_all(const NodePtr& a) {
  double s = 0.0;
  for (double v : a->value.data) s += v;
  return apply(Tensor::scalar(s), {a}, [](Node& n) {
    const double g = n.grad.data[0];
    for (long i = 0; i < n.inputs[0]->value.count(); ++i) n.inputs[0]->g().data[i] += g;
  });
}

inline NodePtr mean_all(const NodePtr& a) { return scale(sum_all(a), 1.0 / a->value.count()); }

/// Mean over rows: [T, D] -> [D].
inline NodePtr mean_over_rows(const NodePtr& a) {
  if (a->value.rank() != 2) throw std::invalid_argument("mean_over_rows: rank must be 2");
  const long T = a->value.shape[0], D = a->value.shape[1];
  Tensor out = Tensor::zeros({D});
  for (long t = 0; t < T; ++t)
    for (long d = 0; d < D; ++d) out.data[d] += a->value.data[t * D + d] / T;
  return apply(std::move(out), {a}, [T, D](Node& n) {
    for (long t = 0; t < T; ++t)
      for (long d = 0; d < D; ++d) n.inputs[0]->g().data[t * D + d] += n.grad.data[d] / T;
  });
}

/// Mean over columns: [C, L] -> [C].
inline NodePtr mean_over_cols(const NodePtr& a) {
  if (a->value.rank() != 2) throw std::invalid_argument("mean_over_cols: rank must be 2");
  const long C = a->value.shape[0], L = a->value.shape[1];
  Tensor out = Tensor::zeros({C});
  for (long c = 0; c < C; ++c)
    for (long l = 0; l < L; ++l) out.data[c] += a->value.data[c * L + l] / L;
  return apply(std::move(out), {a}, [C, L](Node& n) {
    for (long c = 0; c < C; ++c)
      for (long l = 0; l < L; ++l) n.inputs[0]->g().data[c * L + l] += n.grad.data[c] / L;
  });
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

inline NodePtr reshape(const NodePtr& a, std::vector<long> shape) {
  if (Tensor::count_of(shape) != a->value.count())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor v = a->value;
  v.shape = std::move(shape);
  return apply(std::move(v), {a}, [](Node& n) {
    for (long i = 0; i < n.value.count(); ++i) n.inputs[0]->g().data[i] += n.grad.data[i];
  });
}

inline NodePtr transpose(const NodePtr& a) {
  if (a->value.rank() != 2) throw std::invalid_argument("transpose: rank must be 2");
  const long R = a->value.shape[0], C = a->value.shape[1];
  Tensor v = Tensor::zeros({C, R});
  for (long r = 0; r < R; ++r)
    for (long c = 0; c < C; ++c) v.data[c * R + r] = a->value.data[r * C + c];
  return apply(std::move(v), {a}, [R, C](Node& n) {
    for (long r = 0; r < R; ++r)
      for (long c = 0; c < C; ++c) n.inputs[0]->g().data[r * C + c] += n.grad.data[c * R + r];
  });
}

inline NodePtr slice_rows(const NodePtr& a, long r0, long r1) {
  if (a->value.rank() != 2) throw std::invalid_argument("slice_rows: rank must be 2");
  const long D = a->value.shape[1];
  if (r0 < 0 || r1 <= r0 || r1 > a->value.shape[0])
    throw std::invalid_argument("slice_rows: bad range");
  Tensor v = Tensor::zeros({r1 - r0, D});
  std::copy(a->value.data.begin() + r0 * D, a->value.data.begin() + r1 * D, v.data.begin());
  return apply(std::move(v), {a}, [r0, D](Node& n) {
    for (long i = 0; i < n.value.count(); ++i)
      n.inputs[0]->g().data[r0 * D + i] += n.grad.data[i];
  });
}

inline NodePtr slice_cols(const NodePtr& a, long c0, long c1) {
  if (a->value.rank() != 2) throw std::invalid_argument("slice_cols: rank must be 2");
  const long T = a->value.shape[0], D = a->value.shape[1];
  if (c0 < 0 || c1 <= c0 || c1 > D) throw std::invalid_argument("slice_cols: bad range");
  const long W = c1 - c0;
  Tensor v = Tensor::zeros({T, W});
  for (long t = 0; t < T; ++t)
    for (long c = 0; c < W; ++c) v.data[t * W + c] = a->value.data[t * D + c0 + c];
  return apply(std::move(v), {a}, [T, D, c0, W](Node& n) {
    for (long t = 0; t < T; ++t)
      for (long c = 0; c < W; ++c)
        n.inputs[0]->g().data[t * D + c0 + c] += n.grad.data[t * W + c];
  });
}

inline NodePtr concat_rows(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const long D = parts[0]->value.shape[1];
  long T = 0;
  for (const auto& p : parts) {
    if (p->value.rank() != 2 || p->value.shape[1] != D)
      throw std::invalid_argument("concat_rows: column mismatch");
    T += p->value.shape[0];
  }
  Tensor v = Tensor::zeros({T, D});
  long off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), v.data.begin() + off);
    off += p->value.count();
  }
  return apply(std::move(v), parts, [](Node& n) {
    long off = 0;
    for (auto& in : n.inputs) {
      const long c = in->value.count();
      if (in->requires_grad)
        for (long i = 0; i < c; ++i) in->g().data[i] += n.grad.data[off + i];
      off += c;
    }
  });
}

inline NodePtr concat_cols(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const long T = parts[0]->value.shape[0];
  long D = 0;
  for (const auto& p : parts) {
    if (p->value.rank() != 2 || p->value.shape[0] != T)
      throw std::invalid_argument("concat_cols: row mismatch");
    D += p->value.shape[1];
  }
  Tensor v = Tensor::zeros({T, D});
  long off = 0;
  for (const auto& p : parts) {
    const long w = p->value.shape[1];
    for (long t = 0; t < T; ++t)
      for (long c = 0; c < w; ++c) v.data[t * D + off + c] = p->value.data[t * w + c];
    off += w;
  }
  return apply(std::move(v), parts, [T, D](Node& n) {
    long off = 0;
    for (auto& in : n.inputs) {
      const long w = in->value.shape[1];
      if (in->requires_grad)
        for (long t = 0; t < T; ++t)
          for (long c = 0; c < w; ++c) in->g().data[t * w + c] += n.grad.data[t * D + off + c];
      off += w;
    }
  });
}

/// Concatenate rank-1 vectors.
inline NodePtr concat_vec(const std::vector<NodePtr>& parts) {
  long n = 0;
  for (const auto& p : parts) {
    if (p->value.rank() != 1) throw std::invalid_argument("concat_vec: rank must be 1");
    n += p->value.count();
  }
  Tensor v = Tensor::zeros({n});
  long off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), v.data.begin() + off);
    off += p->value.count();
  }
  return apply(std::move(v), parts, [](Node& n2) {
    long off = 0;
    for (auto& in : n2.inputs) {
      if (in->requires_grad)
        for (long i = 0; i < in->value.count(); ++i) in->g().data[i] += n2.grad.data[off + i];
      off += in->value.count();
    }
  });
}

inline NodePtr concat_rows(const NodePtr& a, const NodePtr& b) {
  return concat_rows(std::vector<NodePtr>{a, b});
}

inline NodePtr concat_vec(const NodePtr& a, const NodePtr& b) {
  return concat_vec(std::vector<NodePtr>{a, b});
}

// ---------------------------------------------------------------------------
// Linear algebra (Eigen-backed)
// ---------------------------------------------------------------------------

using EigenRowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EigenRowMat>;
using CMapMat = Eigen::Map<const EigenRowMat>;

inline NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.shape[1] != b->value.shape[0])
    throw std::invalid_argument("matmul: incompatible shapes");
  const long m = a->value.shape[0], k = a->value.shape[1], n = b->value.shape[1];
  Tensor v = Tensor::zeros({m, n});
  CMapMat A(a->value.data.data(), m, k), B(b->value.data.data(), k, n);
  MapMat(v.data.data(), m, n).noalias() = A * B;
  return apply(std::move(v), {a, b}, [m, k, n](Node& nd) {
    CMapMat G(nd.grad.data.data(), m, n);
    CMapMat A(nd.inputs[0]->value.data.data(), m, k);
    CMapMat B(nd.inputs[1]->value.data.data(), k, n);
    if (nd.inputs[0]->requires_grad)
      MapMat(nd.inputs[0]->g().data.data(), m, k).noalias() += G * B.transpose();
    if (nd.inputs[1]->requires_grad)
      MapMat(nd.inputs[1]->g().data.data(), k, n).noalias() += A.transpose() * G;
  });
}

/// y = x * W^T (+ b): the dense layer primitive. x: [T, in], W: [out, in].
inline NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b = nullptr) {
  const bool vec = x->value.rank() == 1;
  const long T = vec ? 1 : x->value.shape[0];
  const long in = vec ? x->value.shape[0] : x->value.shape[1];
  if (w->value.rank() != 2 || w->value.shape[1] != in)
    throw std::invalid_argument("linear: weight shape mismatch");
  const long out = w->value.shape[0];
  Tensor v = vec ? Tensor::zeros({out}) : Tensor::zeros({T, out});
  CMapMat X(x->value.data.data(), T, in), W(w->value.data.data(), out, in);
  MapMat(v.data.data(), T, out).noalias() = X * W.transpose();
  std::vector<NodePtr> ins{x, w};
  if (b) {
    if (b->value.count() != out) throw std::invalid_argument("linear: bias shape mismatch");
    for (long t = 0; t < T; ++t)
      for (long o = 0; o < out; ++o) v.data[t * out + o] += b->value.data[o];
    ins.push_back(b);
  }
  return apply(std::move(v), std::move(ins), [T, in, out](Node& nd) {
    CMapMat G(nd.grad.data.data(), T, out);
    CMapMat X(nd.inputs[0]->value.data.data(), T, in);
    CMapMat W(nd.inputs[1]->value.data.data(), out, in);
    if (nd.inputs[0]->requires_grad)
      MapMat(nd.inputs[0]->g().data.data(), T, in).noalias() += G * W;
    if (nd.inputs[1]->requires_grad)
      MapMat(nd.inputs[1]->g().data.data(), out, in).noalias() += G.transpose() * X;
    if (nd.inputs.size() > 2 && nd.inputs[2]->requires_grad) {
      auto& bg = nd.inputs[2]->g().data;
      for (long t = 0; t < T; ++t)
        for (long o = 0; o < out; ++o) bg[o] += nd.grad.data[t * out + o];
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization and attention pieces
// ---------------------------------------------------------------------------

inline NodePtr softmax_rows(const NodePtr& a) {
  if (a->value.rank() != 2) throw std::invalid_argument("softmax_rows: rank must be 2");
  const long T = a->value.shape[0], D = a->value.shape[1];
  Tensor v = a->value;
  for (long t = 0; t < T; ++t) {
    double mx = -1e300;
    for (long d = 0; d < D; ++d) mx = std::max(mx, v.data[t * D + d]);
    double s = 0.0;
    for (long d = 0; d < D; ++d) {
      v.data[t * D + d] = std::exp(v.data[t * D + d] - mx);
      s += v.data[t * D + d];
    }
    for (long d = 0; d < D; ++d) v.data[t * D + d] /= s;
  }
  return apply(std::move(v), {a}, [T, D](Node& n) {
    for (long t = 0; t < T; ++t) {
      double dot = 0.0;
      for (long d = 0; d < D; ++d) dot += n.grad.data[t * D + d] * n.value.data[t * D + d];
      for (long d = 0; d < D; ++d)
        n.inputs[0]->g().data[t * D + d] +=
            n.value.data[t * D + d] * (n.grad.data[t * D + d] - dot);
    }
  });
}

inline NodePtr layernorm_rows(const NodePtr& a, double eps = 1e-5) {
  if (a->value.rank() != 2) throw std::invalid_argument("layernorm_rows: rank must be 2");
  const long T = a->value.shape[0], D = a->value.shape[1];
  Tensor v = a->value;
  std::vector<double> inv_std(T);
  for (long t = 0; t < T; ++t) {
    double mu = 0.0;
    for (long d = 0; d < D; ++d) mu += v.data[t * D + d];
    mu /= D;
    double var = 0.0;
    for (long d = 0; d < D; ++d) {
      v.data[t * D + d] -= mu;
      var += v.data[t * D + d] * v.data[t * D + d];
    }
    var /= D;
    inv_std[t] = 1.0 / std::sqrt(var + eps);
    for (long d = 0; d < D; ++d) v.data[t * D + d] *= inv_std[t];
  }
  return apply(std::move(v), {a}, [T, D, inv_std](Node& n) {
    for (long t = 0; t < T; ++t) {
      double gsum = 0.0, gysum = 0.0;
      for (long d = 0; d < D; ++d) {
        gsum += n.grad.data[t * D + d];
        gysum += n.grad.data[t * D + d] * n.value.data[t * D + d];
      }
      for (long d = 0; d < D; ++d) {
        const double y = n.value.data[t * D + d];
        n.inputs[0]->g().data[t * D + d] +=
            inv_std[t] * (n.grad.data[t * D + d] - gsum / D - y * gysum / D);
      }
    }
  });
}

/// Row-wise L2 normalization with an epsilon guard.
inline NodePtr l2_normalize_rows(const NodePtr& a, double eps = 1e-12) {
  const bool vec = a->value.rank() == 1;
  const long T = vec ? 1 : a->value.shape[0];
  const long D = vec ? a->value.shape[0] : a->value.shape[1];
  Tensor v = a->value;
  std::vector<double> inv_norm(T);
  for (long t = 0; t < T; ++t) {
    double s = 0.0;
    for (long d = 0; d < D; ++d) s += v.data[t * D + d] * v.data[t * D + d];
    inv_norm[t] = 1.0 / std::max(std::sqrt(s), eps);
    for (long d = 0; d < D; ++d) v.data[t * D + d] *= inv_norm[t];
  }
  return apply(std::move(v), {a}, [T, D, inv_norm](Node& n) {
    for (long t = 0; t < T; ++t) {
      double dot = 0.0;
      for (long d = 0; d < D; ++d) dot += n.grad.data[t * D + d] * n.value.data[t * D + d];
      for (long d = 0; d < D; ++d)
        n.inputs[0]->g().data[t * D + d] +=
            inv_norm[t] * (n.grad.data[t * D + d] - n.value.data[t * D + d] * dot);
    }
  });
}

inline NodePtr logsumexp_rows(const NodePtr& a) {
  if (a->value.rank() != 2) throw std::invalid_argument("logsumexp_rows: rank must be 2");
  const long T = a->value.shape[0], D = a->value.shape[1];
  Tensor v = Tensor::zeros({T});
  for (long t = 0; t < T; ++t) {
    double mx = -1e300;
    for (long d = 0; d < D; ++d) mx = std::max(mx, a->value.data[t * D + d]);
    double s = 0.0;
    for (long d = 0; d < D; ++d) s += std::exp(a->value.data[t * D + d] - mx);
    v.data[t] = mx + std::log(s);
  }
  return apply(std::move(v), {a}, [T, D](Node& n) {
    for (long t = 0; t < T; ++t)
      for (long d = 0; d < D; ++d)
        n.inputs[0]->g().data[t * D + d] +=
            n.grad.data[t] * std::exp(n.inputs[0]->value.data[t * D + d] - n.value.data[t]);
  });
}

inline NodePtr take_diag(const NodePtr& a) {
  if (a->value.rank() != 2 || a->value.shape[0] != a->value.shape[1])
    throw std::invalid_argument("take_diag: square matrix required");
  const long T = a->value.shape[0];
  Tensor v = Tensor::zeros({T});
  for (long t = 0; t < T; ++t) v.data[t] = a->value.at2(t, t);
  return apply(std::move(v), {a}, [T](Node& n) {
    for (long t = 0; t < T; ++t) n.inputs[0]->g().data[t * T + t] += n.grad.data[t];
  });
}

/// Rotary position embedding on [T, D] rows (D even): consecutive pairs are
/// rotated by pos * base^(-2j/D).
inline NodePtr rope_rows(const NodePtr& a, const std::vector<double>& positions,
                         double base = 10000.0) {
  if (a->value.rank() != 2 || a->value.shape[1] % 2 != 0)
    throw std::invalid_argument("rope_rows: [T, even D] required");
  const long T = a->value.shape[0], D = a->value.shape[1];
  if (static_cast<long>(positions.size()) != T)
    throw std::invalid_argument("rope_rows: positions size mismatch");
  Tensor v = a->value;
  std::vector<double> cs(T * D / 2), sn(T * D / 2);
  for (long t = 0; t < T; ++t)
    for (long j = 0; j < D / 2; ++j) {
      const double ang = positions[t] * std::pow(base, -2.0 * j / D);
      cs[t * D / 2 + j] = std::cos(ang);
      sn[t * D / 2 + j] = std::sin(ang);
      const double x0 = v.data[t * D + 2 * j], x1 = v.data[t * D + 2 * j + 1];
      v.data[t * D + 2 * j] = x0 * cs[t * D / 2 + j] - x1 * sn[t * D / 2 + j];
      v.data[t * D + 2 * j + 1] = x0 * sn[t * D / 2 + j] + x1 * cs[t * D / 2 + j];
    }
  return apply(std::move(v), {a}, [T, D, cs, sn](Node& n) {
    for (long t = 0; t < T; ++t)
      for (long j = 0; j < D / 2; ++j) {
        const double g0 = n.grad.data[t * D + 2 * j], g1 = n.grad.data[t * D + 2 * j + 1];
        const double c = cs[t * D / 2 + j], s = sn[t * D / 2 + j];
        n.inputs[0]->g().data[t * D + 2 * j] += g0 * c + g1 * s;
        n.inputs[0]->g().data[t * D + 2 * j + 1] += -g0 * s + g1 * c;
      }
  });
}

// ---------------------------------------------------------------------------
// Convenience losses
// ---------------------------------------------------------------------------

inline NodePtr mse(const NodePtr& a, const NodePtr& b) { return mean_all(square(sub(a, b))); }

inline NodePtr l1(const NodePtr& a, const NodePtr& b) { return mean_all(abs_op(sub(a, b))); }

}  // namespace rirflow
