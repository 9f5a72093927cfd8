// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rirflow {

/// Dense row-major tensor of doubles. All numerics in this project run in
/// double precision; checkpoints round to float32 on save.
struct Tensor {
  std::vector<long> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<long> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(count_of(shape)), 0.0);
  }

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<long> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
  }

  static Tensor from(std::vector<double> data, std::vector<long> shape) {
    if (static_cast<long>(data.size()) != count_of(shape))
      throw std::invalid_argument("Tensor::from: data/shape size mismatch");
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(data);
    return t;
  }

  long count() const { return static_cast<long>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  double& at2(long r, long c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
  double at2(long r, long c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }
  double& at3(long a, long b, long c) {
    return data[static_cast<size_t>((a * shape[1] + b) * shape[2] + c)];
  }
  double at3(long a, long b, long c) const {
    return data[static_cast<size_t>((a * shape[1] + b) * shape[2] + c)];
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static long count_of(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static std::string shape_str(const std::vector<long>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

}  // namespace rirflow
