// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "rirflow/nn/graph.hpp"

namespace rirflow {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  long elements = 0;
};

/// Compare reverse-mode gradients against central finite differences.
/// `build` reconstructs the scalar loss from the current leaf values; every
/// element of every listed leaf is perturbed.  Relative error uses
/// |a - n| / max(|a| + |n|, floor).
inline GradCheckResult grad_check(const std::function<NodePtr()>& build,
                                  const std::vector<NodePtr>& leaves, double h = 1e-5,
                                  double denom_floor = 1e-6) {
  auto loss = build();
  // Leaves absent from this graph keep a zero gradient rather than stale data.
  for (const auto& p : leaves) p->zero_grad();
  backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(leaves.size());
  for (const auto& p : leaves) analytic.push_back(p->g());

  GradCheckResult res;
  for (size_t pi = 0; pi < leaves.size(); ++pi) {
    auto& val = leaves[pi]->value.data;
    for (size_t i = 0; i < val.size(); ++i) {
      const double keep = val[i];
      val[i] = keep + h;
      const double fp = build()->scalar();
      val[i] = keep - h;
      const double fm = build()->scalar();
      val[i] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi].data[i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max(std::abs(a) + std::abs(numeric), denom_floor);
      res.max_abs_err = std::max(res.max_abs_err, abs_err);
      res.max_rel_err = std::max(res.max_rel_err, rel);
      ++res.elements;
    }
  }
  return res;
}

}  // namespace rirflow
