// Copyright 2026 The rirflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Embedding-space evaluation: retrieval recall over unit-norm galleries and
// the Frechet distance between Gaussian moment summaries.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rirflow/core/tensor.hpp"

namespace rirflow {

// ---------------------------------------------------------------------------
// Gallery
// ---------------------------------------------------------------------------

/// Labelled set of unit-norm embedding rows.
struct Gallery {
  Tensor embeddings;  // [N, d]
  std::vector<std::string> ids;

  long size() const { return embeddings.rank() == 2 ? embeddings.shape[0] : 0; }
  long dim() const { return embeddings.rank() == 2 ? embeddings.shape[1] : 0; }

  void validate() const {
    if (embeddings.rank() != 2)
      throw std::invalid_argument("Gallery: embeddings must be [N, d]");
    const long n = embeddings.shape[0], d = embeddings.shape[1];
    if (static_cast<long>(ids.size()) != n)
      throw std::invalid_argument("Gallery: id count must match row count");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second)
        throw std::invalid_argument("Gallery: duplicate id " + id);
    for (long i = 0; i < n; ++i) {
      double s = 0.0;
      for (long j = 0; j < d; ++j) s += embeddings.data[i * d + j] * embeddings.data[i * d + j];
      if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
        throw std::invalid_argument("Gallery: rows must be unit-norm");
    }
  }
};

/// Rows + ids -> validated gallery.
inline Gallery make_gallery(Tensor rows, std::vector<std::string> ids) {
  Gallery g{std::move(rows), std::move(ids)};
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// Recall@k
// ---------------------------------------------------------------------------

/// Fraction (percent) of queries whose matching gallery id lands in the top-k
/// by cosine similarity.  Equal similarities rank by gallery index order, so
/// results are exactly reproducible.
inline double recall_at_k(const Gallery& queries, const Gallery& gallery, long k) {
  queries.validate();
  gallery.validate();
  if (queries.dim() != gallery.dim())
    throw std::invalid_argument("recall_at_k: embedding dim mismatch");
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  if (k > gallery.size()) throw std::invalid_argument("recall_at_k: k exceeds gallery size");

  std::unordered_map<std::string, long> index;
  for (long j = 0; j < gallery.size(); ++j) index.emplace(gallery.ids[j], j);

  const long d = gallery.dim();
  long hits = 0;
  for (long i = 0; i < queries.size(); ++i) {
    auto it = index.find(queries.ids[i]);
    if (it == index.end())
      throw std::invalid_argument("recall_at_k: query id not in gallery: " + queries.ids[i]);
    const long match = it->second;
    auto sim = [&](long j) {
      double s = 0.0;
      for (long c = 0; c < d; ++c)
        s += queries.embeddings.data[i * d + c] * gallery.embeddings.data[j * d + c];
      return s;
    };
    const double s_match = sim(match);
    long rank = 0;  // entries ordered before the match
    for (long j = 0; j < gallery.size() && rank < k; ++j) {
      if (j == match) continue;
      const double s = sim(j);
      if (s > s_match || (s == s_match && j < match)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return queries.size() == 0 ? 0.0 : 100.0 * double(hits) / double(queries.size());
}

// ---------------------------------------------------------------------------
// Frechet distance
// ---------------------------------------------------------------------------

/// First and second moments of an embedding set.
struct FrechetStats {
  Tensor mean;  // [d]
  Tensor cov;   // [d, d], symmetric PSD

  void validate() const {
    if (mean.rank() != 1) throw std::invalid_argument("FrechetStats: mean must be a vector");
    const long d = mean.shape[0];
    if (cov.rank() != 2 || cov.shape[0] != d || cov.shape[1] != d)
      throw std::invalid_argument("FrechetStats: covariance must be [d, d]");
    for (long i = 0; i < d; ++i)
      for (long j = i + 1; j < d; ++j)
        if (std::abs(cov.data[i * d + j] - cov.data[j * d + i]) > 1e-8)
          throw std::invalid_argument("FrechetStats: covariance not symmetric");
  }
};

/// Sample mean and (unbiased) covariance of rows [N, d].  A single row yields
/// a zero covariance.
inline FrechetStats fit_frechet_stats(const Tensor& rows) {
  if (rows.rank() != 2) throw std::invalid_argument("fit_frechet_stats: rows must be [N, d]");
  const long n = rows.shape[0], d = rows.shape[1];
  if (n < 1) throw std::invalid_argument("fit_frechet_stats: need at least one row");
  FrechetStats st;
  st.mean = Tensor::zeros({d});
  st.cov = Tensor::zeros({d, d});
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) st.mean.data[j] += rows.data[i * d + j] / double(n);
  if (n > 1) {
    for (long i = 0; i < n; ++i)
      for (long a = 0; a < d; ++a) {
        const double da = rows.data[i * d + a] - st.mean.data[a];
        for (long b = a; b < d; ++b) {
          const double v = da * (rows.data[i * d + b] - st.mean.data[b]) / double(n - 1);
          st.cov.data[a * d + b] += v;
          if (b != a) st.cov.data[b * d + a] += v;
        }
      }
  }
  return st;
}

namespace detail {

/// Symmetric PSD square root via eigendecomposition; eigenvalues below the
/// PSD tolerance raise, small negatives clip to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  for (long i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8) throw std::invalid_argument(std::string(what) + ": covariance not PSD");
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the matrix
/// square root taken from the symmetrized product S_a^{1/2} S_b S_a^{1/2}.
inline double frechet_distance(const FrechetStats& a, const FrechetStats& b) {
  a.validate();
  b.validate();
  const long d = a.mean.shape[0];
  if (b.mean.shape[0] != d) throw std::invalid_argument("frechet_distance: dim mismatch");

  using Map = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>;
  Map ca(a.cov.data.data(), d, d);
  Map cb(b.cov.data.data(), d, d);

  double mean_sq = 0.0;
  for (long i = 0; i < d; ++i) {
    const double dm = a.mean.data[i] - b.mean.data[i];
    mean_sq += dm * dm;
  }

  Eigen::MatrixXd a12 = detail::psd_sqrt(ca, "frechet_distance");
  Eigen::MatrixXd b12 = detail::psd_sqrt(cb, "frechet_distance");  // PSD gate for b
  Eigen::MatrixXd m = a12 * b12;
  Eigen::MatrixXd prod = m * m.transpose();  // = S_a^{1/2} S_b S_a^{1/2}, PSD by construction
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (prod + prod.transpose()));
  double tr_sqrt = 0.0;
  for (long i = 0; i < d; ++i) tr_sqrt += std::sqrt(std::max(es.eigenvalues()[i], 0.0));

  const double fd = mean_sq + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
  return std::max(fd, 0.0);
}

}  // namespace rirflow
