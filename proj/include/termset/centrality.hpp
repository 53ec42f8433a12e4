#pragma once

// Centrality-based expansion: a single proxy vector stands in for the
// positive terms, and candidates are its nearest unlabeled neighbours.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "termset/config.hpp"
#include "termset/embedding.hpp"
#include "termset/error.hpp"
#include "termset/labeled_set.hpp"

namespace termset {

struct CentralVector {
  Vector values;
  Method method = Method::centroid;
};

// Stacks the vectors of `terms` as rows.
inline Matrix gather_rows(const EmbeddingModel& model, const std::vector<std::string>& terms) {
  Matrix w(static_cast<Eigen::Index>(terms.size()), static_cast<Eigen::Index>(model.dim()));
  for (std::size_t i = 0; i < terms.size(); ++i)
    w.row(static_cast<Eigen::Index>(i)) = model.row(model.require_index(terms[i]));
  return w;
}

namespace detail {

inline void require_usable(const Vector& v, const char* what) {
  if (!v.allFinite()) throw ConvergenceError(std::string(what) + " produced non-finite values", 0.0);
  if (v.norm() == 0.0) throw ValidationError(std::string(what) + " produced a zero vector");
}

}  // namespace detail

inline CentralVector centroid(const Matrix& positives) {
  if (positives.rows() == 0) throw ValidationError("no positive examples");
  Vector mean = positives.colwise().mean().transpose();
  detail::require_usable(mean, "centroid");
  return {std::move(mean), Method::centroid};
}

// Elementwise mean / (sample standard deviation + epsilon).
inline CentralVector snr_centroid(const Matrix& positives, double epsilon = 1e-6) {
  if (positives.rows() < 2)
    throw ValidationError("signal-to-noise centroid needs at least 2 positive examples");
  if (!(epsilon > 0.0)) throw ValidationError("snr epsilon must be positive");
  const Vector mean = positives.colwise().mean().transpose();
  const Matrix centered = positives.rowwise() - mean.transpose();
  const double denom = static_cast<double>(positives.rows() - 1);
  const Vector sd = (centered.colwise().squaredNorm().transpose() / denom).cwiseSqrt();
  Vector v = mean.array() / (sd.array() + epsilon);
  detail::require_usable(v, "signal-to-noise centroid");
  return {std::move(v), Method::snr};
}

// Dominant eigenvector of W^T W by power iteration, started from the
// normalized row sum. Sign is fixed so the rows' total cosine to it is
// nonnegative.
inline CentralVector eigencentrality_vector(const Matrix& w, const PowerIterationConfig& config = {}) {
  if (w.rows() == 0) throw ValidationError("no positive examples");
  if (w.norm() == 0.0) throw ValidationError("eigencentrality of an all-zero matrix");

  Vector x = w.colwise().sum().transpose();
  if (x.norm() == 0.0) {
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      if (w.row(r).norm() > 0.0) {
        x = w.row(r).transpose();
        break;
      }
  }
  x.normalize();

  double gap = 1.0;
  bool converged = false;
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    Vector next = w.transpose() * (w * x);
    const double n = next.norm();
    if (n == 0.0) throw ConvergenceError("power iteration collapsed to zero", 1.0);
    next /= n;
    gap = 0.5 * (next - x).squaredNorm();  // 1 - cos without cancellation
    x = std::move(next);
    if (gap <= config.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("power iteration did not converge in " +
                               std::to_string(config.max_iters) + " iterations (1 - cos = " +
                               std::to_string(gap) + ")",
                           gap);

  double total = 0.0;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    const double rn = w.row(r).norm();
    if (rn > 0.0) total += w.row(r).dot(x) / rn;
  }
  if (total < 0.0) x = -x;
  return {std::move(x), Method::eigencentrality};
}

struct Expansion {
  std::vector<Neighbor> candidates;  // score: similarity, or |d(t)| for margin methods
  Method method_used = Method::centroid;
  bool fallback = false;  // a degenerate method was replaced by centroid
};

// Central vector for L+ under `method`. With a single positive the snr and
// eigencentrality methods degrade to the centroid and report it.
inline CentralVector central_vector(const Matrix& positives, const ExpansionConfig& config,
                                    bool* fell_back = nullptr) {
  if (fell_back) *fell_back = false;
  if (positives.rows() == 0) throw ValidationError("no positive examples");
  switch (config.method) {
    case Method::centroid:
      return centroid(positives);
    case Method::snr:
    case Method::eigencentrality:
      if (positives.rows() < 2) {
        if (fell_back) *fell_back = true;
        return centroid(positives);
      }
      return config.method == Method::snr ? snr_centroid(positives, config.snr_epsilon)
                                          : eigencentrality_vector(positives, config.power);
    default:
      throw ValidationError(std::string("method ") + to_string(config.method) +
                            " is not a centrality method");
  }
}

// The k unlabeled terms most similar to the central vector of L+.
inline Expansion expand_centrality(const EmbeddingModel& model, const LabeledTermSet& labeled,
                                   const ExpansionConfig& config) {
  if (!is_centrality(config.method))
    throw ValidationError(std::string("method ") + to_string(config.method) +
                          " is not a centrality method");
  if (config.k == 0) throw ValidationError("k must be at least 1");
  const auto pos = labeled.positives();
  if (pos.empty()) throw ValidationError("no positive examples");
  Expansion out;
  const CentralVector c = central_vector(gather_rows(model, pos), config, &out.fallback);
  out.method_used = c.method;
  out.candidates = top_k_similar(model, c.values, config.k, labeled.exclusion_mask(model),
                                 config.threads);
  return out;
}

}  // namespace termset
