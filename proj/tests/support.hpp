#pragma once

// Test-only oracles and synthetic fixtures. Nothing here calls into the
// code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "termset/embedding.hpp"

namespace termset::testing {

inline std::string term_name(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return prefix + buf;
}

inline Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                              double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = g(rng);
  return m;
}

inline EmbeddingModel random_model(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                                   bool unit = true, const std::string& prefix = "w") {
  std::vector<std::string> terms;
  for (std::size_t i = 0; i < n; ++i) terms.push_back(term_name(prefix, i));
  EmbeddingModel m(std::move(terms),
                   gaussian_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim)));
  return unit ? normalize_unit_l2(m) : m;
}

inline EmbeddingModel orthonormal_model(std::size_t dim) {
  std::vector<std::string> terms;
  for (std::size_t i = 0; i < dim; ++i) terms.push_back("e" + std::to_string(i + 1));
  return EmbeddingModel(std::move(terms), Matrix::Identity(dim, dim), NormScheme::unit_l2);
}

// Exhaustive scan-and-sort nearest neighbours: score every row, sort the
// whole list, drop excluded terms, keep the first k.
inline std::vector<Neighbor> brute_force_top_k(const EmbeddingModel& model, const Vector& query,
                                               std::size_t k,
                                               const std::unordered_set<std::string>& exclude) {
  const Vector q = query / query.norm();
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto r = model.row(i);
    double s = r.dot(q);
    if (model.norm_scheme() != NormScheme::unit_l2) s /= r.norm();
    all.push_back({model.term(i), s});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.term < b.term;
  });
  std::vector<Neighbor> out;
  for (const auto& n : all) {
    if (exclude.count(n.term)) continue;
    if (out.size() == k) break;
    out.push_back(n);
  }
  return out;
}

struct QpSolution {
  Eigen::VectorXd alpha;
  double objective = -std::numeric_limits<double>::infinity();
  bool found = false;
};

// Brute-force SVM dual: enumerate which variables sit at 0, at C, or
// strictly inside, solve the equality-constrained KKT system for each
// pattern and return the first point satisfying every KKT condition.
// Needs a positive definite kernel matrix.
inline QpSolution brute_force_svm_dual(const Eigen::MatrixXd& kernel, const std::vector<int>& y,
                                       double C) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) q(i, j) = y[i] * y[j] * kernel(i, j);
  const double tol = 1e-9;

  std::vector<int> state(n);  // 0 lower, 1 free, 2 upper
  auto check = [&](QpSolution& out) {
    std::vector<int> free;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == 2) alpha(i) = C;
      if (state[i] == 1) free.push_back(i);
    }
    const int f = static_cast<int>(free.size());
    double nu_lo = -std::numeric_limits<double>::infinity();
    double nu_hi = std::numeric_limits<double>::infinity();
    double nu = 0.0;
    if (f > 0) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(f + 1, f + 1);
      Eigen::VectorXd rhs(f + 1);
      for (int r = 0; r < f; ++r) {
        double s = 1.0;
        for (int j = 0; j < n; ++j)
          if (state[j] == 2) s -= q(free[r], j) * C;
        rhs(r) = s;
        for (int c = 0; c < f; ++c) a(r, c) = q(free[r], free[c]);
        a(r, f) = y[free[r]];
        a(f, r) = y[free[r]];
      }
      double s = 0.0;
      for (int j = 0; j < n; ++j)
        if (state[j] == 2) s -= y[j] * C;
      rhs(f) = s;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      if (!lu.isInvertible()) return false;
      const Eigen::VectorXd sol = lu.solve(rhs);
      for (int r = 0; r < f; ++r) {
        if (sol(r) <= -tol || sol(r) >= C + tol) return false;
        alpha(free[r]) = sol(r);
      }
      nu = sol(f);
    } else {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += y[j] * alpha(j);
      if (std::abs(s) > tol) return false;
    }
    const Eigen::VectorXd g = q * alpha - Eigen::VectorXd::Ones(n);  // + nu * y
    for (int i = 0; i < n; ++i) {
      if (state[i] == 1) continue;
      // lower: g_i + nu y_i >= 0 ; upper: g_i + nu y_i <= 0
      const bool lower = state[i] == 0;
      if (f > 0) {
        const double v = g(i) + nu * y[i];
        if (lower ? v < -tol : v > tol) return false;
      } else {
        // constraint on nu: y_i nu >= -g_i (lower) or y_i nu <= -g_i (upper)
        const double bound = -g(i) * y[i];
        const bool nu_ge = (lower && y[i] == 1) || (!lower && y[i] == -1);
        if (nu_ge) nu_lo = std::max(nu_lo, bound);
        else nu_hi = std::min(nu_hi, bound);
      }
    }
    if (f == 0 && nu_lo > nu_hi + tol) return false;
    out.alpha = alpha;
    out.objective = alpha.sum() - 0.5 * alpha.dot(q * alpha);
    out.found = true;
    return true;
  };

  QpSolution best;
  // Free-set sizes in increasing order; optimal supports are usually small.
  for (int f = 0; f <= n; ++f) {
    std::vector<int> pick(n, 0);
    std::fill(pick.end() - f, pick.end(), 1);
    do {
      std::vector<int> bounded;
      for (int i = 0; i < n; ++i) {
        state[i] = pick[i] ? 1 : 0;
        if (!pick[i]) bounded.push_back(i);
      }
      const int nb = static_cast<int>(bounded.size());
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nb); ++mask) {
        for (int b = 0; b < nb; ++b) state[bounded[b]] = (mask >> b) & 1 ? 2 : 0;
        if (check(best)) return best;
      }
    } while (std::next_permutation(pick.begin(), pick.end()));
  }
  return best;
}

// Gaussian-mixture vocabulary on the unit sphere. Cluster c has `sizes[c]`
// members drawn around a random center with isotropic spread `spread[c]`.
struct ClusterModel {
  EmbeddingModel model;
  std::vector<std::vector<std::string>> members;
};

inline ClusterModel cluster_model(std::mt19937_64& rng, std::size_t dim,
                                  const std::vector<std::size_t>& sizes,
                                  const std::vector<double>& spread, double center_scale = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::string> terms;
  std::vector<Vector> rows;
  ClusterModel out;
  out.members.resize(sizes.size());
  std::size_t next = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    Vector center(dim);
    for (auto& v : center) v = g(rng);
    center = center.normalized() * center_scale;
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      Vector x(dim);
      for (auto& v : x) v = g(rng) * spread[c] / std::sqrt(static_cast<double>(dim));
      rows.push_back(center + x);
      const std::string t = term_name("c" + std::to_string(c) + "_", next++);
      terms.push_back(t);
      out.members[c].push_back(t);
    }
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  out.model = normalize_unit_l2(EmbeddingModel(std::move(terms), std::move(m)));
  return out;
}

// Gold terms live in the first `gold_dims` coordinates with positive
// entries; every other term lives in the remaining coordinates, so it is
// orthogonal to any mixture of gold vectors.
inline EmbeddingModel perfect_cluster_model(std::mt19937_64& rng, std::size_t n_gold,
                                            std::size_t n_other, std::size_t gold_dims,
                                            std::size_t other_dims,
                                            std::vector<std::string>* gold_terms) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t dim = gold_dims + other_dims;
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n_gold + n_other), static_cast<Eigen::Index>(dim));
  std::vector<std::string> terms;
  for (std::size_t i = 0; i < n_gold; ++i) {
    for (std::size_t c = 0; c < gold_dims; ++c) m(i, c) = u(rng);
    terms.push_back(term_name("gold", i));
    if (gold_terms) gold_terms->push_back(terms.back());
  }
  for (std::size_t i = 0; i < n_other; ++i) {
    for (std::size_t c = gold_dims; c < dim; ++c) m(n_gold + i, c) = g(rng);
    terms.push_back(term_name("other", i));
  }
  return normalize_unit_l2(EmbeddingModel(std::move(terms), std::move(m)));
}

}  // namespace termset::testing
