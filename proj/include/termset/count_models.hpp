#pragma once

// Count-based distributional models: windowed co-occurrence counting,
// PPMI and context-smoothed PPMI weighting, and truncated SVD with an
// exponent applied to the singular values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "termset/embedding.hpp"
#include "termset/error.hpp"

namespace termset {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Sentence = std::vector<std::string>;

struct CooccurrenceCounts {
  std::vector<std::string> terms;  // shared by targets and contexts
  SparseMatrix counts;             // counts(w, c) = #(w, c)
  std::size_t window = 2;
  double total = 0.0;
};

enum class WeightScheme { ppmi, sppmi };

struct WeightedMatrix {
  std::vector<std::string> terms;
  SparseMatrix weights;  // strictly positive entries only
  WeightScheme scheme = WeightScheme::ppmi;
  double alpha = 1.0;
};

struct FactorizationConfig {
  std::size_t dim = 200;
  double sv_exponent = 0.5;
  std::size_t oversample = 10;
  std::size_t max_iters = 1000;
  double tolerance = 1e-10;  // relative change of the leading singular values
  std::uint64_t seed = 0x5eedULL;
};

struct TruncatedSvd {
  Eigen::MatrixXd u;  // rows x dim
  Eigen::VectorXd s;  // non-increasing
  Eigen::MatrixXd v;  // cols x dim
  std::size_t iterations = 0;
};

// One sentence per line, whitespace separated, tokens taken as given.
inline std::vector<Sentence> read_corpus(std::istream& in) {
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) {
    Sentence s;
    for (auto tok : detail::split_ws(line)) s.emplace_back(tok);
    out.push_back(std::move(s));
  }
  return out;
}

// Builds counts from an explicit square matrix; used for fixtures and tests.
inline CooccurrenceCounts make_counts(std::vector<std::string> terms,
                                      const Eigen::MatrixXd& dense, std::size_t window = 1) {
  if (dense.rows() != dense.cols() || static_cast<std::size_t>(dense.rows()) != terms.size())
    throw ValidationError("count matrix must be square and match the vocabulary");
  if ((dense.array() < 0.0).any()) throw ValidationError("counts must be nonnegative");
  CooccurrenceCounts c;
  c.terms = std::move(terms);
  c.counts = dense.sparseView();
  c.counts.makeCompressed();
  c.window = window;
  c.total = dense.sum();
  return c;
}

// Symmetric window counting. Tokens rarer than `min_count` are dropped
// from the vocabulary but keep their position, so they still occupy a
// window slot. Windows never cross line boundaries.
inline CooccurrenceCounts count_cooccurrences(const std::vector<Sentence>& corpus,
                                              std::size_t window, std::size_t min_count,
                                              unsigned threads = 1) {
  if (window < 1) throw ValidationError("window must be at least 1");

  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& s : corpus)
    for (const auto& t : s) ++freq[t];
  if (freq.empty()) throw ValidationError("empty corpus");

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [t, f] : freq)
    if (f >= min_count) kept.emplace_back(t, f);
  if (kept.empty()) throw ValidationError("no term reaches min_count " + std::to_string(min_count));
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  CooccurrenceCounts out;
  out.window = window;
  std::unordered_map<std::string, std::int64_t> id;
  for (const auto& [t, f] : kept) {
    id.emplace(t, static_cast<std::int64_t>(out.terms.size()));
    out.terms.push_back(t);
  }
  const auto n = static_cast<std::uint64_t>(out.terms.size());

  using CellMap = std::unordered_map<std::uint64_t, double>;
  auto count_range = [&](std::size_t begin, std::size_t end) {
    CellMap cells;
    std::vector<std::int64_t> ids;
    for (std::size_t li = begin; li < end; ++li) {
      const auto& s = corpus[li];
      ids.clear();
      for (const auto& t : s) {
        auto it = id.find(t);
        ids.push_back(it == id.end() ? -1 : it->second);
      }
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0) continue;
        const std::size_t lo = i >= window ? i - window : 0;
        const std::size_t hi = std::min(ids.size(), i + window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i || ids[j] < 0) continue;
          cells[static_cast<std::uint64_t>(ids[i]) * n + static_cast<std::uint64_t>(ids[j])] += 1.0;
        }
      }
    }
    return cells;
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(corpus.size(), 1))));
  CellMap cells;
  if (threads == 1) {
    cells = count_range(0, corpus.size());
  } else {
    std::vector<CellMap> parts(threads);
    std::vector<std::thread> pool;
    const std::size_t chunk = (corpus.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(corpus.size(), t * chunk);
      const std::size_t e = std::min(corpus.size(), b + chunk);
      pool.emplace_back([&, t, b, e] { parts[t] = count_range(b, e); });
    }
    for (auto& th : pool) th.join();
    cells = std::move(parts[0]);
    for (unsigned t = 1; t < threads; ++t)
      for (const auto& [key, v] : parts[t]) cells[key] += v;
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(cells.size());
  for (const auto& [key, v] : cells) {
    trip.emplace_back(static_cast<int>(key / n), static_cast<int>(key % n), v);
    out.total += v;
  }
  out.counts.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.counts.setFromTriplets(trip.begin(), trip.end());
  out.counts.makeCompressed();
  return out;
}

// P_alpha(c) = #(.,c)^alpha / sum_c' #(.,c')^alpha
inline Eigen::VectorXd smoothed_context_distribution(const CooccurrenceCounts& counts,
                                                     double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  Eigen::VectorXd col = Eigen::VectorXd::Zero(counts.counts.cols());
  for (Eigen::Index r = 0; r < counts.counts.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(counts.counts, r); it; ++it) col(it.col()) += it.value();
  Eigen::VectorXd p = col.array().pow(alpha).matrix();
  const double z = p.sum();
  if (z <= 0.0) throw ValidationError("context marginals are all zero");
  return p / z;
}

namespace detail {

inline Eigen::VectorXd row_sums(const SparseMatrix& m) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m.rows());
  for (Eigen::Index i = 0; i < m.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(m, i); it; ++it) r(i) += it.value();
  return r;
}

// Keeps cells where log(#(w,c) / (#(w,.) * ctx(c))) > 0.
template <class ContextTerm>
SparseMatrix positive_pmi(const SparseMatrix& counts, ContextTerm ctx) {
  const Eigen::VectorXd rows = row_sums(counts);
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < counts.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(counts, i); it; ++it) {
      if (it.value() <= 0.0) continue;
      const double pmi = std::log(it.value() / (rows(i) * ctx(it.col())));
      if (pmi > 0.0) trip.emplace_back(static_cast<int>(i), static_cast<int>(it.col()), pmi);
    }
  SparseMatrix w(counts.rows(), counts.cols());
  w.setFromTriplets(trip.begin(), trip.end());
  w.makeCompressed();
  return w;
}

}  // namespace detail

// max(0, ln(#(w,c) * total / (#(w,.) * #(.,c))))
inline WeightedMatrix ppmi(const CooccurrenceCounts& counts) {
  if (!(counts.total > 0.0)) throw ValidationError("co-occurrence total must be positive");
  Eigen::VectorXd col = Eigen::VectorXd::Zero(counts.counts.cols());
  for (Eigen::Index r = 0; r < counts.counts.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(counts.counts, r); it; ++it) col(it.col()) += it.value();
  const double total = counts.total;
  WeightedMatrix out;
  out.terms = counts.terms;
  out.scheme = WeightScheme::ppmi;
  out.alpha = 1.0;
  out.weights = detail::positive_pmi(counts.counts,
                                     [&](Eigen::Index c) { return col(c) / total; });
  return out;
}

// PPMI with the context marginal replaced by P_alpha.
inline WeightedMatrix smoothed_ppmi(const CooccurrenceCounts& counts, double alpha = 0.75) {
  if (!(counts.total > 0.0)) throw ValidationError("co-occurrence total must be positive");
  const Eigen::VectorXd p = smoothed_context_distribution(counts, alpha);
  WeightedMatrix out;
  out.terms = counts.terms;
  out.scheme = WeightScheme::sppmi;
  out.alpha = alpha;
  out.weights = detail::positive_pmi(counts.counts, [&](Eigen::Index c) { return p(c); });
  return out;
}

namespace detail {

// Thin orthonormal basis of the columns of `a` (a.rows() >= a.cols()).
inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& a) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
}

}  // namespace detail

// Leading `dim` singular triplets by randomized subspace iteration.
//
// Each sweep orthonormalizes Q <- orth(M Z), then factors M^T Q = Z R, so
// Q^T M = R^T Z^T and the singular values of the small square R are the
// Ritz values. Stops once the leading `dim` of them change by less than
// tolerance * sigma_1 between sweeps.
inline TruncatedSvd truncated_svd(const SparseMatrix& m, const FactorizationConfig& config) {
  const auto rows = static_cast<std::size_t>(m.rows());
  const auto cols = static_cast<std::size_t>(m.cols());
  if (config.dim == 0) throw ValidationError("factorization dim must be at least 1");
  if (config.dim > std::min(rows, cols))
    throw ValidationError("factorization dim " + std::to_string(config.dim) +
                          " exceeds matrix size " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  const auto l = static_cast<Eigen::Index>(std::min(config.dim + config.oversample,
                                                    std::min(rows, cols)));
  const auto d = static_cast<Eigen::Index>(config.dim);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd omega(m.cols(), l);
  for (Eigen::Index j = 0; j < l; ++j)
    for (Eigen::Index i = 0; i < m.cols(); ++i) omega(i, j) = gauss(rng);

  Eigen::MatrixXd q = detail::orthonormalize(m * omega);
  Eigen::VectorXd prev;
  double change = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= config.max_iters; ++it) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(m.transpose() * q));
    Eigen::MatrixXd z = qr.householderQ() * Eigen::MatrixXd::Identity(m.cols(), l);
    Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(l, l).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd s = svd.singularValues();
    if (prev.size() == s.size()) {
      const double scale = std::max(s(0), std::numeric_limits<double>::min());
      change = ((s.head(d) - prev.head(d)).cwiseAbs() / scale).maxCoeff();
    }
    // A full-width basis captures M exactly after one sweep.
    if (change <= config.tolerance || l == static_cast<Eigen::Index>(std::min(rows, cols))) {
      TruncatedSvd out;
      out.u = q * svd.matrixU().leftCols(d);
      out.v = z * svd.matrixV().leftCols(d);
      out.s = s.head(d);
      out.iterations = it;
      return out;
    }
    prev = s;
    q = detail::orthonormalize(m * z);
  }
  throw ConvergenceError("truncated SVD did not converge in " + std::to_string(config.max_iters) +
                             " sweeps",
                         change);
}

// Row embeddings W = U_d * diag(s_d)^sv_exponent.
inline EmbeddingModel factorize(const WeightedMatrix& matrix, const FactorizationConfig& config) {
  if (!(config.sv_exponent >= 0.0 && config.sv_exponent <= 1.0))
    throw ValidationError("sv_exponent must lie in [0, 1]");
  const TruncatedSvd svd = truncated_svd(matrix.weights, config);
  Eigen::VectorXd scale(svd.s.size());
  for (Eigen::Index i = 0; i < svd.s.size(); ++i)
    scale(i) = config.sv_exponent == 0.0 ? 1.0 : std::pow(svd.s(i), config.sv_exponent);
  Matrix w = svd.u * scale.asDiagonal();
  return EmbeddingModel(matrix.terms, std::move(w), NormScheme::raw);
}

}  // namespace termset
