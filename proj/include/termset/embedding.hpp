#pragma once

// Dense distributional models: loading, normalization and exact
// nearest-neighbour search.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "termset/error.hpp"

namespace termset {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class NormScheme { raw, unit_l2 };

inline const char* to_string(NormScheme s) {
  return s == NormScheme::raw ? "raw" : "unit-l2";
}

struct Neighbor {
  std::string term;
  double score;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline std::string at_line(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

}  // namespace detail

// Vocabulary plus one dense row per term. Immutable once built; share it
// between readers through shared_ptr<const EmbeddingModel>.
class EmbeddingModel {
public:
  EmbeddingModel() = default;

  EmbeddingModel(std::vector<std::string> terms, Matrix vectors,
                 NormScheme scheme = NormScheme::raw)
      : terms_(std::move(terms)), vectors_(std::move(vectors)), scheme_(scheme) {
    if (static_cast<std::size_t>(vectors_.rows()) != terms_.size())
      throw ValidationError("row count " + std::to_string(vectors_.rows()) +
                            " does not match term count " + std::to_string(terms_.size()));
    index_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (terms_[i].empty()) throw ValidationError("empty term at row " + std::to_string(i));
      if (!index_.emplace(terms_[i], i).second)
        throw ValidationError("duplicate term \"" + terms_[i] + "\"");
    }
    if (!vectors_.allFinite()) throw ValidationError("non-finite value in vectors");
    if (scheme_ == NormScheme::unit_l2) {
      for (Eigen::Index r = 0; r < vectors_.rows(); ++r)
        if (std::abs(vectors_.row(r).norm() - 1.0) > 1e-6)
          throw ValidationError("row \"" + terms_[r] + "\" is not unit length");
    }
  }

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
  NormScheme norm_scheme() const noexcept { return scheme_; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  const std::string& term(std::size_t i) const { return terms_.at(i); }
  auto row(std::size_t i) const { return vectors_.row(static_cast<Eigen::Index>(i)); }

  std::optional<std::size_t> index_of(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(std::string_view term) const { return index_of(term).has_value(); }

  std::size_t require_index(std::string_view term) const {
    if (auto i = index_of(term)) return *i;
    throw ValidationError("term \"" + std::string(term) + "\" is not in the vocabulary");
  }

  Vector vector(std::string_view term) const {
    return vectors_.row(static_cast<Eigen::Index>(require_index(term))).transpose();
  }

private:
  std::vector<std::string> terms_;
  Matrix vectors_;
  NormScheme scheme_ = NormScheme::raw;
  std::unordered_map<std::string, std::size_t> index_;
};

inline EmbeddingModel read_word2vec_text(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::split_ws(line).empty()) break;
  }
  auto header = detail::split_ws(line);
  long long n = 0, d = 0;
  if (header.size() != 2 || !detail::parse_number(header[0], n) ||
      !detail::parse_number(header[1], d) || n < 0 || d <= 0)
    throw ValidationError(detail::at_line(line_no, "malformed header, expected \"N d\""));

  std::vector<std::string> terms;
  terms.reserve(static_cast<std::size_t>(n));
  Matrix vectors(n, d);
  std::unordered_set<std::string> seen;
  while (static_cast<long long>(terms.size()) < n && std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (static_cast<long long>(fields.size()) != d + 1)
      throw ValidationError(detail::at_line(
          line_no, "row arity mismatch: expected " + std::to_string(d) + " values, got " +
                       std::to_string(fields.size() - 1)));
    std::string term(fields[0]);
    if (!seen.insert(term).second)
      throw ValidationError(detail::at_line(line_no, "duplicate term \"" + term + "\""));
    const auto r = static_cast<Eigen::Index>(terms.size());
    for (long long c = 0; c < d; ++c) {
      double v = 0.0;
      if (!detail::parse_number(fields[c + 1], v) || !std::isfinite(v))
        throw ValidationError(detail::at_line(
            line_no, "non-finite or unparsable value \"" + std::string(fields[c + 1]) + "\""));
      vectors(r, c) = v;
    }
    terms.push_back(std::move(term));
  }
  if (static_cast<long long>(terms.size()) != n)
    throw ValidationError(detail::at_line(line_no, "expected " + std::to_string(n) +
                                                       " rows, found " +
                                                       std::to_string(terms.size())));
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::split_ws(line).empty())
      throw ValidationError(detail::at_line(line_no, "unexpected row beyond declared count"));
  }
  return EmbeddingModel(std::move(terms), std::move(vectors), NormScheme::raw);
}

// Text word2vec format: header "N d", then "term v1 ... vd" per line.
inline EmbeddingModel load_word2vec_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return read_word2vec_text(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void write_word2vec_text(std::ostream& out, const EmbeddingModel& model) {
  out << model.size() << ' ' << model.dim() << '\n';
  out << std::setprecision(9);
  for (std::size_t i = 0; i < model.size(); ++i) {
    out << model.term(i);
    for (std::size_t c = 0; c < model.dim(); ++c)
      out << ' ' << model.vectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    out << '\n';
  }
}

inline void save_word2vec_text(const EmbeddingModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_word2vec_text(out, model);
  if (!out) throw Error("write failed for " + path);
}

inline EmbeddingModel normalize_unit_l2(const EmbeddingModel& model) {
  Matrix v = model.vectors();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double n = v.row(r).norm();
    if (n == 0.0)
      throw ValidationError("zero vector \"" + model.term(static_cast<std::size_t>(r)) + "\"");
    v.row(r) /= n;
  }
  return EmbeddingModel(model.terms(), std::move(v), NormScheme::unit_l2);
}

template <class A, class B>
double cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size())
    throw ValidationError("vector length mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine of a zero vector");
  double c = a.dot(b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

// Cosine similarity; on unit-normalized inputs this is the dot product.
template <class A, class B>
double similarity(const EmbeddingModel& model, const Eigen::MatrixBase<A>& a,
                  const Eigen::MatrixBase<B>& b) {
  if (static_cast<std::size_t>(a.size()) != model.dim() ||
      static_cast<std::size_t>(b.size()) != model.dim())
    throw ValidationError("vector length does not match model dimension " +
                          std::to_string(model.dim()));
  return cosine(a, b);
}

// Result ordering for select_top_k.
enum class Order {
  descending,  // highest score first
  ascending,   // lowest score first
};

// One flag per vocabulary row; true rows are never returned.
using ExclusionMask = std::vector<bool>;

inline ExclusionMask make_exclusion_mask(const EmbeddingModel& model,
                                         const std::unordered_set<std::string>& exclude) {
  ExclusionMask mask(model.size(), false);
  for (const auto& t : exclude)
    if (auto i = model.index_of(t)) mask[*i] = true;
  return mask;
}

// Exact top-k over every non-excluded row. `score(i)` must be thread-safe.
// Ties are broken by ascending term string so results are reproducible,
// and a sharded scan returns exactly what a single pass would.
template <class ScoreFn>
std::vector<Neighbor> select_top_k(const EmbeddingModel& model, std::size_t k,
                                   const ExclusionMask& exclude, ScoreFn&& score,
                                   Order order = Order::descending, unsigned threads = 1) {
  struct Scored {
    std::size_t index;
    double score;
  };
  const auto& terms = model.terms();
  auto better = [&](const Scored& a, const Scored& b) {
    if (a.score != b.score)
      return order == Order::descending ? a.score > b.score : a.score < b.score;
    return terms[a.index] < terms[b.index];
  };
  auto scan = [&](std::size_t begin, std::size_t end) {
    std::vector<Scored> local;
    local.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i)
      if (exclude.empty() || !exclude[i]) local.push_back({i, static_cast<double>(score(i))});
    const std::size_t keep = std::min(k, local.size());
    std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep),
                      local.end(), better);
    local.resize(keep);
    return local;
  };

  const std::size_t n = model.size();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<Scored> merged;
  if (threads == 1) {
    merged = scan(0, n);
  } else {
    std::vector<std::vector<Scored>> parts(threads);
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(n, t * chunk), e = std::min(n, b + chunk);
      pool.emplace_back([&, t, b, e] { parts[t] = scan(b, e); });
    }
    for (auto& th : pool) th.join();
    for (auto& p : parts) merged.insert(merged.end(), p.begin(), p.end());
    const std::size_t keep = std::min(k, merged.size());
    std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep),
                      merged.end(), better);
    merged.resize(keep);
  }

  std::vector<Neighbor> out;
  out.reserve(merged.size());
  for (const auto& s : merged) out.push_back({terms[s.index], s.score});
  return out;
}

// The k terms most similar (cosine) to `query`, skipping `exclude`.
template <class Q>
std::vector<Neighbor> top_k_similar(const EmbeddingModel& model, const Eigen::MatrixBase<Q>& query,
                                    std::size_t k, const ExclusionMask& exclude,
                                    unsigned threads = 1) {
  if (k == 0) throw ValidationError("k must be at least 1");
  if (static_cast<std::size_t>(query.size()) != model.dim())
    throw ValidationError("query length does not match model dimension");
  const double qn = query.norm();
  if (qn == 0.0 || !std::isfinite(qn)) throw ValidationError("query vector is zero or non-finite");
  const Vector q = query.derived().template cast<double>() / qn;
  const bool unit = model.norm_scheme() == NormScheme::unit_l2;
  const auto& v = model.vectors();
  return select_top_k(
      model, k, exclude,
      [&](std::size_t i) {
        const auto r = v.row(static_cast<Eigen::Index>(i));
        const double dot = r.dot(q);
        if (unit) return dot;
        const double rn = r.norm();
        return rn == 0.0 ? 0.0 : dot / rn;
      },
      Order::descending, threads);
}

template <class Q>
std::vector<Neighbor> top_k_similar(const EmbeddingModel& model, const Eigen::MatrixBase<Q>& query,
                                    std::size_t k,
                                    const std::unordered_set<std::string>& exclude = {},
                                    unsigned threads = 1) {
  return top_k_similar(model, query, k, make_exclusion_mask(model, exclude), threads);
}

}  // namespace termset
