#pragma once

// Soft-margin kernel SVM trained by SMO, and Simple Margin candidate
// selection (query the unlabeled terms nearest the decision boundary).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "termset/centrality.hpp"
#include "termset/config.hpp"
#include "termset/embedding.hpp"
#include "termset/error.hpp"
#include "termset/labeled_set.hpp"

namespace termset {

enum class KernelKind { linear, rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  double gamma = 1.0;  // rbf only

  static KernelSpec linear() { return {KernelKind::linear, 1.0}; }
  static KernelSpec rbf(double gamma) {
    if (!(gamma > 0.0)) throw ValidationError("rbf gamma must be positive");
    return {KernelKind::rbf, gamma};
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

template <class A, class B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& a,
                   const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) throw ValidationError("kernel arguments differ in length");
  if (spec.kind == KernelKind::linear) return a.dot(b);
  return std::exp(-spec.gamma * (a - b).squaredNorm());
}

struct SupportVector {
  std::string term;
  Vector x;
  int y = 1;  // +1 or -1
  double alpha = 0.0;
};

struct TrainingStats {
  std::size_t iterations = 0;
  double max_violation = 0.0;  // m(alpha) - M(alpha) at exit
};

class SvmModel {
public:
  SvmModel() = default;
  SvmModel(KernelSpec kernel, double C, double bias, std::vector<SupportVector> svs,
           TrainingStats stats = {})
      : kernel_(kernel), C_(C), bias_(bias), svs_(std::move(svs)), stats_(stats) {
    if (!svs_.empty()) {
      const auto dim = svs_.front().x.size();
      sv_matrix_.resize(static_cast<Eigen::Index>(svs_.size()), dim);
      coef_.resize(static_cast<Eigen::Index>(svs_.size()));
      for (std::size_t i = 0; i < svs_.size(); ++i) {
        if (svs_[i].x.size() != dim) throw ValidationError("support vectors differ in length");
        sv_matrix_.row(static_cast<Eigen::Index>(i)) = svs_[i].x.transpose();
        coef_(static_cast<Eigen::Index>(i)) = svs_[i].alpha * svs_[i].y;
      }
      // Primal weights, accumulated in support-vector order.
      if (kernel_.kind == KernelKind::linear) {
        w_ = Vector::Zero(dim);
        for (const auto& sv : svs_) w_ += (sv.alpha * sv.y) * sv.x;
      }
    }
  }

  const KernelSpec& kernel() const noexcept { return kernel_; }
  double C() const noexcept { return C_; }
  double bias() const noexcept { return bias_; }
  const std::vector<SupportVector>& support_vectors() const noexcept { return svs_; }
  const TrainingStats& stats() const noexcept { return stats_; }
  // Only meaningful for the linear kernel.
  const Vector& primal_weights() const noexcept { return w_; }

  // d(x) = sum_i alpha_i y_i K(x_i, x) + bias
  template <class X>
  double decision_value(const Eigen::MatrixBase<X>& x) const {
    if (svs_.empty()) return bias_;
    if (x.size() != sv_matrix_.cols())
      throw ValidationError("input length does not match the model dimension");
    if (kernel_.kind == KernelKind::linear) return w_.dot(x.reshaped()) + bias_;
    const Vector sq = (sv_matrix_.rowwise() - x.reshaped().transpose()).rowwise().squaredNorm();
    return coef_.dot((-kernel_.gamma * sq).array().exp().matrix()) + bias_;
  }

  // sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
  double dual_objective() const {
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < svs_.size(); ++i) {
      lin += svs_[i].alpha;
      for (std::size_t j = 0; j < svs_.size(); ++j)
        quad += svs_[i].alpha * svs_[j].alpha * svs_[i].y * svs_[j].y *
                kernel_eval(kernel_, svs_[i].x, svs_[j].x);
    }
    return lin - 0.5 * quad;
  }

private:
  KernelSpec kernel_;
  double C_ = 1.0;
  double bias_ = 0.0;
  std::vector<SupportVector> svs_;
  TrainingStats stats_;
  Matrix sv_matrix_;
  Vector coef_;
  Vector w_;
};

template <class X>
double decision_value(const SvmModel& svm, const Eigen::MatrixBase<X>& x) {
  return svm.decision_value(x);
}

struct SmoOptions {
  double tolerance = 1e-3;
  std::size_t max_iters = 100000;
  bool class_weighting = false;  // scale C by n / (2 n_class)
};

struct SmoResult {
  Vector alpha;
  double bias = 0.0;
  TrainingStats stats;
};

// Dual SMO with the maximal-violating-pair working set. Q is dense;
// training sets here are a few hundred points at most. Ties in the pair
// selection go to the lowest index, so results are deterministic.
inline SmoResult solve_smo(const Eigen::MatrixXd& kernel, const std::vector<int>& y,
                           const Vector& upper, const SmoOptions& options) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);  // Q alpha - e
  constexpr double kTau = 1e-12;

  auto in_up = [&](Eigen::Index t) {
    return (y[t] == 1 && alpha(t) < upper(t)) || (y[t] == -1 && alpha(t) > 0.0);
  };
  auto in_low = [&](Eigen::Index t) {
    return (y[t] == 1 && alpha(t) > 0.0) || (y[t] == -1 && alpha(t) < upper(t));
  };

  std::size_t iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (;;) {
    Eigen::Index i = -1, j = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y[t] * grad(t);
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    gap = (i < 0 || j < 0) ? 0.0 : gmax - gmin;
    if (gap < options.tolerance) break;
    if (iter >= options.max_iters)
      throw ConvergenceError("SMO did not converge in " + std::to_string(options.max_iters) +
                                 " iterations (maximal KKT violation " + std::to_string(gap) +
                                 ")",
                             gap);
    ++iter;

    const double qii = kernel(i, i), qjj = kernel(j, j), kij = kernel(i, j);
    const double old_ai = alpha(i), old_aj = alpha(j);
    const double ci = upper(i), cj = upper(j);
    double quad = qii + qjj - 2.0 * kij;
    if (quad <= 0.0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = diff; }
      } else {
        if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = -diff; }
      }
      if (diff > ci - cj) {
        if (alpha(i) > ci) { alpha(i) = ci; alpha(j) = ci - diff; }
      } else {
        if (alpha(j) > cj) { alpha(j) = cj; alpha(i) = cj + diff; }
      }
    } else {
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > ci) {
        if (alpha(i) > ci) { alpha(i) = ci; alpha(j) = sum - ci; }
      } else {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = sum; }
      }
      if (sum > cj) {
        if (alpha(j) > cj) { alpha(j) = cj; alpha(i) = sum - cj; }
      } else {
        if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = sum; }
      }
    }

    const double di = alpha(i) - old_ai, dj = alpha(j) - old_aj;
    for (Eigen::Index t = 0; t < n; ++t)
      grad(t) += y[t] * (y[i] * kernel(t, i) * di + y[j] * kernel(t, j) * dj);
  }

  // rho from the free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad(t);
    const bool at_upper = alpha(t) >= upper(t);
    const bool at_lower = alpha(t) <= 0.0;
    if (at_upper) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (at_lower) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  return {std::move(alpha), -rho, {iter, gap}};
}

// Trains on the rows of `x` with labels y in {-1, +1}.
inline SvmModel train_svm(const Matrix& x, const std::vector<int>& y,
                          const std::vector<std::string>& terms, const KernelSpec& kernel,
                          double C, const SmoOptions& options = {}) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (x.rows() != n || terms.size() != y.size())
    throw ValidationError("training data, labels and terms differ in length");
  if (!(C > 0.0)) throw ValidationError("C must be positive");
  std::size_t npos = 0, nneg = 0;
  for (int v : y) {
    if (v == 1) ++npos;
    else if (v == -1) ++nneg;
    else throw ValidationError("labels must be +1 or -1");
  }
  if (npos == 0 || nneg == 0)
    throw ValidationError("SVM training needs at least one positive and one negative example");

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a; b < n; ++b)
      k(a, b) = k(b, a) = kernel_eval(kernel, x.row(a).transpose(), x.row(b).transpose());

  Vector upper(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double c = C;
    if (options.class_weighting)
      c *= static_cast<double>(n) / (2.0 * static_cast<double>(y[t] == 1 ? npos : nneg));
    upper(t) = c;
  }

  SmoResult r = solve_smo(k, y, upper, options);
  std::vector<SupportVector> svs;
  for (Eigen::Index t = 0; t < n; ++t)
    if (r.alpha(t) > 0.0) svs.push_back({terms[t], x.row(t).transpose(), y[t], r.alpha(t)});
  return SvmModel(kernel, C, r.bias, std::move(svs), r.stats);
}

inline KernelSpec kernel_for(const ExpansionConfig& config, std::size_t dim) {
  if (config.method == Method::svm_linear) return KernelSpec::linear();
  if (config.method == Method::svm_rbf) return KernelSpec::rbf(config.gamma_for(dim));
  throw ValidationError(std::string("method ") + to_string(config.method) +
                        " is not an SVM method");
}

inline SvmModel train_svm(const LabeledTermSet& labeled, const EmbeddingModel& model,
                          const KernelSpec& kernel, double C, const SmoOptions& options = {}) {
  std::vector<std::string> terms;
  std::vector<int> y;
  for (const auto& e : labeled.entries()) {
    terms.push_back(e.term);
    y.push_back(e.label == Label::positive ? 1 : -1);
  }
  return train_svm(gather_rows(model, terms), y, terms, kernel, C, options);
}

inline SvmModel train_svm(const LabeledTermSet& labeled, const EmbeddingModel& model,
                          const ExpansionConfig& config) {
  return train_svm(labeled, model, kernel_for(config, model.dim()), config.C,
                   SmoOptions{config.smo.tolerance, config.smo.max_iters, config.class_weighting});
}

// Largest KKT violation of the trained model over a training set.
inline double kkt_residual(const SvmModel& svm, const Matrix& x, const std::vector<int>& y,
                           const std::vector<double>& alpha, double C) {
  double worst = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double margin = y[t] * svm.decision_value(x.row(static_cast<Eigen::Index>(t)).transpose());
    double v = 0.0;
    if (alpha[t] <= 0.0) v = std::max(0.0, 1.0 - margin);
    else if (alpha[t] >= C) v = std::max(0.0, margin - 1.0);
    else v = std::abs(margin - 1.0);
    worst = std::max(worst, v);
  }
  return worst;
}

// Simple Margin: the k unlabeled terms with smallest |d(t)|.
inline std::vector<Neighbor> expand_margin(const SvmModel& svm, const EmbeddingModel& model,
                                           const LabeledTermSet& labeled, std::size_t k,
                                           unsigned threads = 1) {
  if (k == 0) throw ValidationError("k must be at least 1");
  return select_top_k(
      model, k, labeled.exclusion_mask(model),
      [&](std::size_t i) { return std::abs(svm.decision_value(model.row(i).transpose())); },
      Order::ascending, threads);
}

// Every unlabeled term the classifier places on the positive side, best first.
inline std::vector<Neighbor> classify_all(const SvmModel& svm, const EmbeddingModel& model,
                                          const LabeledTermSet& labeled, double threshold = 0.0) {
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (labeled.contains(model.term(i))) continue;
    const double d = svm.decision_value(model.row(i).transpose());
    if (d > threshold) out.push_back({model.term(i), d});
  }
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.score != b.score ? a.score > b.score : a.term < b.term;
  });
  return out;
}

inline Expansion expand_svm(const EmbeddingModel& model, const LabeledTermSet& labeled,
                            const ExpansionConfig& config) {
  const SvmModel svm = train_svm(labeled, model, config);
  return {expand_margin(svm, model, labeled, config.k, config.threads), config.method, false};
}

inline nlohmann::json svm_to_json(const SvmModel& svm) {
  auto svs = nlohmann::json::array();
  for (const auto& sv : svm.support_vectors())
    svs.push_back({{"term", sv.term}, {"y", sv.y}, {"alpha", sv.alpha}});
  nlohmann::json kernel = {{"kind", svm.kernel().kind == KernelKind::linear ? "linear" : "rbf"}};
  if (svm.kernel().kind == KernelKind::rbf) kernel["gamma"] = svm.kernel().gamma;
  return {{"kernel", kernel}, {"C", svm.C()}, {"bias", svm.bias()}, {"support_vectors", svs}};
}

// Support vectors are stored by term; their vectors come from `model`.
inline SvmModel svm_from_json(const nlohmann::json& j, const EmbeddingModel& model) {
  const auto& k = j.at("kernel");
  const auto kind = k.at("kind").get<std::string>();
  KernelSpec spec;
  if (kind == "linear") spec = KernelSpec::linear();
  else if (kind == "rbf") spec = KernelSpec::rbf(k.at("gamma").get<double>());
  else throw ValidationError("unknown kernel \"" + kind + "\"");
  std::vector<SupportVector> svs;
  for (const auto& s : j.at("support_vectors")) {
    const auto term = s.at("term").get<std::string>();
    svs.push_back({term, model.vector(term), s.at("y").get<int>(), s.at("alpha").get<double>()});
  }
  return SvmModel(spec, j.at("C").get<double>(), j.at("bias").get<double>(), std::move(svs));
}

}  // namespace termset
