#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "termset/centrality.hpp"
#include "termset/labeled_set.hpp"

using namespace termset;
using termset::testing::gaussian_matrix;

namespace {

double cos_between(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

// Dominant eigenvector of W^T W from a dense symmetric eigensolver.
Vector dense_dominant(const Matrix& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(w.transpose() * w));
  return es.eigenvectors().col(es.eigenvectors().cols() - 1);
}

Matrix unit_rows(Matrix m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
  return m;
}

}  // namespace

TEST(Centroid, Examples) {
  Matrix one{{0.3, -1.0, 2.0}};
  EXPECT_EQ(centroid(one).values, Vector(one.row(0).transpose()));
  Matrix two{{1.0, 0.0}, {0.0, 1.0}};
  Vector want(2);
  want << 0.5, 0.5;
  EXPECT_EQ(centroid(two).values, want);
  EXPECT_EQ(centroid(two).method, Method::centroid);
  EXPECT_THROW(centroid(Matrix(0, 2)), ValidationError);
}

TEST(Centroid, RankingEqualsMeanSimilarity) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix t = unit_rows(gaussian_matrix(rng, 10, 8));
    const Matrix q = unit_rows(gaussian_matrix(rng, 40, 8));
    const Vector c = centroid(t).values;
    std::vector<double> by_centroid(40), by_mean(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
      by_centroid[i] = q.row(i).dot(c) / c.norm();
      double s = 0.0;
      for (Eigen::Index j = 0; j < t.rows(); ++j) s += q.row(i).dot(t.row(j));
      by_mean[i] = s / static_cast<double>(t.rows());
    }
    std::vector<int> a(40), b(40);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    std::sort(a.begin(), a.end(), [&](int x, int y) { return by_centroid[x] > by_centroid[y]; });
    std::sort(b.begin(), b.end(), [&](int x, int y) { return by_mean[x] > by_mean[y]; });
    EXPECT_EQ(a, b) << "trial " << trial;
  }
}

TEST(Snr, HandComputedPair) {
  const double eps = 1e-6;
  auto v = snr_centroid(Matrix{{1.0, 0.0}, {1.0, 2.0}}, eps).values;
  EXPECT_NEAR(v(0), 1.0 / eps, 1e-6);
  EXPECT_NEAR(v(1), 1.0 / (std::sqrt(2.0) + eps), 1e-12);
}

TEST(Snr, ZeroVarianceKeepsDirection) {
  Vector u(4);
  u << 0.2, -0.5, 0.1, 0.8;
  Matrix w(2, 4);
  w.row(0) = u.transpose();
  w.row(1) = u.transpose();
  auto v = snr_centroid(w).values;
  EXPECT_GE(cos_between(v, u), 1.0 - 1e-9);
}

TEST(Snr, NoisyDimensionShrinks) {
  // Both dimensions have mean 1; the second has much larger spread.
  auto v = snr_centroid(Matrix{{1.0, 0.0}, {1.1, 2.0}, {0.9, 1.0}}).values;
  Matrix w{{1.0, 1.0}, {1.1, 3.0}, {0.9, -1.0}};
  auto s = snr_centroid(w).values;
  EXPECT_GT(std::abs(s(0)), std::abs(s(1)));
  EXPECT_GT(std::abs(v(0)), std::abs(v(1)));
}

TEST(Snr, Errors) {
  EXPECT_THROW(snr_centroid(Matrix{{1.0, 2.0}}), ValidationError);
  EXPECT_THROW(snr_centroid(Matrix{{1.0}, {2.0}}, 0.0), ValidationError);
}

TEST(Eigencentrality, RepeatedAxisDominates) {
  auto v = eigencentrality_vector(Matrix{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}).values;
  EXPECT_NEAR(v(0), 1.0, 1e-8);
  EXPECT_NEAR(v(1), 0.0, 1e-4);
}

TEST(Eigencentrality, RankOne) {
  std::mt19937_64 rng(2);
  Vector u = gaussian_matrix(rng, 6, 1);
  u.normalize();
  Matrix w(4, 6);
  for (int r = 0; r < 4; ++r) w.row(r) = u.transpose();
  auto v = eigencentrality_vector(w).values;
  EXPECT_GE(std::abs(cos_between(v, u)), 1.0 - 1e-8);
  EXPECT_GT(v.dot(u), 0.0);  // sign faces the rows
}

TEST(Eigencentrality, MatchesDenseEigensolver) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(2, 10);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix w = gaussian_matrix(rng, size(rng), size(rng));
    const Vector v = eigencentrality_vector(w).values;
    EXPECT_GE(std::abs(cos_between(v, dense_dominant(w))), 1.0 - 1e-8) << "trial " << trial;
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  }
}

TEST(Eigencentrality, SignFacesRows) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix w = gaussian_matrix(rng, 5, 4);
    const Vector v = eigencentrality_vector(w).values;
    double total = 0.0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) total += w.row(r).dot(v) / w.row(r).norm();
    EXPECT_GE(total, 0.0);
  }
}

TEST(Eigencentrality, InvariantToPermutationAndDuplication) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix w = gaussian_matrix(rng, 6, 5);
    const Vector base = eigencentrality_vector(w).values;

    Eigen::PermutationMatrix<Eigen::Dynamic> p(6);
    p.setIdentity();
    std::shuffle(p.indices().data(), p.indices().data() + 6, rng);
    const Matrix permuted = p * w;
    EXPECT_GE(cos_between(eigencentrality_vector(permuted).values, base), 1.0 - 1e-8);

    Matrix doubled(12, 5);
    doubled << w, w;
    EXPECT_GE(cos_between(eigencentrality_vector(doubled).values, base), 1.0 - 1e-8);
  }
}

TEST(Eigencentrality, BudgetExhaustionCarriesResidual) {
  // An unreachable tolerance with a one-step budget.
  std::mt19937_64 rng(3);
  const Matrix w = gaussian_matrix(rng, 8, 8);
  try {
    eigencentrality_vector(w, {1e-300, 1});
    FAIL() << "expected non-convergence";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual(), 0.0);
  }
  EXPECT_THROW(eigencentrality_vector(Matrix::Zero(3, 2)), ValidationError);
}

TEST(ExpandCentrality, OrthonormalReducesToTopK) {
  auto m = termset::testing::orthonormal_model(4);
  auto labeled = LabeledTermSet::from_seeds({"e1"}, {});
  ExpansionConfig cfg;
  cfg.k = 1;
  auto out = expand_centrality(m, labeled, cfg);
  ASSERT_EQ(out.candidates.size(), 1u);
  EXPECT_EQ(out.candidates[0].term, "e2");  // all others tie at 0
  EXPECT_FALSE(out.fallback);
}

TEST(ExpandCentrality, TwoClusterCandidatesStayInCluster) {
  std::mt19937_64 rng(8);
  for (Method method : {Method::centroid, Method::snr, Method::eigencentrality}) {
    auto cm = termset::testing::cluster_model(rng, 16, {60, 60}, {0.3, 0.3});
    auto labeled = LabeledTermSet::from_seeds(
        {cm.members[0][0], cm.members[0][1], cm.members[0][2], cm.members[0][3]},
        {cm.members[1][0]});
    ExpansionConfig cfg;
    cfg.method = method;
    cfg.k = 10;
    auto out = expand_centrality(cm.model, labeled, cfg);
    ASSERT_EQ(out.candidates.size(), 10u);
    const std::unordered_set<std::string> a(cm.members[0].begin(), cm.members[0].end());
    for (const auto& c : out.candidates) {
      EXPECT_TRUE(a.count(c.term)) << to_string(method) << " " << c.term;
      EXPECT_FALSE(labeled.contains(c.term));
    }
  }
}

TEST(ExpandCentrality, DependsOnlyOnPositives) {
  std::mt19937_64 rng(41);
  auto m = termset::testing::random_model(rng, 80, 6);
  for (Method method : {Method::centroid, Method::snr, Method::eigencentrality}) {
    ExpansionConfig cfg;
    cfg.method = method;
    auto a = LabeledTermSet::from_seeds({m.term(0), m.term(1), m.term(2)}, {m.term(3)});
    auto b = LabeledTermSet::from_seeds({m.term(0), m.term(1), m.term(2)}, {m.term(40)});
    auto ca = expand_centrality(m, a, cfg).candidates;
    auto cb = expand_centrality(m, b, cfg).candidates;
    // Negatives only differ in what is excluded; drop those two terms.
    auto strip = [&](std::vector<Neighbor> v) {
      std::erase_if(v, [&](const Neighbor& n) { return n.term == m.term(3) || n.term == m.term(40); });
      return v;
    };
    auto sa = strip(ca), sb = strip(cb);
    const std::size_t n = std::min(sa.size(), sb.size());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(sa[i], sb[i]) << to_string(method);
  }
}

TEST(ExpandCentrality, SinglePositiveFallsBack) {
  std::mt19937_64 rng(6);
  auto m = termset::testing::random_model(rng, 30, 5);
  auto labeled = LabeledTermSet::from_seeds({m.term(0)}, {m.term(1)});
  ExpansionConfig cfg;
  cfg.method = Method::centroid;
  const auto plain = expand_centrality(m, labeled, cfg).candidates;
  for (Method method : {Method::snr, Method::eigencentrality}) {
    cfg.method = method;
    auto out = expand_centrality(m, labeled, cfg);
    EXPECT_TRUE(out.fallback);
    EXPECT_EQ(out.method_used, Method::centroid);
    EXPECT_EQ(out.candidates, plain);
  }
}

TEST(ExpandCentrality, ErrorsAndShortList) {
  auto m = termset::testing::orthonormal_model(3);
  ExpansionConfig cfg;
  EXPECT_THROW(expand_centrality(m, LabeledTermSet::from_seeds({}, {"e1"}), cfg), ValidationError);
  cfg.method = Method::svm_rbf;
  EXPECT_THROW(expand_centrality(m, LabeledTermSet::from_seeds({"e1"}, {}), cfg), ValidationError);
  cfg.method = Method::centroid;
  auto out = expand_centrality(m, LabeledTermSet::from_seeds({"e1"}, {"e2"}), cfg);
  ASSERT_EQ(out.candidates.size(), 1u);
  EXPECT_EQ(out.candidates[0].term, "e3");
}

TEST(UpdateLabeledSet, FirstIterationWalkthrough) {
  auto l0 = LabeledTermSet::from_seeds({"good", "happy", "love", "nice", "great"},
                                       {"bad", "sad", "hate", "awful", "poor"});
  const std::vector<std::string> candidates = {"agreeable", "table", "supportive", "window",
                                               "river",     "seven", "chair",      "paper",
                                               "green",     "walk"};
  std::vector<bool> labels(10, false);
  labels[0] = labels[2] = true;
  auto l1 = update_labeled_set(l0, candidates, labels, 1);
  EXPECT_EQ(l1.positive_count(), 7u);
  EXPECT_EQ(l1.negative_count(), 13u);
  EXPECT_EQ(l1.size(), 20u);
  EXPECT_EQ(l0.size(), 10u);
  for (const auto& e : l1.entries())
    if (e.term == "agreeable") {
      EXPECT_EQ(e.provenance, Provenance::annotated);
      EXPECT_EQ(e.iteration, 1);
    }
}

TEST(UpdateLabeledSet, EmptyIsIdentityAndRelabelFails) {
  auto l0 = LabeledTermSet::from_seeds({"a"}, {"b"});
  EXPECT_EQ(update_labeled_set(l0, {}, {}, 1), l0);
  try {
    update_labeled_set(l0, {"c", "b"}, {true, true}, 1);
    FAIL() << "expected relabel error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("\"b\""), std::string::npos);
  }
  EXPECT_THROW(update_labeled_set(l0, {"c"}, {true, false}, 1), ValidationError);
  EXPECT_THROW(LabeledTermSet::from_seeds({"a"}, {"a"}), ValidationError);
}

TEST(UpdateLabeledSet, CountsNeverDecreaseOverARun) {
  std::mt19937_64 rng(12);
  auto m = termset::testing::random_model(rng, 200, 8);
  auto labeled = LabeledTermSet::from_seeds({m.term(0), m.term(1)}, {m.term(2)});
  ExpansionConfig cfg;
  std::bernoulli_distribution coin(0.4);
  std::unordered_set<std::string> seen;
  for (int it = 1; it <= 8; ++it) {
    auto out = expand_centrality(m, labeled, cfg);
    std::vector<std::string> terms;
    std::vector<bool> labels;
    for (const auto& c : out.candidates) {
      EXPECT_TRUE(seen.insert(c.term).second) << "repeat " << c.term;
      terms.push_back(c.term);
      labels.push_back(coin(rng));
    }
    const auto pos = labeled.positive_count(), neg = labeled.negative_count();
    labeled = update_labeled_set(labeled, terms, labels, it);
    EXPECT_GE(labeled.positive_count(), pos);
    EXPECT_GE(labeled.negative_count(), neg);
  }
}

TEST(LabeledSetJson, RoundTrip) {
  auto l = LabeledTermSet::from_seeds({"a", "b"}, {"c"});
  l = update_labeled_set(l, {"d", "e"}, {false, true}, 1);
  nlohmann::json j = l;
  EXPECT_EQ(j.get<LabeledTermSet>(), l);
  EXPECT_EQ(j["entries"][3]["term"], "d");
  EXPECT_EQ(j["entries"][3]["provenance"], "annotated");
}
