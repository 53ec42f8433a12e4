#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>

#include <gtest/gtest.h>

#include "support.hpp"
#include "termset/embedding.hpp"

using namespace termset;
using termset::testing::brute_force_top_k;

namespace {

EmbeddingModel parse(const std::string& text) {
  std::istringstream in(text);
  return read_word2vec_text(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Word2VecText, MinimalFile) {
  auto m = parse("2 2\na 1 0\nb 0 1\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.dim(), 2u);
  EXPECT_EQ(m.terms(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(m.norm_scheme(), NormScheme::raw);
  EXPECT_DOUBLE_EQ(m.vectors()(1, 1), 1.0);
}

TEST(Word2VecText, RowArityMismatchReportsLine) {
  const auto err = error_of("1 3\na 1 2\n");
  EXPECT_NE(err.find("line 2"), std::string::npos) << err;
  EXPECT_NE(err.find("arity"), std::string::npos) << err;
}

TEST(Word2VecText, DuplicateTerm) {
  const auto err = error_of("2 1\na 1\na 2\n");
  EXPECT_NE(err.find("duplicate"), std::string::npos) << err;
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
}

TEST(Word2VecText, MalformedHeaderAndValues) {
  EXPECT_NE(error_of("two 2\n").find("header"), std::string::npos);
  EXPECT_NE(error_of("1\na 1\n").find("header"), std::string::npos);
  EXPECT_NE(error_of("1 1\na nan\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("1 1\na inf\n").find("non-finite"), std::string::npos);
  EXPECT_NE(error_of("2 1\na 1\n").find("expected 2 rows"), std::string::npos);
  EXPECT_NE(error_of("1 1\na 1\nb 2\n").find("beyond"), std::string::npos);
}

TEST(Word2VecText, SaveLoadKeepsTermsAndNineDigits) {
  std::mt19937_64 rng(7);
  auto m = termset::testing::random_model(rng, 30, 5, false);
  std::ostringstream out;
  write_word2vec_text(out, m);
  auto back = parse(out.str());
  EXPECT_EQ(back.terms(), m.terms());
  for (Eigen::Index r = 0; r < m.vectors().rows(); ++r)
    for (Eigen::Index c = 0; c < m.vectors().cols(); ++c) {
      const double a = m.vectors()(r, c), b = back.vectors()(r, c);
      EXPECT_LE(std::abs(a - b), 5e-9 * std::max(1.0, std::abs(a)));
    }
}

TEST(Normalize, ThreeFourFive) {
  EmbeddingModel m({"x"}, Matrix{{3.0, 4.0}});
  auto n = normalize_unit_l2(m);
  EXPECT_EQ(n.norm_scheme(), NormScheme::unit_l2);
  EXPECT_NEAR(n.vectors()(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(n.vectors()(0, 1), 0.8, 1e-15);
}

TEST(Normalize, IdempotentOnUnitRows) {
  std::mt19937_64 rng(3);
  auto once = termset::testing::random_model(rng, 20, 4, true);
  auto twice = normalize_unit_l2(once);
  EXPECT_LE((once.vectors() - twice.vectors()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalize, ZeroRowNamesTerm) {
  EmbeddingModel m({"ok", "x"}, Matrix{{1.0, 0.0}, {0.0, 0.0}});
  try {
    normalize_unit_l2(m);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("\"x\""), std::string::npos);
  }
}

TEST(Model, RejectsInvariantViolations) {
  EXPECT_THROW(EmbeddingModel({"a", "a"}, Matrix::Zero(2, 2)), ValidationError);
  EXPECT_THROW(EmbeddingModel({"a"}, Matrix::Zero(2, 2)), ValidationError);
  EXPECT_THROW(EmbeddingModel({"a"}, Matrix{{2.0, 0.0}}, NormScheme::unit_l2), ValidationError);
}

TEST(Similarity, Examples) {
  auto m = termset::testing::orthonormal_model(2);
  Vector a(2), b(2), v(2);
  a << 1, 1;
  b << 1, 0;
  v << 0.3, -2.0;
  EXPECT_NEAR(similarity(m, v, v), 1.0, 1e-15);
  EXPECT_EQ(similarity(m, m.vector("e1"), m.vector("e2")), 0.0);
  EXPECT_NEAR(similarity(m, a, b), 0.7071, 1e-4);
  EXPECT_THROW(similarity(m, Vector::Zero(2), b), ValidationError);
  EXPECT_THROW(similarity(m, Vector::Ones(3), Vector::Ones(3)), ValidationError);
}

TEST(Similarity, DotProductOnUnitVectors) {
  std::mt19937_64 rng(11);
  auto m = termset::testing::random_model(rng, 40, 8, true);
  for (std::size_t i = 0; i + 1 < m.size(); ++i) {
    const Vector a = m.row(i).transpose(), b = m.row(i + 1).transpose();
    EXPECT_NEAR(similarity(m, a, b), a.dot(b), 1e-12);
  }
}

TEST(TopK, SelfIsNearest) {
  auto m = termset::testing::orthonormal_model(3);
  auto r = top_k_similar(m, m.vector("e1"), 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].term, "e1");
  EXPECT_DOUBLE_EQ(r[0].score, 1.0);

  auto ex = top_k_similar(m, m.vector("e1"), 1, std::unordered_set<std::string>{"e1"});
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_NE(ex[0].term, "e1");
  // e2 and e3 tie at 0: the lexicographically smaller term wins.
  EXPECT_EQ(ex[0].term, "e2");
}

TEST(TopK, ShortResultWhenVocabularyExhausted) {
  auto m = termset::testing::orthonormal_model(3);
  auto r = top_k_similar(m, m.vector("e1"), 10, std::unordered_set<std::string>{"e2"});
  EXPECT_EQ(r.size(), 2u);
  EXPECT_THROW(top_k_similar(m, m.vector("e1"), 0), ValidationError);
}

TEST(TopK, MatchesBruteForceOnRandomModels) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const bool unit = trial % 2 == 0;
    auto m = termset::testing::random_model(rng, 50, 10, unit);
    std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
    std::unordered_set<std::string> exclude;
    for (int e = 0; e < trial; ++e) exclude.insert(m.term(pick(rng)));
    Vector q = termset::testing::gaussian_matrix(rng, 10, 1);
    for (std::size_t k : {1u, 5u, 17u, 60u}) {
      auto got = top_k_similar(m, q, k, exclude);
      auto want = brute_force_top_k(m, q, k, exclude);
      EXPECT_EQ(got, want) << "trial " << trial << " k " << k;
      for (std::size_t i = 1; i < got.size(); ++i) EXPECT_GE(got[i - 1].score, got[i].score);
    }
  }
}

TEST(TopK, ShardedScanEqualsSequential) {
  std::mt19937_64 rng(5);
  auto m = termset::testing::random_model(rng, 333, 6, true);
  Vector q = termset::testing::gaussian_matrix(rng, 6, 1);
  auto mask = make_exclusion_mask(m, {m.term(0), m.term(100)});
  const auto seq = top_k_similar(m, q, 25, mask, 1);
  for (unsigned t : {2u, 3u, 7u}) EXPECT_EQ(top_k_similar(m, q, 25, mask, t), seq);
  EXPECT_EQ(top_k_similar(m, q, 25, mask, 1), seq);
}

TEST(TopK, TiesBreakByTermString) {
  EmbeddingModel m({"b", "c", "a", "d"}, Matrix{{1, 0}, {1, 0}, {1, 0}, {0, 1}});
  Vector q(2);
  q << 1, 0;
  auto r = top_k_similar(m, q, 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].term, "a");
  EXPECT_EQ(r[1].term, "b");
  EXPECT_EQ(r[2].term, "c");
}
