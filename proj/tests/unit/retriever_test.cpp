#include <gtest/gtest.h>

#include <set>

#include "encassist/error.hpp"
#include "encassist/retriever.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace encassist;
using namespace encassist::testing;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

std::vector<std::string> ids(const std::vector<RetrievedExample>& found) {
  std::vector<std::string> out;
  for (const auto& f : found) out.push_back(f.id);
  return out;
}

}  // namespace

TEST(Cosine, KnownValues) {
  EXPECT_NEAR(cosine(vec({1, 2, 2}), vec({2, 1, 2})), 8.0 / 9.0, 1e-15);
  EXPECT_DOUBLE_EQ(cosine(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(cosine(vec({1, 1}), vec({-2, -2})), -1.0);
  EXPECT_DOUBLE_EQ(cosine(vec({3, 4}), vec({3, 4})), 1.0);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine(vec({1, 2}), vec({1, 2, 3})), DimensionError);
  EXPECT_THROW(cosine(vec({0, 0}), vec({1, 2})), UndefinedSimilarity);
}

TEST(Cosine, StaysInUnitInterval) {
  const auto pool = random_pool(50, 7, 3);
  for (const auto& a : pool) {
    for (const auto& b : pool) {
      const double c = cosine(a.embedding, b.embedding);
      EXPECT_GE(c, -1.0);
      EXPECT_LE(c, 1.0);
    }
  }
}

TEST(ExamplePool, ValidatesEntries) {
  EXPECT_THROW(ExamplePool({}), Error);
  EXPECT_THROW(ExamplePool({{"a", "t", Label::neutral, vec({1, 2})},
                            {"b", "t", Label::neutral, vec({1, 2, 3})}}),
               DimensionError);
  EXPECT_THROW(ExamplePool({{"a", "t", Label::neutral, vec({0, 0})}}), UndefinedSimilarity);
  EXPECT_THROW(ExamplePool({{"a", "t", Label::neutral, vec({1, 0})},
                            {"a", "u", Label::neutral, vec({0, 1})}}),
               DuplicateIdError);
}

TEST(ExamplePool, TopKMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto entries = random_pool(40, 6, seed);
    const ExamplePool pool(entries);
    const Eigen::VectorXd q = random_pool(1, 6, seed + 1000)[0].embedding;
    const auto expected = oracle_ranking(entries, q);
    for (std::size_t k : {1u, 5u, 40u}) {
      EXPECT_EQ(ids(pool.top_k(q, k)),
                std::vector<std::string>(expected.begin(), expected.begin() + k));
    }
    EXPECT_EQ(pool.top_k(q, 100).size(), 40u);
  }
}

TEST(ExamplePool, TiesBrokenByAscendingId) {
  const ExamplePool pool({{"zeta", "z", Label::neutral, vec({1, 0})},
                          {"alpha", "a", Label::neutral, vec({1, 0})},
                          {"mid", "m", Label::neutral, vec({2, 0})},
                          {"far", "f", Label::neutral, vec({0, 1})}});
  EXPECT_EQ(ids(pool.top_k(vec({1, 0}), 3)), (std::vector<std::string>{"alpha", "mid", "zeta"}));
}

TEST(ExamplePool, PrefixProperty) {
  const auto entries = random_pool(60, 5, 99);
  const ExamplePool pool(entries);
  const Eigen::VectorXd q = entries[3].embedding;
  const auto ten = ids(pool.top_k(q, 10));
  for (std::size_t k = 1; k < 10; ++k) {
    EXPECT_EQ(ids(pool.top_k(q, k)), std::vector<std::string>(ten.begin(), ten.begin() + k));
  }
}

TEST(ExamplePool, ScaleInvariantQuery) {
  const auto entries = random_pool(60, 5, 5);
  const ExamplePool pool(entries);
  const Eigen::VectorXd q = random_pool(1, 5, 17)[0].embedding;
  EXPECT_EQ(ids(pool.top_k(q, 10)), ids(pool.top_k(4.0 * q, 10)));
}

TEST(ExamplePool, QueryErrors) {
  const ExamplePool pool({{"a", "t", Label::neutral, vec({1, 0})}});
  EXPECT_THROW(pool.top_k(vec({1, 0, 0}), 1), DimensionError);
  EXPECT_THROW(pool.top_k(vec({0, 0}), 1), UndefinedSimilarity);
  EXPECT_THROW(pool.top_k(vec({1, 0}), 0), Error);
}

TEST(ExamplePool, BalancedOrdersClassesAndMatchesBruteForce) {
  const auto entries = random_pool(45, 4, 8);
  const ExamplePool pool(entries);
  const Eigen::VectorXd q = entries[10].embedding;
  const auto found = pool.balanced_top(q, 2);
  ASSERT_EQ(found.size(), 6u);
  const std::vector<Label> pattern = {Label::negative, Label::negative, Label::neutral,
                                      Label::neutral,  Label::positive, Label::positive};
  std::vector<std::string> expected;
  for (Label label : kAllLabels) {
    const auto ranked = oracle_ranking(entries, q, label);
    expected.insert(expected.end(), ranked.begin(), ranked.begin() + 2);
  }
  EXPECT_EQ(ids(found), expected);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(found[i].label, pattern[i]);
}

TEST(ExamplePool, BalancedNamesShortClass) {
  const ExamplePool pool({{"a", "t", Label::negative, vec({1, 0})},
                          {"b", "t", Label::negative, vec({1, 1})},
                          {"c", "t", Label::positive, vec({0, 1})}});
  try {
    pool.balanced_top(vec({1, 0}), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("neutral"), std::string::npos) << e.what();
  }
}

TEST(ExamplePool, SaveLoadRoundTrip) {
  TempDir dir("pool");
  const auto entries = random_pool(20, 3, 4);
  const ExamplePool pool(entries);
  pool.save(dir / "pool.jsonl");
  const auto back = ExamplePool::load(dir / "pool.jsonl");
  ASSERT_EQ(back.size(), pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    EXPECT_EQ(back.entries()[i].id, entries[i].id);
    EXPECT_EQ(back.entries()[i].label, entries[i].label);
    EXPECT_EQ(back.entries()[i].embedding, entries[i].embedding);
  }
}

TEST(BuildPool, SeededSampleOfReviews) {
  const auto reviews = synthetic_corpus({80, 3, 0.1});
  const auto model = toy_train(reviews, 32, 5, 1);
  const auto a = build_pool(reviews, model, 25, 11);
  const auto b = build_pool(reviews, model, 25, 11);
  const auto c = build_pool(reviews, model, 25, 12);
  ASSERT_EQ(a.size(), 25u);
  std::vector<std::string> ia, ib, ic;
  for (std::size_t i = 0; i < 25; ++i) {
    ia.push_back(a.entries()[i].id);
    ib.push_back(b.entries()[i].id);
    ic.push_back(c.entries()[i].id);
  }
  EXPECT_EQ(ia, ib);
  EXPECT_NE(ia, ic);
  EXPECT_EQ(build_pool(reviews, model, 500, 1).size(), 80u);
}
