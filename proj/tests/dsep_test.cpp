#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "test_support.hpp"
#include "understudy/dsep.hpp"

namespace {

using namespace understudy;
using testing_support::PathOracle;

TEST(DSeparation, AsiaAndSmokeMarginallyIndependent) {
  const auto net = testing_support::asia();
  EXPECT_TRUE(is_d_separated(net.dag(), "asia", "smoke", {}));
  EXPECT_FALSE(is_d_separated(net.dag(), "asia", "smoke", {"dysp"}));
  EXPECT_FALSE(is_d_separated(net.dag(), "asia", "smoke", {"xray"}));
  EXPECT_TRUE(is_d_separated(net.dag(), "asia", "smoke", {"dysp", "tub"}));
}

TEST(DSeparation, EdgelessGraphSeparatesEverything) {
  const Dag dag(testing_support::binary_variables(4), std::vector<Edge>{});
  const std::vector<std::size_t> given = {2, 3};
  EXPECT_TRUE(is_d_separated(dag, 0, 1, given));
  EXPECT_TRUE(is_d_separated(dag, 0, 1, std::vector<std::size_t>{}));
}

TEST(DSeparation, RejectsInvalidInput) {
  const auto net = testing_support::asia();
  EXPECT_ANY_THROW(is_d_separated(net.dag(), "asia", "asia", {}));
  EXPECT_ANY_THROW(is_d_separated(net.dag(), "asia", "smoke", {"asia"}));
  EXPECT_ANY_THROW(is_d_separated(net.dag(), "asia", "nope", {}));
}

TEST(DSeparation, AgreesWithPathOracleOnSmallRandomDags) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(4);
    const Dag dag = testing_support::random_dag(n, rng.uniform(0.2, 0.8), rng);
    const PathOracle oracle(dag);
    for_each_candidate(n, [&](std::size_t x, std::size_t y, const std::vector<std::size_t>& a) {
      const bool fast = is_d_separated(dag, x, y, a);
      ASSERT_EQ(fast, oracle.separated(x, y, a)) << "trial " << trial;
      ASSERT_EQ(fast, is_d_separated(dag, y, x, a));
    });
  }
}

TEST(EnumerateRelations, AsiaHas191) {
  const auto net = testing_support::asia();
  const auto relations = enumerate_relations(net.dag());
  EXPECT_EQ(relations.size(), 191u);
  std::size_t unconditional = 0;
  for (const auto& r : relations) unconditional += r.given.empty();
  EXPECT_EQ(unconditional, 6u);
  const PathOracle oracle(net.dag());
  for (const auto& r : relations) EXPECT_TRUE(oracle.separated(r.x, r.y, r.given));
}

TEST(EnumerateRelations, CandidateCountAndOrder) {
  std::size_t count = 0;
  std::vector<std::size_t> sizes;
  for_each_candidate(7, [&](std::size_t x, std::size_t y, const std::vector<std::size_t>& a) {
    ++count;
    if (x == 0 && y == 1) sizes.push_back(a.size());
  });
  EXPECT_EQ(count, 672u);
  EXPECT_TRUE(std::is_sorted(sizes.begin(), sizes.end()));
}

TEST(EnumerateRelations, EdgelessAndComplete) {
  const Dag empty(testing_support::binary_variables(3), std::vector<Edge>{});
  EXPECT_EQ(enumerate_relations(empty).size(), 6u);
  const Dag full(testing_support::binary_variables(3),
                 std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}});
  EXPECT_EQ(enumerate_relations(full).size(), 0u);
}

TEST(EnumerateRelations, RelationsAreCanonicalAndUnique) {
  const auto net = testing_support::asia();
  const auto relations = enumerate_relations(net.dag());
  std::set<std::pair<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>> seen;
  for (const auto& r : relations) {
    EXPECT_LT(r.x, r.y);
    EXPECT_TRUE(std::is_sorted(r.given.begin(), r.given.end()));
    EXPECT_TRUE(seen.insert({{r.x, r.y}, r.given}).second);
  }
}

TEST(RelationText, FormatAndParseRoundTrip) {
  const auto net = testing_support::asia();
  const auto& dag = net.dag();
  const auto rel = make_relation(dag.index_of("smoke"), dag.index_of("asia"), {});
  EXPECT_EQ(rel.x, dag.index_of("asia"));
  EXPECT_EQ(format_relation(dag, rel), "asia _|_ smoke | {}");
  EXPECT_EQ(format_relation(dag, rel, false), "asia _|_ smoke | ");
  const auto cond = make_relation(0, 2, {3, 1});
  EXPECT_EQ(format_relation(dag, cond), "asia _|_ smoke | {tub,lung}");
  EXPECT_EQ(parse_relation(dag, "asia _|_ smoke | {tub,lung}"), cond);
  EXPECT_EQ(parse_relation(dag, "smoke _|_ asia | lung, tub"), cond);
  EXPECT_EQ(parse_relation(dag, "asia _|_ smoke |"), rel);
  EXPECT_ANY_THROW(parse_relation(dag, "asia smoke"));
  EXPECT_ANY_THROW(make_relation(0, 2, {0}));
}

TEST(RelationText, FileRoundTrip) {
  const auto net = testing_support::asia();
  const auto relations = enumerate_relations(net.dag());
  std::stringstream buffer;
  write_relations(net.dag(), relations, buffer);
  std::istringstream in("# header comment\n\n" + buffer.str());
  EXPECT_EQ(read_relations(net.dag(), in), relations);
}

}  // namespace
