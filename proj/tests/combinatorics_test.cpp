#include "lbc/combinatorics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

namespace lbc {
namespace {

TEST(Binomial, KnownValues) {
  EXPECT_EQ(binomial(4, 2), 6u);
  EXPECT_EQ(binomial(4, 1), 4u);
  EXPECT_EQ(binomial(8, 2), 28u);
  EXPECT_EQ(binomial(16, 1), 16u);
  EXPECT_EQ(binomial(16, 8), 12870u);
  EXPECT_EQ(binomial(5, 0), 1u);
  EXPECT_EQ(binomial(5, 5), 1u);
  EXPECT_EQ(binomial(3, 4), 0u);
  EXPECT_EQ(binomial(3, -1), 0u);
}

TEST(Bitset, BasicOps) {
  Bitset b(70);  // crosses a 64-bit block boundary
  EXPECT_EQ(b.size(), 70u);
  EXPECT_EQ(b.count(), 0u);
  b.set(0);
  b.set(63);
  b.set(64);
  b.set(69);
  EXPECT_EQ(b.count(), 4u);
  EXPECT_TRUE(b.test(63));
  EXPECT_TRUE(b.test(64));
  EXPECT_FALSE(b.test(1));
  b.reset(63);
  EXPECT_FALSE(b.test(63));
  EXPECT_EQ(b.count(), 3u);
  EXPECT_THROW(b.test(70), std::out_of_range);
  EXPECT_THROW(b.set(70), std::out_of_range);
}

TEST(Bitset, AllOnesRespectsSize) {
  Bitset b(10, true);
  EXPECT_EQ(b.count(), 10u);  // bits above the size are trimmed
  Bitset c(10, true);
  EXPECT_TRUE(b == c);
  c.reset(3);
  EXPECT_FALSE(b == c);
}

TEST(Combinations, TwoOfFourExactOrder) {
  const CombinationTable t = enumerate_combinations(2, 4);
  ASSERT_EQ(t.size(), 6u);
  const std::vector<std::vector<int>> expect = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(t.combos, expect);
  EXPECT_EQ(t.n, 2);
  EXPECT_EQ(t.m, 4);
}

TEST(Combinations, OneOfSixteen) {
  const CombinationTable t = enumerate_combinations(1, 16);
  ASSERT_EQ(t.size(), 16u);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(t.combos[static_cast<std::size_t>(i)], std::vector<int>{i});
}

TEST(Combinations, LexicographicAndComplete) {
  for (int m = 1; m <= 8; ++m) {
    for (int n = 1; n <= m; ++n) {
      const CombinationTable t = enumerate_combinations(n, m);
      EXPECT_EQ(t.size(), binomial(m, n));
      for (std::size_t c = 0; c < t.size(); ++c) {
        EXPECT_EQ(t.combos[c].size(), static_cast<std::size_t>(n));
        EXPECT_TRUE(std::is_sorted(t.combos[c].begin(), t.combos[c].end()));
        if (c > 0) {
          EXPECT_LT(t.combos[c - 1], t.combos[c]);  // strictly increasing lexicographic
        }
      }
    }
  }
}

TEST(Combinations, MemberOfMatchesNaiveScan) {
  for (auto [n, m] : {std::pair{2, 4}, {1, 4}, {2, 8}, {3, 6}, {1, 16}}) {
    const CombinationTable t = enumerate_combinations(n, m);
    for (int slot = 0; slot < m; ++slot) {
      std::vector<int> naive;
      for (std::size_t c = 0; c < t.size(); ++c) {
        if (std::find(t.combos[c].begin(), t.combos[c].end(), slot) != t.combos[c].end()) {
          naive.push_back(static_cast<int>(c));
        }
      }
      EXPECT_EQ(t.member_of[static_cast<std::size_t>(slot)], naive) << n << ":" << m << " slot " << slot;
      // Each slot is in C(m-1, n-1) combinations.
      EXPECT_EQ(naive.size(), binomial(m - 1, n - 1));
    }
  }
}

TEST(Combinations, RejectsBadPatterns) {
  EXPECT_THROW(enumerate_combinations(0, 4), std::invalid_argument);
  EXPECT_THROW(enumerate_combinations(5, 4), std::invalid_argument);
  EXPECT_THROW(enumerate_combinations(-1, 4), std::invalid_argument);
  EXPECT_THROW(enumerate_combinations(2, 17), std::invalid_argument);
  EXPECT_NO_THROW(enumerate_combinations(8, 16));
}

TEST(MembershipSum, MatchesNaiveOverRandomAliveSets) {
  const CombinationTable t = enumerate_combinations(2, 6);
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Bitset alive(t.size());
    for (std::size_t c = 0; c < t.size(); ++c) {
      if (coin(rng)) alive.set(c);
    }
    for (int slot = 0; slot < t.m; ++slot) {
      std::size_t naive = 0;
      for (std::size_t c = 0; c < t.size(); ++c) {
        if (!alive.test(c)) continue;
        if (std::find(t.combos[c].begin(), t.combos[c].end(), slot) != t.combos[c].end()) ++naive;
      }
      EXPECT_EQ(membership_sum(t, alive, slot), naive);
    }
  }
}

TEST(MembershipSum, RejectsBadArguments) {
  const CombinationTable t = enumerate_combinations(2, 4);
  Bitset wrong(5, true);
  EXPECT_THROW(membership_sum(t, wrong, 0), std::invalid_argument);
  Bitset ok(t.size(), true);
  EXPECT_THROW(membership_sum(t, ok, -1), std::out_of_range);
  EXPECT_THROW(membership_sum(t, ok, 4), std::out_of_range);
}

}  // namespace
}  // namespace lbc
