#include "lbc/schedule.hpp"

#include <gtest/gtest.h>

#include <vector>

namespace lbc {
namespace {

// Expected cumulative removals, computed independently with the same IEEE
// double arithmetic (ceil(budget * (1 - (1 - frac)^3)) clamped to budget) and
// frozen here.
struct Frozen {
  int ti, tf;
  std::size_t c;
  std::vector<std::size_t> values;  // R(ti), R(ti+1), ..., R(tf)
};

const Frozen kFrozen[] = {
    {0, 10, 6, {0, 2, 3, 4, 4, 5, 5, 5, 5, 5, 5}},
    {2, 15, 6, {0, 2, 2, 3, 4, 4, 5, 5, 5, 5, 5, 5, 5, 5}},
    {0, 7, 28, {0, 10, 18, 22, 25, 27, 27, 27}},
    {3, 9, 16, {0, 7, 11, 14, 15, 15, 15}},
    {0, 4, 12870, {0, 7440, 11261, 12668, 12869}},
};

TEST(Schedule, FrozenCubicValues) {
  for (const Frozen& f : kFrozen) {
    RemovalSchedule s{f.ti, f.tf, f.c};
    for (int t = f.ti; t <= f.tf; ++t) {
      EXPECT_EQ(cumulative_removals(s, t), f.values[static_cast<std::size_t>(t - f.ti)])
          << "C=" << f.c << " window [" << f.ti << "," << f.tf << "] t=" << t;
    }
  }
}

TEST(Schedule, EndpointsExact) {
  for (std::size_t c : {2u, 6u, 28u, 16u, 12870u}) {
    for (auto [ti, tf] : {std::pair{0, 1}, {0, 10}, {2, 15}, {5, 6}, {3, 30}}) {
      RemovalSchedule s{ti, tf, c};
      EXPECT_EQ(cumulative_removals(s, ti), 0u);
      EXPECT_EQ(cumulative_removals(s, tf), c - 1);
    }
  }
}

TEST(Schedule, DegenerateWindowFiresWholeBudget) {
  for (std::size_t c : {1u, 2u, 6u, 12870u}) {
    for (int t : {0, 3, 9}) {
      RemovalSchedule s{t, t, c};
      EXPECT_EQ(cumulative_removals(s, t), c - 1);
    }
  }
}

TEST(Schedule, MonotoneWithinBudget) {
  for (std::size_t c : {2u, 6u, 28u, 120u}) {
    RemovalSchedule s{1, 19, c};
    std::size_t prev = 0;
    for (int t = 1; t <= 19; ++t) {
      const std::size_t r = cumulative_removals(s, t);
      EXPECT_GE(r, prev);
      EXPECT_LE(r, c - 1);
      prev = r;
    }
  }
}

TEST(Schedule, SingletonCollectionNeverRemoves) {
  RemovalSchedule s{0, 5, 1};
  for (int t = 0; t <= 5; ++t) EXPECT_EQ(cumulative_removals(s, t), 0u);
}

TEST(Schedule, OutsideWindowThrows) {
  RemovalSchedule s{2, 8, 6};
  EXPECT_THROW(cumulative_removals(s, 1), std::out_of_range);
  EXPECT_THROW(cumulative_removals(s, 9), std::out_of_range);
  RemovalSchedule empty{0, 0, 0};
  EXPECT_THROW(cumulative_removals(empty, 0), std::invalid_argument);
}

TEST(Schedule, Validation) {
  EXPECT_NO_THROW(validate(RemovalSchedule{0, 5, 6}, 10));
  EXPECT_NO_THROW(validate(RemovalSchedule{0, 0, 6}, 1));
  EXPECT_THROW(validate(RemovalSchedule{3, 2, 6}, 10), std::invalid_argument);
  EXPECT_THROW(validate(RemovalSchedule{0, 10, 6}, 10), std::invalid_argument);  // t_f must precede end
  EXPECT_THROW(validate(RemovalSchedule{-1, 5, 6}, 10), std::invalid_argument);
  EXPECT_THROW(validate(RemovalSchedule{0, 5, 0}, 10), std::invalid_argument);
}

}  // namespace
}  // namespace lbc
