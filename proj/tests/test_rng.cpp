#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "tck/rng.hpp"

using tck::Rng;

TEST(Rng, SameKeySameStream) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, SplitIsIndependentOfParentPosition) {
  Rng a(7);
  const Rng fresh(7);
  for (int i = 0; i < 10; ++i) a();
  Rng c1 = a.split(3);
  Rng c2 = fresh.split(3);
  EXPECT_EQ(c1(), c2());
  EXPECT_NE(fresh.split(3).key(), fresh.split(4).key());
}

TEST(Rng, UniformMoments) {
  Rng r(1);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
  Rng r(2);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, UniformIntCoversClosedRange) {
  Rng r(3);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto x = r.uniform_int(-2, 3);
    ASSERT_GE(x, -2);
    ASSERT_LE(x, 3);
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Rng, UniformOpenExcludesEnds) {
  Rng r(4);
  for (int i = 0; i < 10000; ++i) {
    const double x = r.uniform_open(0.001, 1.0);
    ASSERT_GT(x, 0.001);
    ASSERT_LT(x, 1.0);
  }
}

TEST(Rng, SampleWithoutReplacementSortedDistinct) {
  Rng r(5);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = r.sample_without_replacement(20, 13);
    ASSERT_EQ(s.size(), 13u);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<int>(s.begin(), s.end()).size(), 13u);
    EXPECT_GE(s.front(), 0);
    EXPECT_LT(s.back(), 20);
  }
  EXPECT_EQ(r.sample_without_replacement(4, 4), (std::vector<int>{0, 1, 2, 3}));
}
