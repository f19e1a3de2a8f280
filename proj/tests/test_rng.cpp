#include <gtest/gtest.h>

#include <set>

#include <qsdlab/rng.hpp>

using namespace qsdlab;

TEST(Philox, KnownAnswerZero) {
  const auto r = detail::philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r, (std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const std::uint32_t f = 0xffffffffu;
  const auto r = detail::philox4x32_10({f, f, f, f}, {f, f});
  EXPECT_EQ(r, (std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto r = detail::philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r, (std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Rng, UniformStaysInOpenInterval) {
  Rng rng({7, 3});
  double lo = 1.0, hi = 0.0, mean = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    mean += u / n;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, SameStreamReproduces) {
  Rng a({42, 9}), b({42, 9});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DistinctStreamsDiffer) {
  std::set<std::uint64_t> first;
  for (std::uint64_t s = 0; s < 1000; ++s) first.insert(Rng({1, s}).next_u64());
  EXPECT_EQ(first.size(), 1000u);
  EXPECT_NE(Rng({1, 0}).next_u64(), Rng({2, 0}).next_u64());
}

TEST(Rng, BlocksCountTwoDrawsEach) {
  Rng rng({1, 1});
  for (int i = 0; i < 5; ++i) rng.next_u64();
  EXPECT_EQ(rng.blocks_used(), 3u);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng({5, 0});
  std::vector<int> count(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++count[rng.uniform_index(7)];
  for (int c : count) EXPECT_NEAR(c, n / 7.0, 5.0 * std::sqrt(n / 7.0));
}

TEST(Rng, NormalMoments) {
  Rng rng({11, 2});
  const int n = 200000;
  double m = 0.0, v = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m += z / n;
    v += z * z / n;
  }
  EXPECT_NEAR(m, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(v, 1.0, 4.0 * std::sqrt(2.0 / n));
}
