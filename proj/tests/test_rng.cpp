#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "htmvid/rng.hpp"

using namespace htmvid;

// Expected words come from a separate Python transcription of the splitmix64
// and xoshiro256** reference code.
TEST(Rng, MatchesReferenceStream) {
  std::uint64_t sm = 0;
  EXPECT_EQ(splitmix64(sm), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(splitmix64(sm), 0x6E789E6AA1B965F4ULL);
  Rng r(0);
  EXPECT_EQ(r(), 0x99EC5F36CB75F2B4ULL);
  EXPECT_EQ(r(), 0xBF6E1F784956452AULL);
  EXPECT_EQ(r(), 0x1A5F849D4933E6E0ULL);
  Rng a(0);
  Rng b(0);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
  EXPECT_NE(derive_seed(1, {}), derive_seed(1, {0}));
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7U);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 850);
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(9);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.015);
}

TEST(SubsetSampler, DrawsDistinctIndices) {
  Rng rng(4);
  SubsetSampler sampler;
  std::vector<std::uint32_t> out;
  for (int trial = 0; trial < 200; ++trial) {
    out.clear();
    const auto n = static_cast<std::uint32_t>(1 + rng.below(50));
    const auto k = static_cast<std::uint32_t>(rng.below(n + 1));
    sampler.sample(rng, n, k, out);
    ASSERT_EQ(out.size(), k);
    std::set<std::uint32_t> uniq(out.begin(), out.end());
    ASSERT_EQ(uniq.size(), k);
    for (auto v : out) ASSERT_LT(v, n);
  }
}

TEST(SubsetSampler, UniformOverSubsets) {
  // All C(5,2) = 10 subsets should be equally likely.
  Rng rng(21);
  SubsetSampler sampler;
  std::vector<std::uint32_t> out;
  std::vector<int> counts(32, 0);
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    out.clear();
    sampler.sample(rng, 5, 2, out);
    ++counts[(1U << out[0]) | (1U << out[1])];
  }
  int subsets = 0;
  for (int c : counts) {
    if (c == 0) continue;
    ++subsets;
    EXPECT_NEAR(c, trials / 10.0, 5.0 * std::sqrt(trials * 0.1 * 0.9));
  }
  EXPECT_EQ(subsets, 10);
}
