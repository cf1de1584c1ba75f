#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "htmvid/features.hpp"
#include "htmvid/rng.hpp"

using namespace htmvid;

namespace {

std::vector<SdrVector> random_frames(std::size_t count, std::size_t length, std::size_t active, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SdrVector> frames;
  for (std::size_t f = 0; f < count; ++f) {
    std::vector<std::uint32_t> idx(length);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t i = 0; i < active; ++i) std::swap(idx[i], idx[i + rng.below(length - i)]);
    idx.resize(active);
    frames.push_back(make_sdr(length, idx));
  }
  return frames;
}

}  // namespace

TEST(Histogram, HandCount) {
  const std::vector<SdrVector> frames{make_sdr(4, {1, 3}), make_sdr(4, {3})};
  const auto h = accumulate_histogram(frames);
  EXPECT_EQ(h.frames, 2u);
  EXPECT_EQ(h.counts, (std::vector<double>{0.0, 0.5, 0.0, 1.0}));
}

TEST(Histogram, ZeroFramesGiveZeroHistogram) {
  const std::vector<SdrVector> frames(3, make_sdr(16, {}));
  const auto h = accumulate_histogram(frames);
  EXPECT_EQ(h.counts, std::vector<double>(16, 0.0));
}

TEST(Histogram, LengthFollowsFrameWidth) {
  const auto frames = random_frames(32, 2048, 40, 3);
  const auto h = accumulate_histogram(frames);
  EXPECT_EQ(h.counts.size(), 2048u);
  EXPECT_NEAR(std::accumulate(h.counts.begin(), h.counts.end(), 0.0), 40.0, 1e-9);
}

TEST(Histogram, Rejections) {
  EXPECT_THROW((void)accumulate_histogram(std::vector<SdrVector>{}), Error);
  const std::vector<SdrVector> mixed{make_sdr(4, {1}), make_sdr(5, {1})};
  try {
    (void)accumulate_histogram(mixed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::length_mismatch);
  }
}

TEST(Histogram, PermutationEquivariant) {
  const std::size_t n = 64;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto frames = random_frames(12, n, 7, seed);
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng(seed + 100);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<SdrVector> permuted;
    for (const auto& f : frames) {
      std::vector<std::uint32_t> idx;
      for (auto a : f.active_indices()) idx.push_back(perm[a]);
      permuted.push_back(make_sdr(n, idx));
    }
    const auto h = accumulate_histogram(frames);
    const auto hp = accumulate_histogram(permuted);
    for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(hp.counts[perm[j]], h.counts[j]);
  }
}

TEST(Cosine, Examples) {
  const std::vector<double> v{0.2, 0.0, 0.7, 1.0};
  EXPECT_NEAR(*cosine_similarity(v, v), 1.0, 1e-15);
  const std::vector<double> e0{1, 0, 0};
  const std::vector<double> e1{0, 1, 0};
  EXPECT_EQ(*cosine_similarity(e0, e1), 0.0);
  const std::vector<double> zero(4, 0.0);
  EXPECT_FALSE(cosine_similarity(zero, v).has_value());
  EXPECT_FALSE(cosine_similarity(v, zero).has_value());
  EXPECT_THROW((void)cosine_similarity(e0, v), Error);
}

TEST(Cosine, ScaleInvariantAndBounded) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(20);
    std::vector<double> b(20);
    for (auto& x : a) x = rng.uniform() - 0.3;
    for (auto& x : b) x = rng.uniform() - 0.3;
    const double alpha = 0.01 + 10.0 * rng.uniform();
    const double beta = 0.01 + 10.0 * rng.uniform();
    std::vector<double> sa(a);
    std::vector<double> sb(b);
    for (auto& x : sa) x *= alpha;
    for (auto& x : sb) x *= beta;
    const double c = *cosine_similarity(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_NEAR(*cosine_similarity(sa, sb), c, 1e-12);
  }
}

TEST(SimilarityRatio, IdenticalPipelinesGiveOne) {
  const std::vector<std::vector<double>> clean{{1, 0, 1}, {0, 1, 1}, {1, 1, 0}, {0.5, 0.5, 0.5}};
  const std::vector<std::vector<double>> noisy{{1, 0.2, 1}, {0.1, 1, 0.8}, {1, 0.9, 0.3}, {0.5, 0, 0.5}};
  const std::vector<int> labels{0, 0, 1, 1};
  const auto r = similarity_ratio(clean, noisy, clean, noisy, labels);
  EXPECT_NEAR(r.overall.mean, 1.0, 1e-15);
  EXPECT_EQ(r.overall.used, 4u);
  EXPECT_EQ(r.overall.skipped, 0u);
  ASSERT_EQ(r.per_class.size(), 2u);
  for (const auto& [label, cls] : r.per_class) {
    EXPECT_NEAR(cls.mean, 1.0, 1e-15);
    EXPECT_EQ(cls.used, 2u);
  }
}

TEST(SimilarityRatio, UndefinedAndZeroDenominatorsAreSkipped) {
  const std::vector<std::vector<double>> clean_sp{{1, 0}, {0, 0}, {1, 1}, {1, 0}};
  const std::vector<std::vector<double>> noisy_sp{{1, 0}, {1, 0}, {1, 1}, {1, 1}};
  const std::vector<std::vector<double>> clean_raw{{1, 0}, {1, 0}, {1, 0}, {1, 1}};
  const std::vector<std::vector<double>> noisy_raw{{1, 1}, {1, 0}, {0, 1}, {1, 1}};
  const std::vector<int> labels{0, 1, 1, 2};
  const auto r = similarity_ratio(clean_sp, noisy_sp, clean_raw, noisy_raw, labels);
  // video 1: clean_sp has zero norm; video 2: raw cosine is 0.
  EXPECT_EQ(r.overall.skipped, 2u);
  EXPECT_EQ(r.overall.used, 2u);
  EXPECT_EQ(r.per_class.at(1).skipped, 2u);
  EXPECT_EQ(r.per_class.at(1).used, 0u);
  EXPECT_NEAR(r.per_class.at(0).mean, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(r.per_class.at(2).mean, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(r.overall.mean, 0.5 * (std::sqrt(2.0) + 1.0 / std::sqrt(2.0)), 1e-12);
}

TEST(SimilarityRatio, MisalignedInputsRejected) {
  const std::vector<std::vector<double>> a{{1, 0}};
  const std::vector<std::vector<double>> b{{1, 0}, {0, 1}};
  const std::vector<int> labels{0};
  EXPECT_THROW((void)similarity_ratio(a, b, a, a, labels), Error);
}
