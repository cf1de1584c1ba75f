#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "htmvid/encoder.hpp"
#include "htmvid/rng.hpp"

using namespace htmvid;

namespace {

GrayFrame random_frame(std::uint32_t w, std::uint32_t h, std::uint64_t seed, int lo = 0, int hi = 255) {
  Rng rng(seed);
  GrayFrame f(w, h);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))));
  return f;
}

// Mirror without repeating the edge pixel: -1 -> 1, size -> size - 2.
std::int64_t mirror(std::int64_t i, std::int64_t n) {
  const std::int64_t period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

// Direct 2-D window sum with the outer-product weights, exact integer comparison.
SdrVector naive_threshold(const GrayFrame& f, std::uint32_t block, double sigma, std::int64_t c) {
  const auto taps = gaussian_taps(block, sigma);
  std::int64_t sum = 0;
  for (auto t : taps) sum += t;
  const std::int64_t r = block / 2;
  std::vector<std::uint8_t> bits(f.size(), 0);
  for (std::int64_t y = 0; y < f.height; ++y) {
    for (std::int64_t x = 0; x < f.width; ++x) {
      std::int64_t acc = 0;
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        for (std::int64_t dx = -r; dx <= r; ++dx) {
          acc += taps[dy + r] * taps[dx + r] *
                 f.at(static_cast<std::uint32_t>(mirror(x + dx, f.width)), static_cast<std::uint32_t>(mirror(y + dy, f.height)));
        }
      }
      bits[static_cast<std::size_t>(y * f.width + x)] = (f.at(x, y) + c) * sum * sum > acc;
    }
  }
  return SdrVector::from_bytes(bits);
}

}  // namespace

TEST(ReduceFrame, ConstantImage) {
  const auto out = reduce_frame(GrayFrame(4, 4, 100), 4);
  EXPECT_EQ(out, GrayFrame(1, 1, std::vector<std::uint8_t>{100}));
}

TEST(ReduceFrame, RoundsHalfUp) {
  const auto out = reduce_frame(GrayFrame(2, 2, std::vector<std::uint8_t>{0, 255, 255, 0}), 2);
  EXPECT_EQ(out.pixels, std::vector<std::uint8_t>{128});
}

TEST(ReduceFrame, MatchesBlockMeanLoop) {
  const auto f = random_frame(16, 16, 7);
  const auto out = reduce_frame(f, 4);
  ASSERT_EQ(out.width, 4U);
  ASSERT_EQ(out.height, 4U);
  for (std::uint32_t by = 0; by < 4; ++by) {
    for (std::uint32_t bx = 0; bx < 4; ++bx) {
      int sum = 0;
      for (std::uint32_t y = 0; y < 4; ++y)
        for (std::uint32_t x = 0; x < 4; ++x) sum += f.at(bx * 4 + x, by * 4 + y);
      EXPECT_EQ(out.at(bx, by), static_cast<int>(std::floor(sum / 16.0 + 0.5)));
    }
  }
}

TEST(ReduceFrame, RejectsIndivisibleDimensionsByName) {
  try {
    (void)reduce_frame(GrayFrame(240, 134), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
  }
  try {
    (void)reduce_frame(GrayFrame(10, 8), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("width"), std::string::npos);
  }
}

TEST(Grayscale, Bt601Luma) {
  const std::vector<std::uint8_t> rgb = {255, 255, 255, 0, 0, 0, 255, 0, 0, 0, 255, 0};
  const auto g = to_grayscale(rgb, 4, 1);
  EXPECT_EQ(g.pixels, (std::vector<std::uint8_t>{255, 0, 76, 150}));
  EXPECT_THROW((void)to_grayscale(rgb, 3, 1), Error);
}

TEST(AdaptiveThreshold, ConstantFrameDependsOnSignOfC) {
  EncoderConfig cfg;
  cfg.threshold_c = 2.0;
  EXPECT_EQ(adaptive_threshold(GrayFrame(20, 20, 100), cfg).popcount(), 400U);
  cfg.threshold_c = 0.0;
  EXPECT_EQ(adaptive_threshold(GrayFrame(20, 20, 100), cfg).popcount(), 0U);
  cfg.threshold_c = -3.0;
  EXPECT_EQ(adaptive_threshold(GrayFrame(20, 20, 100), cfg).popcount(), 0U);
}

TEST(AdaptiveThreshold, MatchesDirectConvolution) {
  for (std::uint32_t block : {3U, 5U, 11U}) {
    for (int c : {-10, -2, 0, 2, 5}) {
      const auto f = random_frame(32, 32, 100 + block + static_cast<std::uint64_t>(c + 20));
      EncoderConfig cfg;
      cfg.block_size = block;
      cfg.threshold_c = c;
      EXPECT_EQ(adaptive_threshold(f, cfg), naive_threshold(f, block, cfg.effective_sigma(), c))
          << "block " << block << " C " << c;
    }
  }
}

TEST(AdaptiveThreshold, AgreesWithFloatingGaussianAwayFromTies) {
  // Continuous Gaussian weights; the integer taps may only disagree at near-ties.
  const auto f = random_frame(32, 32, 77);
  EncoderConfig cfg;
  const auto bits = adaptive_threshold(f, cfg);
  const double sigma = cfg.effective_sigma();
  const int r = 5;
  std::size_t compared = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      double acc = 0, wsum = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          acc += w * f.at(static_cast<std::uint32_t>(mirror(x + dx, 32)), static_cast<std::uint32_t>(mirror(y + dy, 32)));
          wsum += w;
        }
      }
      const double margin = f.at(x, y) - (acc / wsum - cfg.threshold_c);
      if (std::abs(margin) < 0.05) continue;
      ++compared;
      ASSERT_EQ(bits.test(static_cast<std::size_t>(y * 32 + x)), margin > 0) << x << "," << y;
    }
  }
  EXPECT_GT(compared, 1000U);
}

TEST(AdaptiveThreshold, ShiftInvariantInMidRange) {
  const auto f = random_frame(24, 24, 5, 64, 128);
  GrayFrame g = f;
  for (auto& p : g.pixels) p = static_cast<std::uint8_t>(p + 10);
  EncoderConfig cfg;
  EXPECT_EQ(adaptive_threshold(f, cfg), adaptive_threshold(g, cfg));
}

TEST(AdaptiveThreshold, RejectsFrameSmallerThanBlock) {
  EncoderConfig cfg;
  EXPECT_THROW((void)adaptive_threshold(GrayFrame(8, 20), cfg), Error);
}

TEST(EncoderConfig, Validation) {
  EncoderConfig cfg;
  cfg.block_size = 4;
  EXPECT_THROW(validate(cfg), Error);
  cfg.block_size = 1;
  EXPECT_THROW(validate(cfg), Error);
  cfg = EncoderConfig{};
  cfg.reduction_ratio = 3;
  EXPECT_THROW(validate(cfg), Error);
  cfg = EncoderConfig{};
  cfg.threshold_c = std::nan("");
  EXPECT_THROW(validate(cfg), Error);
}

TEST(Encode, R4FrameReducesToDeskInput) {
  EncoderConfig cfg;
  cfg.reduction_ratio = 4;
  const auto out = encode(random_frame(240, 128, 1), cfg);
  EXPECT_EQ(out.length(), 1920U);
  EXPECT_THROW((void)encode(random_frame(240, 134, 1), cfg), Error);
}

TEST(Encode, RatioOneIsThresholdAlone) {
  const auto f = random_frame(30, 20, 3);
  EncoderConfig cfg;
  EXPECT_EQ(encode(f, cfg), adaptive_threshold(f, cfg));
}

TEST(Encode, Deterministic) {
  const auto f = random_frame(64, 32, 9);
  EncoderConfig cfg;
  cfg.reduction_ratio = 4;
  cfg.block_size = 5;
  EXPECT_EQ(encode(f, cfg), encode(random_frame(64, 32, 9), cfg));
}
