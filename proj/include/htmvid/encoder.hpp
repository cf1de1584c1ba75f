#pragma once

// Adaptive video encoder: box-filter size reduction followed by Gaussian
// adaptive thresholding (the ADAPTIVE_THRESH_GAUSSIAN_C rule, T = local
// Gaussian-weighted mean - C, bit = pixel > T).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htmvid/error.hpp"
#include "htmvid/sdr.hpp"

namespace htmvid {

/// Row-major 8-bit grayscale image.
struct GrayFrame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayFrame() = default;
  GrayFrame(std::uint32_t w, std::uint32_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  GrayFrame(std::uint32_t w, std::uint32_t h, std::vector<std::uint8_t> px) : width(w), height(h), pixels(std::move(px)) {
    require(pixels.size() == static_cast<std::size_t>(w) * h, Errc::length_mismatch,
            "GrayFrame: pixel count " + std::to_string(pixels.size()) + " != " + std::to_string(w) + "x" +
                std::to_string(h));
  }

  std::size_t size() const noexcept { return pixels.size(); }
  std::uint8_t at(std::uint32_t x, std::uint32_t y) const noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(std::uint32_t x, std::uint32_t y) noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const GrayFrame&, const GrayFrame&) = default;
};

struct EncoderConfig {
  std::uint32_t reduction_ratio = 1;
  std::uint32_t block_size = 11;
  double threshold_c = 2.0;
  /// Gaussian window sigma in pixels; 0 selects (block_size - 1) / 6.
  double gaussian_sigma = 0.0;

  double effective_sigma() const noexcept {
    return gaussian_sigma > 0.0 ? gaussian_sigma : static_cast<double>(block_size - 1) / 6.0;
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

inline void validate(const EncoderConfig& cfg) {
  const auto r = cfg.reduction_ratio;
  require(r == 1 || r == 4 || r == 8 || r == 16, Errc::invalid_argument,
          "EncoderConfig: reduction_ratio must be one of 1, 4, 8, 16 (got " + std::to_string(r) + ")");
  require(cfg.block_size >= 3 && cfg.block_size % 2 == 1, Errc::invalid_argument,
          "EncoderConfig: block_size must be odd and >= 3 (got " + std::to_string(cfg.block_size) + ")");
  require(cfg.gaussian_sigma >= 0.0 && std::isfinite(cfg.gaussian_sigma), Errc::invalid_argument,
          "EncoderConfig: gaussian_sigma must be finite and non-negative");
  require(std::isfinite(cfg.threshold_c), Errc::invalid_argument, "EncoderConfig: threshold_c must be finite");
}

/// Checks `cfg` against a source frame geometry (before reduction).
inline void validate(const EncoderConfig& cfg, std::uint32_t width, std::uint32_t height) {
  validate(cfg);
  const auto r = cfg.reduction_ratio;
  require(width % r == 0, Errc::invalid_argument,
          "EncoderConfig: width " + std::to_string(width) + " not divisible by reduction ratio " + std::to_string(r));
  require(height % r == 0, Errc::invalid_argument,
          "EncoderConfig: height " + std::to_string(height) + " not divisible by reduction ratio " + std::to_string(r));
  require(cfg.block_size <= std::min(width / r, height / r), Errc::invalid_argument,
          "EncoderConfig: block_size " + std::to_string(cfg.block_size) + " exceeds reduced frame " +
              std::to_string(width / r) + "x" + std::to_string(height / r));
}

/// Box-filter downscale; each output pixel is the round-half-up mean of its ratio x ratio block.
inline GrayFrame reduce_frame(const GrayFrame& frame, std::uint32_t ratio) {
  require(ratio > 0, Errc::invalid_argument, "reduce_frame: ratio must be positive");
  require(frame.width % ratio == 0, Errc::invalid_argument,
          "reduce_frame: width " + std::to_string(frame.width) + " not divisible by " + std::to_string(ratio));
  require(frame.height % ratio == 0, Errc::invalid_argument,
          "reduce_frame: height " + std::to_string(frame.height) + " not divisible by " + std::to_string(ratio));
  if (ratio == 1) return frame;
  const std::uint32_t ow = frame.width / ratio;
  const std::uint32_t oh = frame.height / ratio;
  const std::uint32_t area = ratio * ratio;
  GrayFrame out(ow, oh);
  for (std::uint32_t oy = 0; oy < oh; ++oy) {
    for (std::uint32_t ox = 0; ox < ow; ++ox) {
      std::uint32_t sum = 0;
      for (std::uint32_t dy = 0; dy < ratio; ++dy) {
        const std::uint8_t* row = &frame.pixels[static_cast<std::size_t>(oy * ratio + dy) * frame.width + ox * ratio];
        for (std::uint32_t dx = 0; dx < ratio; ++dx) sum += row[dx];
      }
      out.at(ox, oy) = static_cast<std::uint8_t>((sum + area / 2) / area);
    }
  }
  return out;
}

/// ITU-R BT.601 luma, rounded half-up: gray = round(0.299 R + 0.587 G + 0.114 B).
inline GrayFrame to_grayscale(std::span<const std::uint8_t> rgb, std::uint32_t width, std::uint32_t height) {
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  require(rgb.size() == 3 * pixels, Errc::length_mismatch,
          "to_grayscale: expected " + std::to_string(3 * pixels) + " bytes, got " + std::to_string(rgb.size()));
  GrayFrame out(width, height);
  for (std::size_t i = 0; i < pixels; ++i) {
    const std::uint32_t acc = 299U * rgb[3 * i] + 587U * rgb[3 * i + 1] + 114U * rgb[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>((acc + 500U) / 1000U);
  }
  return out;
}

namespace detail {

/// Mirror (reflect-101) index into [0, size); valid for |overhang| < size.
inline std::int64_t reflect101(std::int64_t i, std::int64_t size) noexcept {
  if (size == 1) return 0;
  while (i < 0 || i >= size) {
    if (i < 0) i = -i;
    if (i >= size) i = 2 * (size - 1) - i;
  }
  return i;
}

}  // namespace detail

/// Integer 1-D Gaussian profile of `block_size` taps (centre weight 4096).
/// The 2-D window is the outer product, normalised by the square of the tap sum,
/// so threshold comparisons can be carried out exactly in integer arithmetic.
inline std::vector<std::int64_t> gaussian_taps(std::uint32_t block_size, double sigma) {
  const auto radius = static_cast<std::int64_t>(block_size / 2);
  std::vector<std::int64_t> taps;
  taps.reserve(block_size);
  for (std::int64_t i = -radius; i <= radius; ++i) {
    const double g = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    taps.push_back(std::max<std::int64_t>(1, std::llround(4096.0 * g)));
  }
  return taps;
}

/// bit(x,y) = 1 iff pixel(x,y) > gaussian_mean(x,y) - threshold_c. Borders mirror-reflected.
inline SdrVector adaptive_threshold(const GrayFrame& frame, const EncoderConfig& cfg) {
  validate(cfg);
  require(frame.width >= cfg.block_size && frame.height >= cfg.block_size, Errc::invalid_argument,
          "adaptive_threshold: frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
              " smaller than block " + std::to_string(cfg.block_size));
  const auto taps = gaussian_taps(cfg.block_size, cfg.effective_sigma());
  std::int64_t tap_sum = 0;
  for (auto t : taps) tap_sum += t;
  const auto radius = static_cast<std::int64_t>(cfg.block_size / 2);
  const auto w = static_cast<std::int64_t>(frame.width);
  const auto h = static_cast<std::int64_t>(frame.height);

  std::vector<std::int64_t> horiz(static_cast<std::size_t>(w * h));
  for (std::int64_t y = 0; y < h; ++y) {
    const std::uint8_t* row = &frame.pixels[static_cast<std::size_t>(y * w)];
    for (std::int64_t x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (std::int64_t k = -radius; k <= radius; ++k) acc += taps[k + radius] * row[detail::reflect101(x + k, w)];
      horiz[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }

  const double norm = static_cast<double>(tap_sum) * static_cast<double>(tap_sum);
  const double offset = cfg.threshold_c * norm;
  std::vector<std::uint64_t> words(SdrVector::word_count(static_cast<std::size_t>(w * h)), 0);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (std::int64_t k = -radius; k <= radius; ++k)
        acc += taps[k + radius] * horiz[static_cast<std::size_t>(detail::reflect101(y + k, h) * w + x)];
      const std::int64_t idx = y * w + x;
      const double scaled_pixel = static_cast<double>(frame.pixels[static_cast<std::size_t>(idx)]) * norm;
      if (scaled_pixel + offset > static_cast<double>(acc)) {
        words[static_cast<std::size_t>(idx) / 64] |= std::uint64_t{1} << (idx % 64);
      }
    }
  }
  return SdrVector(static_cast<std::size_t>(w * h), std::move(words));
}

/// reduce_frame followed by adaptive_threshold.
inline SdrVector encode(const GrayFrame& frame, const EncoderConfig& cfg) {
  validate(cfg, frame.width, frame.height);
  return adaptive_threshold(reduce_frame(frame, cfg.reduction_ratio), cfg);
}

}  // namespace htmvid
