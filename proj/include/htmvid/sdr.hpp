#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htmvid/error.hpp"

namespace htmvid {

/// Fixed-length binary vector stored as packed 64-bit words, bit i in word i/64.
/// Immutable once built; bits past `length` are always zero.
class SdrVector {
 public:
  using word_type = std::uint64_t;
  static constexpr std::size_t kWordBits = 64;

  SdrVector() = default;

  /// All-zero vector of `length` bits.
  explicit SdrVector(std::size_t length) : length_(length), words_(word_count(length), 0) {}

  /// Builds from packed words. Stray bits above `length` are rejected.
  SdrVector(std::size_t length, std::vector<word_type> words) : length_(length), words_(std::move(words)) {
    require(words_.size() == word_count(length), Errc::length_mismatch, "SdrVector: word count does not match length");
    if (length % kWordBits != 0 && !words_.empty()) {
      const word_type tail_mask = ~word_type{0} << (length % kWordBits);
      require((words_.back() & tail_mask) == 0, Errc::invalid_argument, "SdrVector: bits set beyond length");
    }
  }

  /// Builds from one byte per bit (nonzero = 1).
  static SdrVector from_bytes(std::span<const std::uint8_t> bits) {
    std::vector<word_type> words(word_count(bits.size()), 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) words[i / kWordBits] |= word_type{1} << (i % kWordBits);
    }
    return SdrVector(bits.size(), std::move(words));
  }

  static constexpr std::size_t word_count(std::size_t length) noexcept {
    return (length + kWordBits - 1) / kWordBits;
  }

  std::size_t length() const noexcept { return length_; }
  std::span<const word_type> words() const noexcept { return words_; }

  bool test(std::size_t i) const noexcept { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }

  /// Bounds-checked bit read.
  bool at(std::size_t i) const {
    require(i < length_, Errc::index_out_of_range, "SdrVector: index " + std::to_string(i) + " out of range");
    return test(i);
  }

  std::size_t popcount() const noexcept {
    std::size_t total = 0;
    for (word_type w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
  }

  /// Ascending indices of set bits.
  std::vector<std::uint32_t> active_indices() const {
    std::vector<std::uint32_t> out;
    out.reserve(popcount());
    for (std::size_t wi = 0; wi < words_.size(); ++wi) {
      word_type w = words_[wi];
      while (w != 0) {
        const int bit = std::countr_zero(w);
        out.push_back(static_cast<std::uint32_t>(wi * kWordBits + static_cast<std::size_t>(bit)));
        w &= w - 1;
      }
    }
    return out;
  }

  /// Bits as a '0'/'1' string, index 0 first.
  std::string to_string() const {
    std::string s(length_, '0');
    for (std::size_t i = 0; i < length_; ++i) {
      if (test(i)) s[i] = '1';
    }
    return s;
  }

  friend bool operator==(const SdrVector&, const SdrVector&) = default;

 private:
  std::size_t length_ = 0;
  std::vector<word_type> words_;
};

/// Vector of `length` bits with ones exactly at `active_indices`.
/// Out-of-range and duplicate indices are rejected.
inline SdrVector make_sdr(std::size_t length, std::span<const std::uint32_t> active_indices) {
  require(length > 0, Errc::invalid_argument, "make_sdr: length must be positive");
  std::vector<SdrVector::word_type> words(SdrVector::word_count(length), 0);
  for (std::uint32_t idx : active_indices) {
    require(idx < length, Errc::index_out_of_range,
            "make_sdr: index " + std::to_string(idx) + " out of range for length " + std::to_string(length));
    auto& word = words[idx / SdrVector::kWordBits];
    const auto mask = SdrVector::word_type{1} << (idx % SdrVector::kWordBits);
    require((word & mask) == 0, Errc::invalid_argument, "make_sdr: duplicate index " + std::to_string(idx));
    word |= mask;
  }
  return SdrVector(length, std::move(words));
}

inline SdrVector make_sdr(std::size_t length, std::initializer_list<std::uint32_t> active_indices) {
  return make_sdr(length, std::span<const std::uint32_t>(active_indices.begin(), active_indices.size()));
}

inline std::size_t hamming_distance(const SdrVector& x, const SdrVector& y) {
  require(x.length() == y.length(), Errc::length_mismatch,
          "hamming_distance: lengths " + std::to_string(x.length()) + " and " + std::to_string(y.length()) + " differ");
  const auto xw = x.words();
  const auto yw = y.words();
  std::size_t d = 0;
  for (std::size_t i = 0; i < xw.size(); ++i) d += static_cast<std::size_t>(std::popcount(xw[i] ^ yw[i]));
  return d;
}

/// Fraction of set bits.
inline double sparsity(const SdrVector& x) {
  require(x.length() > 0, Errc::invalid_argument, "sparsity: zero-length vector");
  return static_cast<double>(x.popcount()) / static_cast<double>(x.length());
}

}  // namespace htmvid
