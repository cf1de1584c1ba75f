#pragma once

// Per-video activity histograms and the cosine-similarity noise measures built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htmvid/error.hpp"
#include "htmvid/sdr.hpp"

namespace htmvid {

/// Fraction of frames in which each feature was active.
struct VideoHistogram {
  std::vector<double> counts;
  std::uint32_t frames = 0;
};

inline VideoHistogram accumulate_histogram(std::span<const SdrVector> outputs) {
  require(!outputs.empty(), Errc::invalid_argument, "accumulate_histogram: empty frame sequence");
  const std::size_t dim = outputs.front().length();
  std::vector<std::uint32_t> raw(dim, 0);
  for (const auto& frame : outputs) {
    require(frame.length() == dim, Errc::length_mismatch,
            "accumulate_histogram: frame length " + std::to_string(frame.length()) + " != " + std::to_string(dim));
    for (auto idx : frame.active_indices()) ++raw[idx];
  }
  VideoHistogram h;
  h.frames = static_cast<std::uint32_t>(outputs.size());
  h.counts.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) h.counts[j] = static_cast<double>(raw[j]) / h.frames;
  return h;
}

/// a.b / (|a| |b|); std::nullopt when either vector has zero norm.
inline std::optional<double> cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), Errc::length_mismatch,
          "cosine_similarity: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " differ");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

struct ClassRatio {
  double mean = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Ratios of clean-vs-noisy cosine similarity, processed pipeline over raw pipeline.
struct SimilarityRatios {
  std::map<int, ClassRatio> per_class;
  ClassRatio overall;
};

/// Per video: cos(clean_sp, noisy_sp) / cos(clean_raw, noisy_raw). Videos where
/// either similarity is undefined, or the raw similarity is zero, are skipped and counted.
inline SimilarityRatios similarity_ratio(std::span<const std::vector<double>> clean_sp,
                                         std::span<const std::vector<double>> noisy_sp,
                                         std::span<const std::vector<double>> clean_raw,
                                         std::span<const std::vector<double>> noisy_raw, std::span<const int> labels) {
  const std::size_t n = labels.size();
  require(clean_sp.size() == n && noisy_sp.size() == n && clean_raw.size() == n && noisy_raw.size() == n,
          Errc::length_mismatch, "similarity_ratio: collections are not aligned");
  SimilarityRatios out;
  std::map<int, double> sums;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& cls = out.per_class[labels[i]];
    const auto sp = cosine_similarity(clean_sp[i], noisy_sp[i]);
    const auto raw = cosine_similarity(clean_raw[i], noisy_raw[i]);
    if (!sp || !raw || *raw == 0.0) {
      ++cls.skipped;
      ++out.overall.skipped;
      continue;
    }
    const double r = *sp / *raw;
    sums[labels[i]] += r;
    total += r;
    ++cls.used;
    ++out.overall.used;
  }
  for (auto& [label, cls] : out.per_class) {
    if (cls.used > 0) cls.mean = sums[label] / static_cast<double>(cls.used);
  }
  if (out.overall.used > 0) out.overall.mean = total / static_cast<double>(out.overall.used);
  return out;
}

}  // namespace htmvid
