#pragma once

// Clustering-style F1: per class i the best F(i, j) over predicted clusters j,
// weighted by class frequency.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "htmvid/error.hpp"
#include "htmvid/features.hpp"

namespace htmvid {

struct ClassScores {
  int label = 0;
  std::size_t support = 0;  // n_i
  double recall = 0.0;      // Recall(i, i)
  double precision = 0.0;   // Precision(i, i)
  double f_diag = 0.0;      // F(i, i)
  double f_max = 0.0;       // max_j F(i, j)
  int best_cluster = 0;
};

struct EvalReport {
  std::vector<int> labels;                         // row / column order of the confusion matrix
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<ClassScores> classes;                // classes with support > 0
  double weighted_f1 = 0.0;
  std::size_t items = 0;
  std::optional<SimilarityRatios> similarity;
};

namespace detail {

inline double f_measure(double recall, double precision) {
  return recall + precision > 0.0 ? 2.0 * recall * precision / (recall + precision) : 0.0;
}

}  // namespace detail

inline EvalReport f1_report(std::span<const int> truth, std::span<const int> predicted) {
  require(!truth.empty(), Errc::invalid_argument, "f1_report: empty input");
  require(truth.size() == predicted.size(), Errc::length_mismatch, "f1_report: label vectors differ in length");
  EvalReport r;
  r.items = truth.size();
  r.labels.assign(truth.begin(), truth.end());
  r.labels.insert(r.labels.end(), predicted.begin(), predicted.end());
  std::sort(r.labels.begin(), r.labels.end());
  r.labels.erase(std::unique(r.labels.begin(), r.labels.end()), r.labels.end());
  const std::size_t k = r.labels.size();
  auto index_of = [&](int label) {
    return static_cast<std::size_t>(std::lower_bound(r.labels.begin(), r.labels.end(), label) - r.labels.begin());
  };
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t t = 0; t < truth.size(); ++t) ++r.confusion[index_of(truth[t])][index_of(predicted[t])];

  std::vector<std::size_t> class_size(k, 0);
  std::vector<std::size_t> cluster_size(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      class_size[i] += r.confusion[i][j];
      cluster_size[j] += r.confusion[i][j];
    }
  }
  const double n = static_cast<double>(r.items);
  for (std::size_t i = 0; i < k; ++i) {
    if (class_size[i] == 0) continue;
    ClassScores cs;
    cs.label = r.labels[i];
    cs.support = class_size[i];
    double best = -1.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double nij = static_cast<double>(r.confusion[i][j]);
      const double recall = nij / static_cast<double>(class_size[i]);
      const double precision = cluster_size[j] > 0 ? nij / static_cast<double>(cluster_size[j]) : 0.0;
      const double f = detail::f_measure(recall, precision);
      if (i == j) {
        cs.recall = recall;
        cs.precision = precision;
        cs.f_diag = f;
      }
      if (f > best) {
        best = f;
        cs.best_cluster = r.labels[j];
      }
    }
    cs.f_max = best;
    r.weighted_f1 += static_cast<double>(class_size[i]) / n * best;
    r.classes.push_back(cs);
  }
  return r;
}

inline nlohmann::json to_json(const SimilarityRatios& s) {
  nlohmann::json j;
  j["overall"] = {{"mean", s.overall.mean}, {"used", s.overall.used}, {"skipped", s.overall.skipped}};
  auto& per = j["per_class"] = nlohmann::json::array();
  for (const auto& [label, cr] : s.per_class) {
    per.push_back({{"label", label}, {"mean", cr.mean}, {"used", cr.used}, {"skipped", cr.skipped}});
  }
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["items"] = r.items;
  j["weighted_f1"] = r.weighted_f1;
  j["labels"] = r.labels;
  j["confusion"] = r.confusion;
  auto& classes = j["classes"] = nlohmann::json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"label", c.label},
                       {"support", c.support},
                       {"recall", c.recall},
                       {"precision", c.precision},
                       {"f", c.f_diag},
                       {"f_max", c.f_max},
                       {"best_cluster", c.best_cluster}});
  }
  if (r.similarity) j["similarity"] = to_json(*r.similarity);
  return j;
}

/// Aligned text table: one row per class plus the weighted total.
inline std::string to_text(const EvalReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %8s %8s\n", "class", "support", "recall", "precis.", "F", "maxF");
  out += line;
  for (const auto& c : r.classes) {
    std::snprintf(line, sizeof line, "%-8d %8zu %8.4f %8.4f %8.4f %8.4f\n", c.label, c.support, c.recall, c.precision,
                  c.f_diag, c.f_max);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-8s %8zu %44.4f\n", "F1", r.items, r.weighted_f1);
  out += line;
  return out;
}

}  // namespace htmvid
