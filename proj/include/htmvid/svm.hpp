#pragma once

// One-vs-rest linear SVM on the L2-regularised hinge loss
//   lambda/2 |(w,b)|^2 + (1/n) sum_i max(0, 1 - y_i (w.x_i + b)).
// The bias rides along as the weight of a constant feature. Two deterministic
// epoch-based solvers: dual coordinate descent (default) and Pegasos primal
// subgradient descent with step 1/(lambda t).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "htmvid/error.hpp"
#include "htmvid/rng.hpp"

namespace htmvid {

enum class SvmSolver { dual_cd, pegasos };

struct SvmConfig {
  double lambda = 1e-4;
  SvmSolver solver = SvmSolver::dual_cd;
  std::uint32_t epochs = 50;
  std::uint64_t seed = 0;
  /// Train on features minus their training mean, then fold the mean into the
  /// bias so the model still applies to raw features.
  bool center = true;
  /// Pegasos only: return the mean of the end-of-epoch iterates over the second half of training.
  bool average = false;
};

struct LinearModel {
  std::vector<int> labels;                  // ascending
  std::vector<std::vector<double>> weights;  // one per label
  std::vector<double> biases;
  std::size_t dimension = 0;
  SvmConfig config;
  /// Mean over classes of the primal objective after each epoch.
  std::vector<double> epoch_objective;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// lambda/2 |(w,b)|^2 + mean hinge loss
inline double primal_objective(std::span<const double> w, double b, std::span<const std::vector<double>> x,
                               std::span<const double> y, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) loss += std::max(0.0, 1.0 - y[i] * (dot(w, x[i]) + b));
  return 0.5 * lambda * (dot(w, w) + b * b) + loss / static_cast<double>(x.size());
}

inline LinearModel train_svm_raw(std::span<const std::vector<double>> features, std::span<const int> labels,
                                 const SvmConfig& config) {
  require(!features.empty(), Errc::invalid_argument, "train_svm: no training data");
  require(features.size() == labels.size(), Errc::length_mismatch, "train_svm: features/labels size mismatch");
  require(config.lambda > 0.0 && config.epochs > 0, Errc::invalid_argument, "train_svm: lambda and epochs must be positive");
  const std::size_t dim = features.front().size();
  for (const auto& f : features) {
    require(f.size() == dim, Errc::length_mismatch, "train_svm: inconsistent feature dimensions");
  }
  LinearModel model;
  model.labels.assign(labels.begin(), labels.end());
  std::sort(model.labels.begin(), model.labels.end());
  model.labels.erase(std::unique(model.labels.begin(), model.labels.end()), model.labels.end());
  require(model.labels.size() >= 2, Errc::invalid_argument, "train_svm: need at least two classes");
  model.dimension = dim;
  model.config = config;

  const std::size_t n = features.size();
  const double lambda = config.lambda;
  const double radius = 1.0 / std::sqrt(lambda);

  // Shared visiting order per epoch.
  std::vector<std::vector<std::size_t>> orders(config.epochs);
  for (std::uint32_t e = 0; e < config.epochs; ++e) {
    auto& order = orders[e];
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, {0x5356ULL, e}));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  }

  model.epoch_objective.assign(config.epochs, 0.0);
  std::vector<double> y(n);
  if (config.solver == SvmSolver::dual_cd) {
    // Box constraint for the equivalent C-SVM: C = 1 / (lambda n).
    const double upper = 1.0 / (lambda * static_cast<double>(n));
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = detail::dot(features[i], features[i]) + 1.0;
    for (int label : model.labels) {
      for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == label ? 1.0 : -1.0;
      std::vector<double> w(dim, 0.0);
      double bias = 0.0;
      std::vector<double> alpha(n, 0.0);
      for (std::uint32_t e = 0; e < config.epochs; ++e) {
        for (std::size_t i : orders[e]) {
          const auto& x = features[i];
          const double g = y[i] * (detail::dot(w, x) + bias) - 1.0;
          double pg = g;
          if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
          if (alpha[i] >= upper) pg = std::max(g, 0.0);
          if (pg == 0.0) continue;
          const double next = std::clamp(alpha[i] - g / q[i], 0.0, upper);
          const double delta = (next - alpha[i]) * y[i];
          alpha[i] = next;
          for (std::size_t j = 0; j < dim; ++j) w[j] += delta * x[j];
          bias += delta;
        }
        model.epoch_objective[e] += detail::primal_objective(w, bias, features, y, lambda);
      }
      model.weights.push_back(std::move(w));
      model.biases.push_back(bias);
    }
    for (auto& obj : model.epoch_objective) obj /= static_cast<double>(model.labels.size());
    return model;
  }

  const std::uint32_t average_from = config.epochs / 2;
  for (int label : model.labels) {
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == label ? 1.0 : -1.0;
    // w = scale * v keeps the per-step shrink O(1).
    std::vector<double> v(dim, 0.0);
    double scale = 1.0;
    double bias = 0.0;
    double sq_norm = 0.0;  // |v|^2
    std::uint64_t t = 0;
    std::vector<double> w_sum(config.average ? dim : 0, 0.0);
    double b_sum = 0.0;
    std::uint64_t averaged = 0;
    for (std::uint32_t e = 0; e < config.epochs; ++e) {
      for (std::size_t i : orders[e]) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double margin = y[i] * (scale * detail::dot(v, features[i]) + bias);
        const double shrink = 1.0 - eta * lambda;
        if (shrink <= 0.0) {
          std::fill(v.begin(), v.end(), 0.0);
          scale = 1.0;
          sq_norm = 0.0;
        } else {
          scale *= shrink;
        }
        bias *= std::max(shrink, 0.0);
        if (margin < 1.0) {
          const double step = eta * y[i] / scale;
          const auto& x = features[i];
          double vx = 0.0;
          double xx = 0.0;
          for (std::size_t j = 0; j < dim; ++j) {
            vx += v[j] * x[j];
            xx += x[j] * x[j];
            v[j] += step * x[j];
          }
          sq_norm += 2.0 * step * vx + step * step * xx;
          bias += eta * y[i];
        }
        const double norm = std::sqrt(std::max(0.0, scale * scale * sq_norm + bias * bias));
        if (norm > radius) {
          const double f = radius / norm;
          scale *= f;
          bias *= f;
        }
        if (scale < 1e-9) {
          for (auto& vj : v) vj *= scale;
          sq_norm *= scale * scale;
          scale = 1.0;
        }
      }
      std::vector<double> w(dim);
      for (std::size_t j = 0; j < dim; ++j) w[j] = scale * v[j];
      if (config.average && e >= average_from) {
        for (std::size_t j = 0; j < dim; ++j) w_sum[j] += w[j];
        b_sum += bias;
        ++averaged;
        for (std::size_t j = 0; j < dim; ++j) w[j] = w_sum[j] / static_cast<double>(averaged);
        model.epoch_objective[e] += detail::primal_objective(w, b_sum / static_cast<double>(averaged), features, y, lambda);
      } else {
        model.epoch_objective[e] += detail::primal_objective(w, bias, features, y, lambda);
      }
      if (e + 1 == config.epochs) {
        model.weights.push_back(std::move(w));
        model.biases.push_back(config.average ? b_sum / static_cast<double>(averaged) : bias);
      }
    }
  }
  for (auto& obj : model.epoch_objective) obj /= static_cast<double>(model.labels.size());
  return model;
}

}  // namespace detail

inline LinearModel train_svm(std::span<const std::vector<double>> features, std::span<const int> labels,
                             const SvmConfig& config = {}) {
  if (!config.center || features.empty()) return detail::train_svm_raw(features, labels, config);
  const std::size_t dim = features.front().size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& f : features) {
    require(f.size() == dim, Errc::length_mismatch, "train_svm: inconsistent feature dimensions");
    for (std::size_t j = 0; j < dim; ++j) mean[j] += f[j];
  }
  for (auto& m : mean) m /= static_cast<double>(features.size());
  std::vector<std::vector<double>> centered(features.begin(), features.end());
  for (auto& f : centered) {
    for (std::size_t j = 0; j < dim; ++j) f[j] -= mean[j];
  }
  LinearModel model = detail::train_svm_raw(centered, labels, config);
  for (std::size_t c = 0; c < model.labels.size(); ++c) model.biases[c] -= detail::dot(model.weights[c], mean);
  return model;
}

/// Per-class scores w.x + b, in model.labels order.
inline std::vector<double> decision_scores(const LinearModel& model, std::span<const double> feature) {
  require(feature.size() == model.dimension, Errc::length_mismatch,
          "predict: feature dimension " + std::to_string(feature.size()) + " != model dimension " +
              std::to_string(model.dimension));
  std::vector<double> scores(model.labels.size());
  for (std::size_t c = 0; c < model.labels.size(); ++c) {
    scores[c] = detail::dot(model.weights[c], feature) + model.biases[c];
  }
  return scores;
}

/// Argmax of the class scores; ties go to the smallest label.
inline int predict(const LinearModel& model, std::span<const double> feature) {
  const auto scores = decision_scores(model, feature);
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return model.labels[best];
}

}  // namespace htmvid
