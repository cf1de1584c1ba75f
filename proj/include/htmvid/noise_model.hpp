#pragma once

// Closed-form signal and noise propagation through the pooler's mappings
// (connectivity -> permanence filter -> overlap), the resulting match
// probabilities, and a Monte Carlo simulator of the same generative process.
//
// Two families of match probability are provided:
//   * literal:      sum_{k=o_m}^{s} C(n_b,k) * C(n-n_b,E) / C(n,E) with E a real
//                   expectation, evaluated with gamma-function binomials;
//   * hypergeometric: the exact probability that a column's connected synapses
//                   (count ~ Binomial(s, m)) hit at least o_m ones of a random
//                   input, which is what the simulator measures.
// The two disagree in general; both are reported.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "htmvid/error.hpp"
#include "htmvid/parallel.hpp"
#include "htmvid/rng.hpp"

namespace htmvid {

struct PropagationParams {
  std::uint32_t n = 1920;   // input size
  std::uint32_t n_b = 192;  // signal ones
  std::uint32_t s = 64;     // synapses per column
  std::uint32_t c = 2048;   // columns
  double m = 1.0;           // permanence reduction ratio
  std::uint32_t o_m = 8;    // min overlap
  std::uint32_t w = 0;      // noise bits
  std::uint32_t w_b = 0;    // ones among the noise bits

  friend bool operator==(const PropagationParams&, const PropagationParams&) = default;
};

struct PropagationExpectations {
  double e_scm = 0.0;
  double e_spm = 0.0;
  double e_ncm = 0.0;
  double e_npm = 0.0;
  double e_nb = 0.0;
};

inline void validate(const PropagationParams& p) {
  require(p.n > 0, Errc::domain_error, "PropagationParams: n must be positive");
  require(p.s > 0 && p.c > 0, Errc::domain_error, "PropagationParams: s and c must be positive");
  require(p.n_b <= p.n, Errc::domain_error, "PropagationParams: n_b > n");
  require(p.w <= p.n, Errc::domain_error, "PropagationParams: w > n");
  require(p.w_b <= p.w, Errc::domain_error, "PropagationParams: w_b > w");
  require(p.s <= p.n, Errc::domain_error, "PropagationParams: s > n");
  require(p.m > 0.0 && p.m <= 1.0, Errc::domain_error, "PropagationParams: m must lie in (0,1]");
}

inline PropagationExpectations propagation_expectations(const PropagationParams& p) {
  validate(p);
  const double n = p.n;
  const double s = p.s;
  PropagationExpectations e;
  e.e_scm = s * p.n_b / n;
  e.e_spm = s * p.m * p.n_b / n;
  e.e_ncm = s * p.w / n;
  e.e_npm = s * p.m * p.w / n;
  // Same operation order as e_spm so that w = 0, m = 1 gives bit-identical values.
  e.e_nb = s * (p.w_b + p.n_b * (1.0 - p.w / n)) / n;
  return e;
}

/// ln C(a, b) = lnG(a+1) - lnG(b+1) - lnG(a-b+1), for real 0 <= b <= a.
inline double log_generalized_binomial(double a, double b) {
  require(a >= 0.0 && b >= 0.0, Errc::domain_error,
          "log_generalized_binomial: negative argument (" + std::to_string(a) + ", " + std::to_string(b) + ")");
  require(b <= a, Errc::domain_error,
          "log_generalized_binomial: b > a (" + std::to_string(b) + " > " + std::to_string(a) + ")");
  return std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0);
}

/// log(sum exp(x)), tolerant of -inf entries.
inline double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

/// A probability evaluated in the log domain. `log_value` is the unclamped
/// result; `value` is clamped to [0,1] and `clamped` records whether that changed it.
struct Probability {
  double value = 0.0;
  double log_value = -std::numeric_limits<double>::infinity();
  bool clamped = false;
};

inline Probability make_probability(double log_value) {
  Probability p;
  p.log_value = log_value;
  if (log_value > 0.0) {
    p.value = 1.0;
    p.clamped = true;
  } else {
    p.value = std::exp(log_value);
  }
  return p;
}

namespace detail {

inline Probability literal_match_probability(const PropagationParams& p, double expectation, const char* which) {
  validate(p);
  const double free_bits = static_cast<double>(p.n) - static_cast<double>(p.n_b);
  if (expectation > free_bits) {
    fail(Errc::domain_error, std::string(which) + ": binomial C(n - n_b, E) undefined since E = " +
                                 std::to_string(expectation) + " exceeds n - n_b = " + std::to_string(free_bits));
  }
  std::vector<double> terms;
  for (std::uint32_t k = p.o_m; k <= std::min(p.s, p.n_b); ++k) {
    terms.push_back(log_generalized_binomial(p.n_b, k));
  }
  if (terms.empty()) return make_probability(-std::numeric_limits<double>::infinity());
  const double log_sum = log_sum_exp(terms);
  return make_probability(log_sum + log_generalized_binomial(free_bits, expectation) -
                          log_generalized_binomial(p.n, expectation));
}

/// Table of ln(i!) for i in [0, n].
inline std::vector<double> log_factorials(std::uint32_t n) {
  std::vector<double> lf(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::uint32_t i = 1; i <= n; ++i) lf[i] = lf[i - 1] + std::log(static_cast<double>(i));
  return lf;
}

inline double log_choose(const std::vector<double>& lf, std::uint32_t a, std::uint32_t b) {
  if (b > a) return -std::numeric_limits<double>::infinity();
  return lf[a] - lf[b] - lf[a - b];
}

/// P(overlap >= o_m) when `draws` positions are picked from n of which `ones` are set.
inline double hypergeometric_tail(const std::vector<double>& lf, std::uint32_t n, std::uint32_t ones,
                                  std::uint32_t draws, std::uint32_t o_m) {
  const double denom = log_choose(lf, n, draws);
  double total = 0.0;
  for (std::uint32_t k = o_m; k <= std::min(draws, ones); ++k) {
    if (draws - k > n - ones) continue;
    total += std::exp(log_choose(lf, ones, k) + log_choose(lf, n - ones, draws - k) - denom);
  }
  return total;
}

/// Binomial(s, m) weights for the connected-synapse count.
inline std::vector<double> connected_count_weights(const std::vector<double>& lf, std::uint32_t s, double m) {
  std::vector<double> w(static_cast<std::size_t>(s) + 1, 0.0);
  if (m >= 1.0) {
    w[s] = 1.0;
    return w;
  }
  for (std::uint32_t d = 0; d <= s; ++d) {
    w[d] = std::exp(log_choose(lf, s, d) + d * std::log(m) + (s - d) * std::log1p(-m));
  }
  return w;
}

}  // namespace detail

/// Literal match probability with E = E[X_SPM].
inline Probability match_probability_signal(const PropagationParams& p) {
  const auto e = propagation_expectations(p);
  return detail::literal_match_probability(p, e.e_spm, "match_probability_signal");
}

/// Literal match probability with E = E[X_NB].
inline Probability match_probability_noise(const PropagationParams& p) {
  const auto e = propagation_expectations(p);
  return detail::literal_match_probability(p, e.e_nb, "match_probability_noise");
}

/// Exact P(column overlap >= o_m) for a random signal with n_b ones, the column's
/// s synapses each retained with probability m.
inline double match_probability_signal_hypergeometric(const PropagationParams& p) {
  validate(p);
  const auto lf = detail::log_factorials(p.n);
  const auto weights = detail::connected_count_weights(lf, p.s, p.m);
  double total = 0.0;
  for (std::uint32_t d = 0; d <= p.s; ++d) {
    if (weights[d] > 0.0) total += weights[d] * detail::hypergeometric_tail(lf, p.n, p.n_b, d, p.o_m);
  }
  return std::clamp(total, 0.0, 1.0);
}

/// As match_probability_signal_hypergeometric, for an input whose w noise positions
/// were overwritten with w_b ones (the surviving signal count is itself hypergeometric).
inline double match_probability_noise_hypergeometric(const PropagationParams& p) {
  validate(p);
  const auto lf = detail::log_factorials(p.n);
  const auto weights = detail::connected_count_weights(lf, p.s, p.m);
  const std::uint32_t untouched = p.n - p.w;
  const double denom = detail::log_choose(lf, p.n, untouched);
  double total = 0.0;
  for (std::uint32_t j = 0; j <= std::min(p.n_b, untouched); ++j) {
    if (untouched - j > p.n - p.n_b) continue;
    const double pj = std::exp(detail::log_choose(lf, p.n_b, j) + detail::log_choose(lf, p.n - p.n_b, untouched - j) - denom);
    if (pj == 0.0) continue;
    double inner = 0.0;
    for (std::uint32_t d = 0; d <= p.s; ++d) {
      if (weights[d] > 0.0) inner += weights[d] * detail::hypergeometric_tail(lf, p.n, j + p.w_b, d, p.o_m);
    }
    total += pj * inner;
  }
  return std::clamp(total, 0.0, 1.0);
}

/// P_signal / P_noise in closed factorial form:
///   (n - n_b - E_NB)! (n - E_SPM)! / ((n - n_b - E_SPM)! (n - E_NB)!)
inline double noise_impact_ratio(const PropagationParams& p) {
  const auto noise = match_probability_noise(p);
  require(noise.log_value > -std::numeric_limits<double>::infinity(), Errc::domain_error,
          "noise_impact_ratio: P_noise = 0, ratio is infinite");
  (void)match_probability_signal(p);  // domain check on E_SPM
  const auto e = propagation_expectations(p);
  const double n = p.n;
  const double free_bits = n - p.n_b;
  const double log_ratio =
      (std::lgamma(free_bits - e.e_nb + 1.0) - std::lgamma(free_bits - e.e_spm + 1.0)) +
      (std::lgamma(n - e.e_spm + 1.0) - std::lgamma(n - e.e_nb + 1.0));
  return std::exp(log_ratio);
}

/// The same ratio computed as the quotient of the two unclamped literal probabilities.
inline double noise_impact_quotient(const PropagationParams& p) {
  const auto signal = match_probability_signal(p);
  const auto noise = match_probability_noise(p);
  require(noise.log_value > -std::numeric_limits<double>::infinity(), Errc::domain_error,
          "noise_impact_quotient: P_noise = 0");
  return std::exp(signal.log_value - noise.log_value);
}

struct MonteCarloResult {
  PropagationExpectations mean;
  PropagationExpectations std_error;
  double p_match_signal = 0.0;
  double p_match_signal_se = 0.0;
  double p_match_noise = 0.0;
  double p_match_noise_se = 0.0;
  std::uint64_t trials = 0;
};

namespace detail {

// Per-block integer sums; merging them is exact, so results do not depend on
// how blocks are scheduled.
struct McSums {
  std::uint64_t sum[5] = {};
  std::uint64_t sumsq[5] = {};
  std::uint64_t match_signal = 0;
  std::uint64_t match_noise = 0;

  void merge(const McSums& o) {
    for (int i = 0; i < 5; ++i) {
      sum[i] += o.sum[i];
      sumsq[i] += o.sumsq[i];
    }
    match_signal += o.match_signal;
    match_noise += o.match_noise;
  }
};

inline McSums simulate_block(const PropagationParams& p, std::uint64_t trials, std::uint64_t seed) {
  Rng rng(seed);
  SubsetSampler sampler;
  std::vector<std::uint8_t> signal(p.n, 0);
  std::vector<std::uint8_t> noise_state(p.n, 0);  // 0 untouched, 1 noise zero, 2 noise one
  std::vector<std::uint32_t> sig_idx, conn_idx, noise_idx, noise_ones;
  McSums sums;
  for (std::uint64_t t = 0; t < trials; ++t) {
    sig_idx.clear();
    conn_idx.clear();
    noise_idx.clear();
    noise_ones.clear();
    sampler.sample(rng, p.n, p.n_b, sig_idx);
    for (auto i : sig_idx) signal[i] = 1;
    sampler.sample(rng, p.n, p.s, conn_idx);
    sampler.sample(rng, p.n, p.w, noise_idx);
    for (auto i : noise_idx) noise_state[i] = 1;
    sampler.sample(rng, p.w, p.w_b, noise_ones);
    for (auto j : noise_ones) noise_state[noise_idx[j]] = 2;

    std::uint64_t counts[5] = {};
    std::uint64_t noisy_retained = 0;
    for (auto i : conn_idx) {
      const bool retained = p.m >= 1.0 || rng.bernoulli(p.m);
      const bool is_signal = signal[i] != 0;
      const bool is_noise = noise_state[i] != 0;
      const bool noisy_one = is_noise ? noise_state[i] == 2 : is_signal;
      counts[0] += is_signal;
      counts[1] += is_signal && retained;
      counts[2] += is_noise;
      counts[3] += is_noise && retained;
      counts[4] += noisy_one;
      noisy_retained += noisy_one && retained;
    }
    for (int i = 0; i < 5; ++i) {
      sums.sum[i] += counts[i];
      sums.sumsq[i] += counts[i] * counts[i];
    }
    sums.match_signal += counts[1] >= p.o_m;
    sums.match_noise += noisy_retained >= p.o_m;

    for (auto i : sig_idx) signal[i] = 0;
    for (auto i : noise_idx) noise_state[i] = 0;
  }
  return sums;
}

}  // namespace detail

inline constexpr std::uint64_t kMonteCarloBlock = 4096;

/// Simulates the propagation chain `trials` times. Trials run in blocks of
/// kMonteCarloBlock, block b drawing from substream (seed, b); `threads` only
/// changes scheduling.
inline MonteCarloResult monte_carlo_propagation(const PropagationParams& p, std::uint64_t trials, std::uint64_t seed,
                                                unsigned threads = 1) {
  validate(p);
  require(trials >= 1000, Errc::invalid_argument, "monte_carlo_propagation: at least 1000 trials required");
  const std::uint64_t blocks = (trials + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<detail::McSums> partial(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::uint64_t begin = b * kMonteCarloBlock;
    const std::uint64_t count = std::min(kMonteCarloBlock, trials - begin);
    partial[b] = detail::simulate_block(p, count, derive_seed(seed, {0x4D43ULL, b}));
  });
  detail::McSums total;
  for (const auto& part : partial) total.merge(part);

  const double t = static_cast<double>(trials);
  double mean[5];
  double se[5];
  for (int i = 0; i < 5; ++i) {
    mean[i] = static_cast<double>(total.sum[i]) / t;
    const double var = std::max(0.0, (static_cast<double>(total.sumsq[i]) - t * mean[i] * mean[i]) / (t - 1.0));
    se[i] = std::sqrt(var / t);
  }
  MonteCarloResult r;
  r.trials = trials;
  r.mean = {mean[0], mean[1], mean[2], mean[3], mean[4]};
  r.std_error = {se[0], se[1], se[2], se[3], se[4]};
  r.p_match_signal = static_cast<double>(total.match_signal) / t;
  r.p_match_signal_se = std::sqrt(r.p_match_signal * (1.0 - r.p_match_signal) / t);
  r.p_match_noise = static_cast<double>(total.match_noise) / t;
  r.p_match_noise_se = std::sqrt(r.p_match_noise * (1.0 - r.p_match_noise) / t);
  return r;
}

}  // namespace htmvid
