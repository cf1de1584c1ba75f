#pragma once

// Spatial pooler: fixed random connectivity, overlap with a min_overlap
// cut-off, global k-winners inhibition and Hebbian permanence learning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "htmvid/binary_io.hpp"
#include "htmvid/error.hpp"
#include "htmvid/params.hpp"
#include "htmvid/rng.hpp"
#include "htmvid/sdr.hpp"

namespace htmvid {

struct Synapse {
  std::uint32_t input_index = 0;
  float permanence = 0.0F;

  friend bool operator==(const Synapse&, const Synapse&) = default;
};

/// Read-only view of one column. Synapses are stored structure-of-arrays in the pooler.
struct ColumnView {
  std::span<const std::uint32_t> input_indices;
  std::span<const float> permanences;
  double boost = 1.0;
  double overlap = 0.0;

  std::size_t size() const noexcept { return input_indices.size(); }
  Synapse synapse(std::size_t i) const noexcept { return {input_indices[i], permanences[i]}; }
};

struct SpOutput {
  SdrVector active_columns;
  std::vector<double> overlaps;
};

/// One profiler sample: activity percentages, inhibition radius and overlap statistics.
struct ProfileRecord {
  double input_active_pct = 0.0;
  double output_active_pct = 0.0;
  double inhibition_radius = 0.0;
  double overlap_min = 0.0;
  double overlap_mean = 0.0;
  double overlap_max = 0.0;
};

/// Top-k column selection. Columns are ordered by (overlap desc, index asc); the
/// first `winners_set_size` of that order with overlap >= 1 become active.
inline SdrVector inhibit(std::span<const double> overlaps, const SpParams& params) {
  require(overlaps.size() == params.columns, Errc::length_mismatch,
          "inhibit: got " + std::to_string(overlaps.size()) + " overlaps for " + std::to_string(params.columns) +
              " columns");
  const std::size_t k = std::min<std::size_t>(params.winners_set_size, overlaps.size());
  std::vector<std::uint32_t> order;
  order.reserve(overlaps.size());
  for (std::uint32_t i = 0; i < overlaps.size(); ++i) {
    if (overlaps[i] >= 1.0) order.push_back(i);
  }
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    return overlaps[a] != overlaps[b] ? overlaps[a] > overlaps[b] : a < b;
  };
  if (order.size() > k) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    order.resize(k);
  }
  std::vector<SdrVector::word_type> words(SdrVector::word_count(overlaps.size()), 0);
  for (std::uint32_t c : order) words[c / 64] |= SdrVector::word_type{1} << (c % 64);
  return SdrVector(overlaps.size(), std::move(words));
}

class SpatialPooler {
 public:
  static constexpr std::uint16_t kSnapshotVersion = 1;

  /// Draws each column's s distinct input indices from the substream (rng_seed, column).
  explicit SpatialPooler(const SpParams& params) : params_(params) {
    validate(params_);
    const std::uint32_t c = params_.columns;
    const std::uint32_t s = params_.synapses_per_column;
    const std::uint32_t n = params_.input_size;
    inputs_.reserve(static_cast<std::size_t>(c) * s);
    SubsetSampler sampler;
    std::vector<std::uint32_t> picked;
    for (std::uint32_t col = 0; col < c; ++col) {
      picked.clear();
      if (s == n) {
        picked.resize(n);
        std::iota(picked.begin(), picked.end(), 0U);
      } else {
        Rng rng(derive_seed(params_.rng_seed, {0x53594E41ULL, col}));
        sampler.sample(rng, n, s, picked);
        std::sort(picked.begin(), picked.end());
      }
      inputs_.insert(inputs_.end(), picked.begin(), picked.end());
    }
    perms_.assign(inputs_.size(), static_cast<float>(params_.initial_perm));
    boosts_.assign(c, params_.boost);
    overlaps_.assign(c, 0.0);
    duty_cycles_.assign(c, 0.0);
    connected_threshold_ = static_cast<float>(params_.connected_perm);
    connected_counts_.assign(c, 0);
    for (std::uint32_t col = 0; col < c; ++col) connected_counts_[col] = count_connected(col);
    inhibition_radius_ = static_cast<double>(params_.initial_inhibition_radius);
    build_input_index();
  }

  const SpParams& params() const noexcept { return params_; }
  std::size_t column_count() const noexcept { return params_.columns; }
  double inhibition_radius() const noexcept { return inhibition_radius_; }
  bool learn_enabled() const noexcept { return learn_enabled_; }
  void set_learn_enabled(bool on) noexcept { learn_enabled_ = on; }
  std::uint64_t learn_calls() const noexcept { return learn_calls_; }

  ColumnView column(std::size_t i) const {
    require(i < params_.columns, Errc::index_out_of_range, "SpatialPooler: column " + std::to_string(i));
    const std::size_t s = params_.synapses_per_column;
    return ColumnView{std::span<const std::uint32_t>(inputs_).subspan(i * s, s),
                      std::span<const float>(perms_).subspan(i * s, s), boosts_[i], overlaps_[i]};
  }

  std::uint32_t connected_synapses(std::size_t column) const { return connected_counts_.at(column); }

  /// Overwrites one synapse's permanence, clamped to [0,1].
  void set_permanence(std::size_t column, std::size_t synapse, double value) {
    require(column < params_.columns && synapse < params_.synapses_per_column, Errc::index_out_of_range,
            "set_permanence: (" + std::to_string(column) + ", " + std::to_string(synapse) + ") out of range");
    perms_[column * params_.synapses_per_column + synapse] = static_cast<float>(std::clamp(value, 0.0, 1.0));
    connected_counts_[column] = count_connected(column);
  }

  /// Raw connected-and-active count per column, zeroed below min_overlap, then boosted. Pure.
  std::vector<double> compute_overlaps(const SdrVector& input) const {
    check_input(input, "compute_overlaps");
    // Walk only the synapses that sit on active inputs.
    std::vector<std::uint32_t> raw(params_.columns, 0);
    for (std::uint32_t i : input.active_indices()) {
      for (std::uint32_t k = by_input_offsets_[i]; k < by_input_offsets_[i + 1]; ++k) {
        const std::uint32_t pos = by_input_pos_[k];
        raw[by_input_col_[k]] += static_cast<std::uint32_t>(perms_[pos] >= connected_threshold_);
      }
    }
    std::vector<double> out(params_.columns, 0.0);
    for (std::size_t col = 0; col < params_.columns; ++col) {
      out[col] = raw[col] < params_.min_overlap ? 0.0 : static_cast<double>(raw[col]) * boosts_[col];
    }
    return out;
  }

  /// Hebbian update of the active columns' permanences, clamped to [0,1].
  void learn(const SdrVector& input, const SdrVector& active) {
    require(learn_enabled_, Errc::invalid_argument, "learn: learning is disabled on this pooler");
    check_input(input, "learn");
    require(active.length() == params_.columns, Errc::length_mismatch,
            "learn: active set length " + std::to_string(active.length()) + " != columns " +
                std::to_string(params_.columns));
    const std::size_t s = params_.synapses_per_column;
    const auto inc = static_cast<float>(params_.perm_increment);
    const auto dec = static_cast<float>(params_.perm_decrement);
    for (std::uint32_t col : active.active_indices()) {
      float* perm = &perms_[col * s];
      const std::uint32_t* idx = &inputs_[col * s];
      for (std::size_t j = 0; j < s; ++j) {
        const float next = input.test(idx[j]) ? perm[j] + inc : perm[j] - dec;
        perm[j] = std::clamp(next, 0.0F, 1.0F);
      }
      connected_counts_[col] = count_connected(col);
    }
    std::uint64_t connected_total = 0;
    for (auto cnt : connected_counts_) connected_total += cnt;
    const double mean_fraction =
        static_cast<double>(connected_total) / (static_cast<double>(params_.columns) * static_cast<double>(s));
    inhibition_radius_ = mean_fraction * static_cast<double>(params_.input_size) / static_cast<double>(params_.columns);
    ++learn_calls_;
  }

  /// compute_overlaps -> inhibit, never learning. Safe to call concurrently.
  SpOutput infer(const SdrVector& input) const {
    SpOutput out;
    out.overlaps = compute_overlaps(input);
    out.active_columns = inhibit(out.overlaps, params_);
    return out;
  }

  /// compute_overlaps -> inhibit -> learn (when enabled).
  SpOutput step(const SdrVector& input) {
    SpOutput out;
    out.overlaps = compute_overlaps(input);
    out.active_columns = inhibit(out.overlaps, params_);
    if (learn_enabled_) {
      overlaps_ = out.overlaps;
      learn(input, out.active_columns);
      if (params_.boost_strength > 0.0) update_boosts(out.active_columns);
    }
    return out;
  }

  /// Versioned little-endian snapshot: "HTMS", u16 version, params, synapse tables
  /// (u32 index + f32 permanence), per-column boosts, scalar state.
  std::vector<std::uint8_t> serialize() const {
    ByteWriter w;
    w.tag("HTMS");
    w.u16(kSnapshotVersion);
    w.u32(params_.columns);
    w.u32(params_.synapses_per_column);
    w.u32(params_.input_size);
    w.u32(params_.min_overlap);
    w.u32(params_.winners_set_size);
    w.f64(params_.perm_increment);
    w.f64(params_.perm_decrement);
    w.f64(params_.initial_perm);
    w.f64(params_.connected_perm);
    w.f64(params_.boost);
    w.u32(params_.initial_inhibition_radius);
    w.u64(params_.rng_seed);
    w.f64(params_.boost_strength);
    w.u32(params_.duty_cycle_period);
    for (std::size_t i = 0; i < inputs_.size(); ++i) {
      w.u32(inputs_[i]);
      w.f32(perms_[i]);
    }
    for (double b : boosts_) w.f64(b);
    for (double d : duty_cycles_) w.f64(d);
    w.f64(inhibition_radius_);
    w.u8(learn_enabled_ ? 1 : 0);
    w.u64(learn_calls_);
    return w.take();
  }

  static SpatialPooler deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "HTMS snapshot");
    if (!r.tag_matches("HTMS")) fail(Errc::bad_magic, "HTMS snapshot: bad magic");
    const auto version = r.u16();
    require(version == kSnapshotVersion, Errc::version_mismatch,
            "HTMS snapshot: unsupported version " + std::to_string(version));
    SpParams p;
    p.columns = r.u32();
    p.synapses_per_column = r.u32();
    p.input_size = r.u32();
    p.min_overlap = r.u32();
    p.winners_set_size = r.u32();
    p.perm_increment = r.f64();
    p.perm_decrement = r.f64();
    p.initial_perm = r.f64();
    p.connected_perm = r.f64();
    p.boost = r.f64();
    p.initial_inhibition_radius = r.u32();
    p.rng_seed = r.u64();
    p.boost_strength = r.f64();
    p.duty_cycle_period = r.u32();
    validate(p);
    SpatialPooler sp(p, Uninitialized{});
    const std::size_t total = static_cast<std::size_t>(p.columns) * p.synapses_per_column;
    sp.inputs_.resize(total);
    sp.perms_.resize(total);
    for (std::size_t i = 0; i < total; ++i) {
      sp.inputs_[i] = r.u32();
      sp.perms_[i] = r.f32();
      require(sp.inputs_[i] < p.input_size, Errc::invalid_argument, "HTMS snapshot: synapse index out of range");
    }
    sp.boosts_.resize(p.columns);
    for (auto& b : sp.boosts_) b = r.f64();
    sp.duty_cycles_.resize(p.columns);
    for (auto& d : sp.duty_cycles_) d = r.f64();
    sp.inhibition_radius_ = r.f64();
    sp.learn_enabled_ = r.u8() != 0;
    sp.learn_calls_ = r.u64();
    sp.overlaps_.assign(p.columns, 0.0);
    sp.connected_counts_.assign(p.columns, 0);
    for (std::uint32_t col = 0; col < p.columns; ++col) sp.connected_counts_[col] = sp.count_connected(col);
    sp.build_input_index();
    return sp;
  }

  /// FNV-1a hash of the snapshot bytes.
  std::uint64_t state_hash() const { return fnv1a64(serialize()); }

 private:
  struct Uninitialized {};
  SpatialPooler(const SpParams& params, Uninitialized)
      : params_(params), connected_threshold_(static_cast<float>(params.connected_perm)) {}

  void check_input(const SdrVector& input, const char* where) const {
    require(input.length() == params_.input_size, Errc::length_mismatch,
            std::string(where) + ": input length " + std::to_string(input.length()) + " != input_size " +
                std::to_string(params_.input_size));
  }

  // Synapse positions grouped by input index; connectivity never changes after construction.
  void build_input_index() {
    const std::size_t s = params_.synapses_per_column;
    by_input_offsets_.assign(static_cast<std::size_t>(params_.input_size) + 1, 0);
    for (auto idx : inputs_) ++by_input_offsets_[idx + 1];
    for (std::size_t i = 1; i < by_input_offsets_.size(); ++i) by_input_offsets_[i] += by_input_offsets_[i - 1];
    by_input_pos_.assign(inputs_.size(), 0);
    by_input_col_.assign(inputs_.size(), 0);
    std::vector<std::uint32_t> fill(by_input_offsets_.begin(), by_input_offsets_.end() - 1);
    for (std::size_t pos = 0; pos < inputs_.size(); ++pos) {
      const std::uint32_t k = fill[inputs_[pos]]++;
      by_input_pos_[k] = static_cast<std::uint32_t>(pos);
      by_input_col_[k] = static_cast<std::uint32_t>(pos / s);
    }
  }

  std::uint32_t count_connected(std::size_t col) const {
    const std::size_t s = params_.synapses_per_column;
    std::uint32_t cnt = 0;
    for (std::size_t j = 0; j < s; ++j) cnt += perms_[col * s + j] >= connected_threshold_ ? 1U : 0U;
    return cnt;
  }

  // Exponential duty-cycle boosting towards the target density k / c.
  void update_boosts(const SdrVector& active) {
    const double period = static_cast<double>(params_.duty_cycle_period);
    const double target = static_cast<double>(params_.winners_set_size) / static_cast<double>(params_.columns);
    for (std::size_t col = 0; col < params_.columns; ++col) {
      const double a = active.test(col) ? 1.0 : 0.0;
      duty_cycles_[col] = (duty_cycles_[col] * (period - 1.0) + a) / period;
      boosts_[col] = params_.boost * std::exp(-params_.boost_strength * (duty_cycles_[col] - target));
    }
  }

  SpParams params_;
  std::vector<std::uint32_t> inputs_;
  std::vector<float> perms_;
  std::vector<double> boosts_;
  std::vector<double> overlaps_;
  std::vector<double> duty_cycles_;
  std::vector<std::uint32_t> connected_counts_;
  std::vector<std::uint32_t> by_input_offsets_;
  std::vector<std::uint32_t> by_input_pos_;
  std::vector<std::uint32_t> by_input_col_;
  float connected_threshold_ = 0.2F;
  double inhibition_radius_ = 0.0;
  bool learn_enabled_ = true;
  std::uint64_t learn_calls_ = 0;
};

inline SpatialPooler init_pooler(const SpParams& params) { return SpatialPooler(params); }

inline ProfileRecord profile_snapshot(const SpatialPooler& sp, const SdrVector& input, const SpOutput& out) {
  require(input.length() == sp.params().input_size && out.active_columns.length() == sp.column_count() &&
              out.overlaps.size() == sp.column_count(),
          Errc::length_mismatch, "profile_snapshot: inconsistent sizes");
  ProfileRecord rec;
  rec.input_active_pct = 100.0 * sparsity(input);
  rec.output_active_pct = 100.0 * sparsity(out.active_columns);
  rec.inhibition_radius = sp.inhibition_radius();
  const auto [mn, mx] = std::minmax_element(out.overlaps.begin(), out.overlaps.end());
  rec.overlap_min = *mn;
  rec.overlap_max = *mx;
  rec.overlap_mean = std::accumulate(out.overlaps.begin(), out.overlaps.end(), 0.0) /
                     static_cast<double>(out.overlaps.size());
  return rec;
}

/// Cycles `inputs` with learning until every input maps to the same active set on
/// two consecutive epochs. Returns the epoch (1-based) at which that happened, or 0
/// if `max_epochs` passed without stabilising.
inline std::size_t train_until_stable(SpatialPooler& sp, std::span<const SdrVector> inputs, std::size_t max_epochs) {
  std::vector<SdrVector> previous;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    std::vector<SdrVector> current;
    current.reserve(inputs.size());
    for (const auto& x : inputs) current.push_back(sp.step(x).active_columns);
    if (!previous.empty() && current == previous) return epoch;
    previous = std::move(current);
  }
  return 0;
}

}  // namespace htmvid
