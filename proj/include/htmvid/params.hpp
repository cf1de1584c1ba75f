#pragma once

#include <cstdint>
#include <string>

#include "htmvid/error.hpp"

namespace htmvid {

/// Spatial pooler hyper-parameters. Defaults follow the R16 column of the
/// reference configuration (2048 columns, 64 synapses, min overlap 8, 40 winners).
struct SpParams {
  std::uint32_t columns = 2048;
  std::uint32_t synapses_per_column = 64;
  std::uint32_t input_size = 1920;
  std::uint32_t min_overlap = 8;
  std::uint32_t winners_set_size = 40;
  double perm_increment = 0.1;
  double perm_decrement = 0.1;
  double initial_perm = 0.21;
  double connected_perm = 0.2;
  double boost = 1.0;
  std::uint32_t initial_inhibition_radius = 80;
  std::uint64_t rng_seed = 0;
  // Optional duty-cycle boosting; 0 disables it and keeps `boost` constant.
  double boost_strength = 0.0;
  std::uint32_t duty_cycle_period = 1000;

  friend bool operator==(const SpParams&, const SpParams&) = default;
};

inline void validate(const SpParams& p) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  require(p.columns > 0, Errc::invalid_argument, "SpParams: columns must be positive");
  require(p.synapses_per_column > 0, Errc::invalid_argument, "SpParams: synapses_per_column must be positive");
  require(p.input_size > 0, Errc::invalid_argument, "SpParams: input_size must be positive");
  require(p.winners_set_size > 0, Errc::invalid_argument, "SpParams: winners_set_size must be positive");
  require(p.winners_set_size <= p.columns, Errc::invalid_argument, "SpParams: winners_set_size exceeds columns");
  require(p.min_overlap <= p.synapses_per_column, Errc::invalid_argument,
          "SpParams: min_overlap exceeds synapses_per_column");
  require(p.synapses_per_column <= p.input_size, Errc::invalid_argument,
          "SpParams: synapses_per_column (" + std::to_string(p.synapses_per_column) + ") exceeds input_size (" +
              std::to_string(p.input_size) + ")");
  require(unit(p.perm_increment) && unit(p.perm_decrement) && unit(p.initial_perm) && unit(p.connected_perm),
          Errc::invalid_argument, "SpParams: permanence constants must lie in [0,1]");
  require(p.boost > 0.0, Errc::invalid_argument, "SpParams: boost must be positive");
  require(p.initial_inhibition_radius > 0, Errc::invalid_argument, "SpParams: initial_inhibition_radius must be positive");
  require(p.boost_strength >= 0.0, Errc::invalid_argument, "SpParams: boost_strength must be non-negative");
  require(p.duty_cycle_period > 0, Errc::invalid_argument, "SpParams: duty_cycle_period must be positive");
}

}  // namespace htmvid
