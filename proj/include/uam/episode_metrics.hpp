#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uam/airspace.hpp"
#include "uam/energy.hpp"

namespace uam::sim {
class WorldState;
}

namespace uam::metrics {

struct ZoneNoise {
  std::string zone_id;
  airspace::ZoneKind kind = airspace::ZoneKind::Corridor;
  double ambient_db = 0.0;
  double energy_sum = 0.0;  // accumulated 10^(SEL/10) * seconds
  bool exposed = false;
  double cumulative_db = 0.0;  // meaningful only when exposed
  double increase_db = 0.0;    // meaningful only when exposed
};

/// Outcome of one episode.
struct EpisodeMetrics {
  std::int64_t episode_steps = 0;
  std::size_t los_event_count = 0;
  std::vector<ZoneNoise> zones;
  /// 10*log10 of the summed linear per-zone increases over exposed zones; 0
  /// when nothing was exposed.
  double network_noise_increase_db = 0.0;
  int total_altitude_changes = 0;
  int ascent_count_total = 0;
  std::vector<std::int64_t> occupancy_steps;  // en-route aircraft-steps per level
  std::vector<double> altitude_occupancy;     // normalized; empty without en-route steps
  std::vector<double> flight_energy_j;        // per departed flight, ascending id
  std::size_t flights_completed = 0;

  // Reward bookkeeping over every agent transition.
  std::size_t transitions = 0;
  double reward_sum = 0.0;
  double noise_reward_sum = 0.0;
  double sep_reward_sum = 0.0;
  double energy_reward_sum = 0.0;

  double mean_flight_energy_j() const;
};

/// Folds the world's counters into metrics. Reward sums are left at zero.
EpisodeMetrics collect_episode_metrics(const sim::WorldState& world, const energy::EnergyParams& params = {});

}  // namespace uam::metrics
