#pragma once

// Discrete-time kinematic world: route following at constant ground speed,
// committed altitude changes between flight levels, vertical takeoff/landing
// legs, neighbor queries and loss-of-separation detection.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "uam/airspace.hpp"
#include "uam/noise.hpp"

namespace uam::sim {

using airspace::AircraftId;

enum class Phase { Pending, VerticalTakeoff, Enroute, VerticalLanding, Done };

enum class Action : int { Descend = 0, Maintain = 1, Ascend = 2 };
inline constexpr int kNumActions = 3;

const char* to_string(Phase phase);
const char* to_string(Action action);

struct SeparationConfig {
  double d_los_m = 150.0;
  double d_comm_m = 2500.0;

  /// Throws ConfigError unless 0 < d_los < d_comm.
  void validate() const;
};

struct AircraftState {
  AircraftId id = 0;
  std::size_t od = 0;
  double takeoff_s = 0.0;
  Phase phase = Phase::Pending;

  Vec2 position;
  std::size_t leg = 0;          // index into the route
  std::size_t corridor = 0;     // corridor of the current leg
  double along_track_m = 0.0;   // progress within the current corridor
  double route_progress_m = 0.0;

  double altitude_ft = 0.0;
  double target_altitude_ft = 0.0;
  bool changing = false;
  Action last_action = Action::Maintain;
  int ascent_count = 0;   // completed climbs
  int descent_count = 0;  // completed descents

  double ground_speed_mps = 0.0;
  double vertical_rate_ftpm = 0.0;
  double phase_timer_s = 0.0;

  // Events of the most recent step.
  bool initiated_ascent = false;
  int initiated_ascent_number = 0;  // ascent_count the initiated climb will produce
  std::int64_t arrived_step = -1;

  // Seconds spent per flight level: level flight, climbing toward the level,
  // and descending from the level.
  std::vector<double> level_seconds;
  std::vector<double> climb_seconds;
  std::vector<double> descent_seconds;

  bool airborne() const noexcept {
    return phase == Phase::VerticalTakeoff || phase == Phase::Enroute || phase == Phase::VerticalLanding;
  }
};

struct LosEvent {
  double time_s = 0.0;
  AircraftId a = 0;
  AircraftId b = 0;
};

using AircraftPair = std::pair<AircraftId, AircraftId>;  // first < second

struct SimOptions {
  SeparationConfig separation{};
  noise::NpdCondition noise_condition = noise::default_condition();
  /// Slant distance for noise during vertical takeoff/landing legs.
  double vertical_leg_noise_distance_ft = 250.0;
  /// Each origin's departure schedule is shifted by a draw in
  /// [0, departure_shift_s) from the episode seed. Same-origin spacing is kept.
  double departure_shift_s = 0.0;
};

class WorldState {
 public:
  double time_s = 0.0;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::vector<AircraftState> aircraft;  // sorted by id

  std::shared_ptr<const airspace::NetworkIndex> index;
  SimOptions options;

  std::vector<noise::ZoneNoiseAccumulator> zone_noise;
  std::vector<LosEvent> los_events;
  std::vector<AircraftPair> active_los;          // sorted
  std::vector<std::int64_t> occupancy_steps;     // en-route aircraft-steps per level

  const airspace::Scenario& scenario() const { return index->scenario(); }
  const std::vector<double>& levels() const { return index->network().altitude_levels_ft; }

  /// Position in `aircraft`; throws UnknownAircraft.
  std::size_t slot(AircraftId id) const;
  const AircraftState& get(AircraftId id) const { return aircraft[slot(id)]; }

  /// All aircraft done, or the step budget exhausted.
  bool terminal() const;

  /// En route, or landed during the most recent step (the step whose action
  /// produced the arrival still earns a reward).
  bool is_active_agent(const AircraftState& ac) const {
    return ac.phase == Phase::Enroute || (ac.phase == Phase::VerticalLanding && ac.arrived_step == step);
  }

  std::vector<AircraftId> enroute_ids() const;
};

using JointActions = std::map<AircraftId, Action>;

WorldState reset(std::shared_ptr<const airspace::NetworkIndex> index, std::uint64_t seed, SimOptions options = {});

/// Advances one timestep. Every en-route aircraft needs an action
/// (MissingAction); ids not in the world raise UnknownAircraft. Actions for
/// aircraft in other phases are ignored.
void step(WorldState& world, const JointActions& actions);

/// Index of the flight level nearest to `altitude_ft`.
std::size_t nearest_level(const std::vector<double>& levels, double altitude_ft);

/// En-route aircraft within horizontal d_comm whose corridor is the ownship's
/// corridor or intersects it, ascending by id. Throws NotEnroute.
std::vector<AircraftId> neighbors(const WorldState& world, AircraftId id);

/// Unordered pairs of en-route aircraft closer than d_los in 3-D, sorted.
std::vector<AircraftPair> detect_los(const WorldState& world);

/// Per-step trace of en-route aircraft.
void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, const WorldState& world);

}  // namespace uam::sim
