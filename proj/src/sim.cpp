#include "uam/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "uam/errors.hpp"
#include "uam/rng.hpp"

namespace uam::sim {

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Pending: return "pending";
    case Phase::VerticalTakeoff: return "vertical_takeoff";
    case Phase::Enroute: return "enroute";
    case Phase::VerticalLanding: return "vertical_landing";
    case Phase::Done: return "done";
  }
  return "?";
}

const char* to_string(Action action) {
  switch (action) {
    case Action::Descend: return "descend";
    case Action::Maintain: return "maintain";
    case Action::Ascend: return "ascend";
  }
  return "?";
}

void SeparationConfig::validate() const {
  if (!(d_los_m > 0.0 && d_los_m < d_comm_m) || !std::isfinite(d_comm_m))
    throw ConfigError("separation: require 0 < d_los_m < d_comm_m");
}

std::size_t WorldState::slot(AircraftId id) const {
  auto it = std::lower_bound(aircraft.begin(), aircraft.end(), id,
                             [](const AircraftState& a, AircraftId v) { return a.id < v; });
  if (it == aircraft.end() || it->id != id) throw UnknownAircraft("unknown aircraft " + std::to_string(id));
  return static_cast<std::size_t>(it - aircraft.begin());
}

bool WorldState::terminal() const {
  if (step >= scenario().sim.max_episode_steps) return true;
  return std::all_of(aircraft.begin(), aircraft.end(), [](const AircraftState& a) { return a.phase == Phase::Done; });
}

std::vector<AircraftId> WorldState::enroute_ids() const {
  std::vector<AircraftId> out;
  for (const auto& ac : aircraft)
    if (ac.phase == Phase::Enroute) out.push_back(ac.id);
  return out;
}

std::size_t nearest_level(const std::vector<double>& levels, double altitude_ft) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (std::abs(levels[i] - altitude_ft) < std::abs(levels[best] - altitude_ft)) best = i;
  return best;
}

WorldState reset(std::shared_ptr<const airspace::NetworkIndex> index, std::uint64_t seed, SimOptions options) {
  options.separation.validate();
  if (!(options.departure_shift_s >= 0.0)) throw ConfigError("departure_shift_s must be non-negative");
  WorldState w;
  w.seed = seed;
  w.index = std::move(index);
  w.options = options;
  const auto& scn = w.index->scenario();
  const std::size_t n_levels = scn.network.altitude_levels_ft.size();

  for (std::size_t f = 0; f < scn.flights.size(); ++f) {
    const auto& flight = scn.flights[f];
    AircraftState ac;
    ac.id = flight.id;
    ac.od = w.index->flight_od(f);
    ac.takeoff_s = flight.takeoff_s;
    const auto route = w.index->route(ac.od);
    ac.corridor = route.front().corridor;
    ac.position = route.front().start;
    ac.ground_speed_mps = scn.sim.ground_speed_mps;
    ac.vertical_rate_ftpm = scn.sim.vertical_rate_ftpm;
    ac.level_seconds.assign(n_levels, 0.0);
    ac.climb_seconds.assign(n_levels, 0.0);
    ac.descent_seconds.assign(n_levels, 0.0);
    w.aircraft.push_back(std::move(ac));
  }
  std::sort(w.aircraft.begin(), w.aircraft.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  if (options.departure_shift_s > 0.0) {
    Rng rng(derive_seed(seed, 0xde9a));
    std::vector<double> shift(scn.network.vertiports.size());
    for (auto& s : shift) s = rng.uniform(0.0, options.departure_shift_s);
    for (auto& ac : w.aircraft) ac.takeoff_s += shift[w.index->route(ac.od).front().from];
  }

  for (const auto& z : scn.zones) w.zone_noise.emplace_back(z.ambient_db);
  w.occupancy_steps.assign(n_levels, 0);
  return w;
}

namespace {

void apply_action(AircraftState& ac, Action action, const std::vector<double>& levels) {
  ac.last_action = action;
  if (ac.changing) return;  // committed to the current change
  const std::size_t lvl = nearest_level(levels, ac.altitude_ft);
  if (action == Action::Ascend && lvl + 1 < levels.size()) {
    ac.target_altitude_ft = levels[lvl + 1];
    ac.changing = true;
    ac.initiated_ascent = true;
    ac.initiated_ascent_number = ac.ascent_count + 1;
  } else if (action == Action::Descend && lvl > 0) {
    ac.target_altitude_ft = levels[lvl - 1];
    ac.changing = true;
  }
}

void move_vertical(AircraftState& ac, double dt, const std::vector<double>& levels) {
  if (!ac.changing) {
    ac.level_seconds[nearest_level(levels, ac.altitude_ft)] += dt;
    return;
  }
  const bool climbing = ac.target_altitude_ft > ac.altitude_ft;
  if (climbing)
    ac.climb_seconds[nearest_level(levels, ac.target_altitude_ft)] += dt;
  else
    ac.descent_seconds[nearest_level(levels, ac.target_altitude_ft) + 1] += dt;

  const double dz = ac.vertical_rate_ftpm / 60.0 * dt;
  if (std::abs(ac.target_altitude_ft - ac.altitude_ft) <= dz + 1e-9) {
    ac.altitude_ft = ac.target_altitude_ft;
    ac.changing = false;
    if (climbing)
      ++ac.ascent_count;
    else
      ++ac.descent_count;
  } else {
    ac.altitude_ft += climbing ? dz : -dz;
  }
}

/// Returns true when the route end was reached.
bool move_horizontal(AircraftState& ac, double dt, std::span<const airspace::Leg> route) {
  ac.route_progress_m += ac.ground_speed_mps * dt;
  double leg_start = 0.0;
  for (std::size_t i = 0; i < route.size(); ++i) {
    const double leg_end = leg_start + route[i].length_m;
    if (ac.route_progress_m < leg_end || i + 1 == route.size()) {
      ac.leg = i;
      ac.corridor = route[i].corridor;
      ac.along_track_m = std::min(ac.route_progress_m - leg_start, route[i].length_m);
      ac.position = lerp(route[i].start, route[i].end, ac.along_track_m / route[i].length_m);
      return ac.route_progress_m >= leg_end && i + 1 == route.size();
    }
    leg_start = leg_end;
  }
  return true;
}

}  // namespace

void step(WorldState& w, const JointActions& actions) {
  if (w.terminal()) return;
  for (const auto& [id, a] : actions) (void)w.slot(id);
  for (const auto& ac : w.aircraft)
    if (ac.phase == Phase::Enroute && !actions.count(ac.id))
      throw MissingAction("no action for en-route aircraft " + std::to_string(ac.id));

  const auto& scn = w.scenario();
  const auto& levels = w.levels();
  const double dt = scn.sim.timestep_s;
  const std::int64_t next_step = w.step + 1;

  for (auto& ac : w.aircraft) {
    ac.initiated_ascent = false;
    ac.initiated_ascent_number = 0;
    const auto route = w.index->route(ac.od);

    // Noise is charged to the phase the aircraft spent this step in, so a leg
    // completing mid-step still bills its full duration to the vertiport.
    Phase flown = ac.phase;
    switch (ac.phase) {
      case Phase::Pending:
        if (ac.takeoff_s > w.time_s + 1e-9) break;
        ac.phase = Phase::VerticalTakeoff;
        ac.phase_timer_s = scn.sim.hover_duration_s;
        ac.position = route.front().start;
        [[fallthrough]];
      case Phase::VerticalTakeoff:
        flown = Phase::VerticalTakeoff;
        ac.phase_timer_s -= dt;
        if (ac.phase_timer_s <= 1e-9) {
          ac.phase = Phase::Enroute;
          ac.altitude_ft = ac.target_altitude_ft = levels.front();
          ac.changing = false;
          ac.last_action = Action::Maintain;
        }
        break;
      case Phase::Enroute: {
        apply_action(ac, actions.at(ac.id), levels);
        move_vertical(ac, dt, levels);
        if (move_horizontal(ac, dt, route)) {
          ac.phase = Phase::VerticalLanding;
          ac.phase_timer_s = scn.sim.hover_duration_s;
          ac.position = route.back().end;
          ac.arrived_step = next_step;
          ac.changing = false;
          ac.target_altitude_ft = ac.altitude_ft;
        }
        break;
      }
      case Phase::VerticalLanding:
        ac.phase_timer_s -= dt;
        if (ac.phase_timer_s <= 1e-9) ac.phase = Phase::Done;
        break;
      case Phase::Done:
        break;
    }

    if (flown == Phase::Enroute) {
      const std::size_t z = w.index->corridor_zone(ac.corridor);
      w.zone_noise[z].accumulate(noise::npd_sel(ac.altitude_ft, w.options.noise_condition), dt);
    } else if (flown == Phase::VerticalTakeoff || flown == Phase::VerticalLanding) {
      const std::size_t v = flown == Phase::VerticalTakeoff ? route.front().from : route.back().to;
      w.zone_noise[w.index->vertiport_zone(v)].accumulate(
          noise::npd_sel(w.options.vertical_leg_noise_distance_ft, w.options.noise_condition), dt);
    }
  }

  w.step = next_step;
  w.time_s = static_cast<double>(next_step) * dt;

  auto pairs = detect_los(w);
  for (const auto& p : pairs)
    if (!std::binary_search(w.active_los.begin(), w.active_los.end(), p))
      w.los_events.push_back({w.time_s, p.first, p.second});
  w.active_los = std::move(pairs);

  for (const auto& ac : w.aircraft)
    if (ac.phase == Phase::Enroute) ++w.occupancy_steps[nearest_level(levels, ac.altitude_ft)];
}

std::vector<AircraftId> neighbors(const WorldState& w, AircraftId id) {
  const AircraftState& own = w.get(id);
  if (!w.is_active_agent(own)) throw NotEnroute("aircraft " + std::to_string(id) + " is not en route");
  const double range = w.options.separation.d_comm_m;
  std::vector<AircraftId> out;
  for (const auto& other : w.aircraft) {
    if (other.id == id || other.phase != Phase::Enroute) continue;
    if (distance(own.position, other.position) > range) continue;
    if (!w.index->corridors_related(own.corridor, other.corridor)) continue;
    out.push_back(other.id);
  }
  return out;
}

std::vector<AircraftPair> detect_los(const WorldState& w) {
  const double d = w.options.separation.d_los_m;
  // Uniform grid with cell size d_los: candidates lie in the 3x3 block.
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
  auto key = [](std::int64_t ix, std::int64_t iy) { return ix * 73856093LL ^ iy * 19349663LL; };
  auto cell = [d](double v) { return static_cast<std::int64_t>(std::floor(v / d)); };
  for (std::size_t i = 0; i < w.aircraft.size(); ++i) {
    const auto& ac = w.aircraft[i];
    if (ac.phase != Phase::Enroute) continue;
    grid[key(cell(ac.position.x), cell(ac.position.y))].push_back(i);
  }
  std::vector<AircraftPair> out;
  for (std::size_t i = 0; i < w.aircraft.size(); ++i) {
    const auto& a = w.aircraft[i];
    if (a.phase != Phase::Enroute) continue;
    const auto cx = cell(a.position.x);
    const auto cy = cell(a.position.y);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = grid.find(key(cx + dx, cy + dy));
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (j <= i) continue;
          const auto& b = w.aircraft[j];
          if (cell(b.position.x) != cx + dx || cell(b.position.y) != cy + dy) continue;  // hash collision
          const double h = distance(a.position, b.position);
          const double v = feet_to_meters(a.altitude_ft - b.altitude_ft);
          if (std::sqrt(h * h + v * v) < d) out.emplace_back(a.id, b.id);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void write_trace_header(std::ostream& out) { out << "time,id,corridor,along_track_m,altitude_ft,action,in_los_flag\n"; }

void write_trace_rows(std::ostream& out, const WorldState& w) {
  const auto& corridors = w.index->network().corridors;
  const auto old_precision = out.precision(17);
  for (const auto& ac : w.aircraft) {
    if (ac.phase != Phase::Enroute) continue;
    const bool in_los = std::any_of(w.active_los.begin(), w.active_los.end(),
                                    [&](const AircraftPair& p) { return p.first == ac.id || p.second == ac.id; });
    out << w.time_s << ',' << ac.id << ',' << corridors[ac.corridor].id << ',' << ac.along_track_m << ','
        << ac.altitude_ft << ',' << to_string(ac.last_action) << ',' << (in_los ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace uam::sim
