#pragma once

// Scenario builders, fuzzed worlds and brute-force oracles shared by the unit
// and acceptance tests. The oracles are written independently of the library
// code they check.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "uam/airspace.hpp"
#include "uam/env.hpp"
#include "uam/rng.hpp"
#include "uam/sim.hpp"

namespace uam::testing {

inline std::filesystem::path data_dir() { return UAM_TEST_DATA_DIR; }

inline std::shared_ptr<const airspace::NetworkIndex> make_index(airspace::Scenario s) {
  airspace::fill_default_zones(s);
  return std::make_shared<const airspace::NetworkIndex>(std::move(s));
}

/// Two vertiports `length_m` apart joined by one bidirectional corridor, with
/// O-D pairs AB and BA. Flights alternate AB, BA with the given takeoff times.
inline airspace::Scenario line_scenario(double length_m, const std::vector<double>& takeoffs_ab,
                                        const std::vector<double>& takeoffs_ba = {}) {
  airspace::Scenario s;
  s.network.vertiports = {{"VA", {0.0, 0.0}}, {"VB", {length_m, 0.0}}};
  s.network.corridors = {{"CAB", "VA", "VB", airspace::CorridorDirection::Bidirectional}};
  s.network.od_pairs = {{"AB", "VA", "VB", {"CAB"}}, {"BA", "VB", "VA", {"CAB"}}};
  airspace::AircraftId id = 0;
  for (double t : takeoffs_ab) s.flights.push_back({id++, "AB", t});
  for (double t : takeoffs_ba) s.flights.push_back({id++, "BA", t});
  s.sim.max_episode_steps = 3000;
  airspace::fill_default_zones(s);
  return s;
}

/// Reference-scale generated network (10 vertiports, 19 corridors) with `n_flights` flights.
inline airspace::Scenario generated_scenario(std::uint64_t seed, std::size_t n_flights = 136) {
  airspace::NetworkGenOptions net;
  net.seed = seed;
  airspace::ScenarioGenOptions gen;
  gen.seed = seed;
  gen.n_flights = n_flights;
  auto s = airspace::generate_scenario(airspace::generate_network(net), gen);
  airspace::fill_default_zones(s);
  return s;
}

/// Puts `n` aircraft of a freshly reset world en route at random positions
/// along random corridors. About a third are placed next to an earlier
/// aircraft so that close pairs and LOS are common. Altitudes are either a
/// flight level or a point inside a transition.
inline sim::WorldState fuzz_world(const std::shared_ptr<const airspace::NetworkIndex>& index, Rng& rng,
                                  std::size_t n) {
  auto w = sim::reset(index, rng.next_u64());
  const auto& levels = index->network().altitude_levels_ft;
  const std::size_t nc = index->network().corridors.size();
  n = std::min(n, w.aircraft.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto& ac = w.aircraft[i];
    ac.phase = sim::Phase::Enroute;
    const bool cluster = i > 0 && rng.uniform() < 0.35;
    if (cluster) {
      const auto& near = w.aircraft[static_cast<std::size_t>(rng.below(i))];
      ac.corridor = near.corridor;
      const auto [a, b] = index->corridor_segment(ac.corridor);
      const double len = distance(a, b);
      ac.along_track_m = std::clamp(near.along_track_m + rng.uniform(-300.0, 300.0), 0.0, len);
      ac.position = lerp(a, b, ac.along_track_m / len);
    } else {
      ac.corridor = static_cast<std::size_t>(rng.below(nc));
      const auto [a, b] = index->corridor_segment(ac.corridor);
      const double len = distance(a, b);
      ac.along_track_m = rng.uniform(0.0, len);
      ac.position = lerp(a, b, ac.along_track_m / len);
    }
    const std::size_t lvl = static_cast<std::size_t>(rng.below(levels.size()));
    ac.altitude_ft = ac.target_altitude_ft = levels[lvl];
    if (rng.uniform() < 0.3 && lvl + 1 < levels.size()) {
      ac.target_altitude_ft = levels[lvl + 1];
      ac.altitude_ft = rng.uniform(levels[lvl], levels[lvl + 1]);
      ac.changing = ac.altitude_ft != ac.target_altitude_ft;
    }
    ac.last_action = static_cast<sim::Action>(rng.below(3));
    ac.ascent_count = static_cast<int>(rng.below(9));
    if (ac.last_action == sim::Action::Ascend && ac.changing && rng.uniform() < 0.5) {
      ac.initiated_ascent = true;
      ac.initiated_ascent_number = ac.ascent_count + 1;
    }
  }
  return w;
}

/// All-pairs 3-D check over en-route aircraft.
inline std::vector<sim::AircraftPair> brute_force_los(const sim::WorldState& w) {
  std::vector<sim::AircraftPair> out;
  for (std::size_t i = 0; i < w.aircraft.size(); ++i) {
    for (std::size_t j = i + 1; j < w.aircraft.size(); ++j) {
      const auto& a = w.aircraft[i];
      const auto& b = w.aircraft[j];
      if (a.phase != sim::Phase::Enroute || b.phase != sim::Phase::Enroute) continue;
      const double dx = a.position.x - b.position.x;
      const double dy = a.position.y - b.position.y;
      const double dz = (a.altitude_ft - b.altitude_ft) * 0.3048;
      if (std::sqrt(dx * dx + dy * dy + dz * dz) < w.options.separation.d_los_m)
        out.emplace_back(std::min(a.id, b.id), std::max(a.id, b.id));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Parametric segment intersection in long double, shared endpoints included.
inline bool oracle_segments_meet(Vec2 p, Vec2 q, Vec2 r, Vec2 s) {
  auto same = [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; };
  if (same(p, r) || same(p, s) || same(q, r) || same(q, s)) return true;
  using ld = long double;
  const ld px = p.x, py = p.y, qx = q.x, qy = q.y, rx = r.x, ry = r.y, sx = s.x, sy = s.y;
  const ld dx1 = qx - px, dy1 = qy - py, dx2 = sx - rx, dy2 = sy - ry;
  const ld denom = dx1 * dy2 - dy1 * dx2;
  const ld ex = rx - px, ey = ry - py;
  if (denom == 0) {
    if (ex * dy1 - ey * dx1 != 0) return false;  // parallel, not collinear
    const ld len2 = dx1 * dx1 + dy1 * dy1;
    const ld t0 = (ex * dx1 + ey * dy1) / len2;
    const ld t1 = ((sx - px) * dx1 + (sy - py) * dy1) / len2;
    return std::max(std::min(t0, t1), ld(0)) <= std::min(std::max(t0, t1), ld(1));
  }
  const ld t = (ex * dy2 - ey * dx2) / denom;
  const ld u = (ex * dy1 - ey * dx1) / denom;
  return t >= 0 && t <= 1 && u >= 0 && u <= 1;
}

/// Congestion recomputed from scratch over every aircraft: same or crossing
/// corridor, horizontal range, and vertical separation below d_LOS.
inline double brute_force_congestion(const sim::WorldState& w, sim::AircraftId id) {
  const auto& own = w.get(id);
  const auto& net = w.index->network();
  const auto& sep = w.options.separation;
  double c = 0.0;
  for (const auto& other : w.aircraft) {
    if (other.id == id || other.phase != sim::Phase::Enroute) continue;
    const auto [a1, b1] = w.index->corridor_segment(own.corridor);
    const auto [a2, b2] = w.index->corridor_segment(other.corridor);
    const auto& c1 = net.corridors[own.corridor];
    const auto& c2 = net.corridors[other.corridor];
    const bool shared = c1.from == c2.from || c1.from == c2.to || c1.to == c2.from || c1.to == c2.to;
    if (own.corridor != other.corridor && !shared && !oracle_segments_meet(a1, b1, a2, b2)) continue;
    const double d = std::hypot(own.position.x - other.position.x, own.position.y - other.position.y);
    if (d > sep.d_comm_m) continue;
    if (std::abs((own.altitude_ft - other.altitude_ft) * 0.3048) >= sep.d_los_m) continue;
    if (d < sep.d_los_m)
      c += 1.0;
    else
      c += (sep.d_comm_m - d) / (sep.d_comm_m - sep.d_los_m);
  }
  return c;
}

/// Random observation with `n_neighbors` neighbors; features in range.
inline env::Observation random_observation(Rng& rng, std::size_t n_neighbors) {
  env::Observation o;
  o.ownship[0] = rng.uniform();
  o.ownship[1] = rng.uniform() < 0.3 ? 1.0 : 0.0;
  o.ownship[2] = rng.uniform();
  o.ownship[3 + rng.below(3)] = 1.0;
  o.ownship[6] = rng.uniform();
  for (std::size_t k = 0; k < n_neighbors; ++k) {
    env::NeighborFeatures f{};
    f[0] = rng.uniform(-1.0, 1.0);
    f[1] = rng.uniform();
    f[2 + rng.below(3)] = 1.0;
    o.neighbors.push_back(f);
  }
  return o;
}

}  // namespace uam::testing
