#pragma once

// Corridor-network data model, scenario file format, synthetic generation and
// spatial queries.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uam/geometry.hpp"

namespace uam::airspace {

inline const std::vector<double> kDefaultAltitudeLevelsFt = {1000.0, 1500.0, 2000.0, 2500.0, 3000.0};

inline constexpr double kDefaultAmbientDb = 60.0;
inline constexpr double kDefaultCorridorHalfWidthM = 250.0;
inline constexpr double kDefaultVertiportRadiusM = 300.0;
inline constexpr double kMinAmbientDb = 30.0;
inline constexpr double kMaxAmbientDb = 90.0;

struct Vertiport {
  std::string id;
  Vec2 position;  // meters
  friend bool operator==(const Vertiport&, const Vertiport&) = default;
};

enum class CorridorDirection { Bidirectional, Forward };

/// A straight corridor between two vertiports. `Forward` corridors may only be
/// flown from `from` to `to`.
struct Corridor {
  std::string id;
  std::string from;
  std::string to;
  CorridorDirection direction = CorridorDirection::Bidirectional;
  friend bool operator==(const Corridor&, const Corridor&) = default;
};

struct OdPair {
  std::string id;
  std::string origin;
  std::string destination;
  std::vector<std::string> corridors;  // flown in order
  friend bool operator==(const OdPair&, const OdPair&) = default;
};

struct AirspaceNetwork {
  std::vector<Vertiport> vertiports;
  std::vector<Corridor> corridors;
  std::vector<double> altitude_levels_ft = kDefaultAltitudeLevelsFt;
  std::vector<OdPair> od_pairs;

  std::optional<std::size_t> find_vertiport(std::string_view id) const;
  std::optional<std::size_t> find_corridor(std::string_view id) const;
  std::optional<std::size_t> find_od_pair(std::string_view id) const;

  /// Two links per bidirectional corridor, one per forward-only corridor.
  std::size_t directional_link_count() const;
  double corridor_length_m(std::size_t corridor) const;

  friend bool operator==(const AirspaceNetwork&, const AirspaceNetwork&) = default;
};

enum class ZoneKind { Corridor, Vertiport };

/// Ground area receiving noise. A corridor zone is the corridor segment
/// buffered by `extent_m` (lateral half-width); a vertiport zone is a disc of
/// radius `extent_m`.
struct Zone {
  std::string id;
  ZoneKind kind = ZoneKind::Corridor;
  std::string owner;  // corridor or vertiport id
  double extent_m = kDefaultCorridorHalfWidthM;
  double ambient_db = kDefaultAmbientDb;
  friend bool operator==(const Zone&, const Zone&) = default;
};

using AircraftId = std::uint32_t;

struct Flight {
  AircraftId id = 0;
  std::string od;
  double takeoff_s = 0.0;
  friend bool operator==(const Flight&, const Flight&) = default;
};

struct SimSettings {
  double timestep_s = 1.0;
  std::int64_t max_episode_steps = 3000;
  std::uint64_t seed = 0;
  double headway_s = 60.0;
  double ground_speed_mps = 67.0;
  double vertical_rate_ftpm = 1000.0;
  double hover_duration_s = 30.0;
  friend bool operator==(const SimSettings&, const SimSettings&) = default;
};

struct Scenario {
  AirspaceNetwork network;
  std::vector<Zone> zones;
  std::vector<Flight> flights;
  SimSettings sim;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// ---- serialization -------------------------------------------------------

/// Parses and validates. Throws ParseError or ValidationError.
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& scenario);

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// Checks every invariant; throws ValidationError naming the field.
void validate(const Scenario& scenario);
void validate(const AirspaceNetwork& network);

/// Adds a default zone for every corridor and vertiport lacking one.
void fill_default_zones(Scenario& scenario);

// ---- generation ----------------------------------------------------------

struct NetworkGenOptions {
  std::size_t n_vertiports = 10;
  std::size_t n_corridors = 19;
  std::size_t n_od_pairs = 28;
  double region_extent_m = 20000.0;
  std::uint64_t seed = 7;
  double min_corridor_m = 2000.0;
  double max_corridor_m = 15000.0;
};

/// Builds a connected network of bidirectional corridors. Deterministic in the
/// options. Throws InfeasibleTopology after bounded retries.
AirspaceNetwork generate_network(const NetworkGenOptions& options);

struct ScenarioGenOptions {
  std::size_t n_flights = 136;
  std::uint64_t seed = 7;
  SimSettings sim{};
};

/// Assigns flights round-robin over the O-D pairs with per-origin departure
/// slots spaced by the headway.
Scenario generate_scenario(const AirspaceNetwork& network, const ScenarioGenOptions& options);

// ---- compiled index and queries -----------------------------------------

/// One corridor traversal on a route, oriented in the direction of flight.
struct Leg {
  std::size_t corridor = 0;
  std::size_t from = 0;  // vertiport index
  std::size_t to = 0;
  Vec2 start;
  Vec2 end;
  double length_m = 0.0;
};

/// Index-based view of a validated scenario, immutable and shareable.
class NetworkIndex {
 public:
  explicit NetworkIndex(Scenario scenario);

  const Scenario& scenario() const noexcept { return scenario_; }
  const AirspaceNetwork& network() const noexcept { return scenario_.network; }

  std::span<const Leg> route(std::size_t od) const { return routes_.at(od); }
  double route_length_m(std::size_t od) const { return route_lengths_.at(od); }
  std::size_t flight_od(std::size_t flight) const { return flight_od_.at(flight); }

  std::size_t corridor_zone(std::size_t corridor) const { return corridor_zone_.at(corridor); }
  std::size_t vertiport_zone(std::size_t vertiport) const { return vertiport_zone_.at(vertiport); }
  Vec2 vertiport_position(std::size_t v) const { return scenario_.network.vertiports[v].position; }
  std::pair<Vec2, Vec2> corridor_segment(std::size_t corridor) const;

  /// True when the corridors are the same or their segments touch.
  bool corridors_related(std::size_t a, std::size_t b) const {
    return related_[a * n_corridors_ + b] != 0;
  }

 private:
  Scenario scenario_;
  std::size_t n_corridors_ = 0;
  std::vector<std::vector<Leg>> routes_;
  std::vector<double> route_lengths_;
  std::vector<std::size_t> flight_od_;
  std::vector<std::size_t> corridor_zone_;
  std::vector<std::size_t> vertiport_zone_;
  std::vector<unsigned char> related_;
};

/// Position plus optional phase context. During takeoff/landing the vertiport
/// is given; en route the current corridor is given.
struct ZoneQuery {
  Vec2 position;
  std::optional<std::size_t> corridor;
  std::optional<std::size_t> vertiport;
};

/// Zone index for the query. Throws NoZone when the position lies outside the
/// claimed zone or, without context, outside every zone.
std::size_t zone_of(const ZoneQuery& query, const NetworkIndex& index);

/// For each corridor, the sorted indices of corridors whose segments intersect
/// it (shared endpoints included, self excluded).
std::vector<std::vector<std::size_t>> corridor_intersections(const AirspaceNetwork& network);

}  // namespace uam::airspace
