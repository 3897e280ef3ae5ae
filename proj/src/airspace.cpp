#include "uam/airspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "uam/errors.hpp"
#include "uam/rng.hpp"

namespace uam::airspace {

using nlohmann::json;

namespace {

template <typename T>
std::optional<std::size_t> find_by_id(const std::vector<T>& items, std::string_view id) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id == id) return i;
  }
  return std::nullopt;
}

std::string idx(std::string_view base, std::size_t i) {
  return std::string(base) + "[" + std::to_string(i) + "]";
}

const char* to_string(CorridorDirection d) {
  return d == CorridorDirection::Forward ? "forward" : "bidirectional";
}

const char* to_string(ZoneKind k) { return k == ZoneKind::Vertiport ? "vertiport" : "corridor"; }

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::optional<std::size_t> AirspaceNetwork::find_vertiport(std::string_view id) const {
  return find_by_id(vertiports, id);
}

std::optional<std::size_t> AirspaceNetwork::find_corridor(std::string_view id) const {
  return find_by_id(corridors, id);
}

std::optional<std::size_t> AirspaceNetwork::find_od_pair(std::string_view id) const {
  return find_by_id(od_pairs, id);
}

std::size_t AirspaceNetwork::directional_link_count() const {
  std::size_t n = 0;
  for (const auto& c : corridors) n += c.direction == CorridorDirection::Bidirectional ? 2 : 1;
  return n;
}

double AirspaceNetwork::corridor_length_m(std::size_t corridor) const {
  const auto& c = corridors.at(corridor);
  return distance(vertiports[*find_vertiport(c.from)].position,
                  vertiports[*find_vertiport(c.to)].position);
}

// ---- validation ------------------------------------------------------------

void validate(const AirspaceNetwork& net) {
  const auto& levels = net.altitude_levels_ft;
  if (levels.empty()) throw ValidationError("network.altitude_levels_ft", "must not be empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!finite(levels[i]) || levels[i] <= 0.0)
      throw ValidationError(idx("network.altitude_levels_ft", i), "must be finite and positive");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw ValidationError(idx("network.altitude_levels_ft", i), "levels must be strictly increasing");
  }

  std::set<std::string> seen;
  for (std::size_t i = 0; i < net.vertiports.size(); ++i) {
    const auto& v = net.vertiports[i];
    if (v.id.empty() || !seen.insert(v.id).second)
      throw ValidationError(idx("network.vertiports", i) + ".id", "missing or duplicate id '" + v.id + "'");
    if (!finite(v.position.x) || !finite(v.position.y))
      throw ValidationError(idx("network.vertiports", i) + ".position", "must be finite");
  }

  seen.clear();
  for (std::size_t i = 0; i < net.corridors.size(); ++i) {
    const auto& c = net.corridors[i];
    const std::string f = idx("network.corridors", i);
    if (c.id.empty() || !seen.insert(c.id).second)
      throw ValidationError(f + ".id", "missing or duplicate id '" + c.id + "'");
    if (!net.find_vertiport(c.from)) throw ValidationError(f + ".from", "unknown vertiport '" + c.from + "'");
    if (!net.find_vertiport(c.to)) throw ValidationError(f + ".to", "unknown vertiport '" + c.to + "'");
    if (c.from == c.to) throw ValidationError(f + ".to", "corridor endpoints must differ");
    if (net.corridor_length_m(i) <= 0.0) throw ValidationError(f, "corridor has zero length");
  }

  seen.clear();
  for (std::size_t i = 0; i < net.od_pairs.size(); ++i) {
    const auto& od = net.od_pairs[i];
    const std::string f = idx("network.od_pairs", i);
    if (od.id.empty() || !seen.insert(od.id).second)
      throw ValidationError(f + ".id", "missing or duplicate id '" + od.id + "'");
    if (!net.find_vertiport(od.origin)) throw ValidationError(f + ".origin", "unknown vertiport '" + od.origin + "'");
    if (!net.find_vertiport(od.destination))
      throw ValidationError(f + ".destination", "unknown vertiport '" + od.destination + "'");
    if (od.origin == od.destination) throw ValidationError(f + ".destination", "origin and destination must differ");
    if (od.corridors.empty()) throw ValidationError(f + ".corridors", "route must not be empty");
    std::string at = od.origin;
    for (std::size_t k = 0; k < od.corridors.size(); ++k) {
      const auto ci = net.find_corridor(od.corridors[k]);
      if (!ci) throw ValidationError(idx(f + ".corridors", k), "unknown corridor '" + od.corridors[k] + "'");
      const auto& c = net.corridors[*ci];
      if (c.from == at) {
        at = c.to;
      } else if (c.direction == CorridorDirection::Bidirectional && c.to == at) {
        at = c.from;
      } else {
        throw ValidationError(idx(f + ".corridors", k), "corridor '" + c.id + "' is not flyable from '" + at + "'");
      }
    }
    if (at != od.destination) throw ValidationError(f + ".corridors", "route ends at '" + at + "', not at destination");
  }
}

void validate(const Scenario& s) {
  validate(s.network);
  const auto& net = s.network;

  const auto& sim = s.sim;
  if (!(sim.timestep_s > 0.0) || !finite(sim.timestep_s)) throw ValidationError("sim.timestep_s", "must be positive");
  if (sim.max_episode_steps < 0) throw ValidationError("sim.max_episode_steps", "must be non-negative");
  if (!(sim.headway_s >= 0.0) || !finite(sim.headway_s)) throw ValidationError("sim.headway_s", "must be non-negative");
  if (!(sim.ground_speed_mps > 0.0) || !finite(sim.ground_speed_mps))
    throw ValidationError("sim.ground_speed_mps", "must be positive");
  if (!(sim.vertical_rate_ftpm > 0.0) || !finite(sim.vertical_rate_ftpm))
    throw ValidationError("sim.vertical_rate_ftpm", "must be positive");
  if (!(sim.hover_duration_s >= 0.0) || !finite(sim.hover_duration_s))
    throw ValidationError("sim.hover_duration_s", "must be non-negative");

  std::set<std::string> seen;
  std::vector<int> corridor_owned(net.corridors.size(), 0);
  std::vector<int> vertiport_owned(net.vertiports.size(), 0);
  for (std::size_t i = 0; i < s.zones.size(); ++i) {
    const auto& z = s.zones[i];
    const std::string f = idx("zones", i);
    if (z.id.empty() || !seen.insert(z.id).second) throw ValidationError(f + ".id", "missing or duplicate id '" + z.id + "'");
    if (!finite(z.ambient_db) || z.ambient_db < kMinAmbientDb || z.ambient_db > kMaxAmbientDb)
      throw ValidationError(f + ".ambient_db", "must lie within [30, 90] dB");
    if (!(z.extent_m > 0.0) || !finite(z.extent_m)) throw ValidationError(f + ".extent_m", "must be positive");
    if (z.kind == ZoneKind::Corridor) {
      const auto c = net.find_corridor(z.owner);
      if (!c) throw ValidationError(f + ".owner", "unknown corridor '" + z.owner + "'");
      if (++corridor_owned[*c] > 1) throw ValidationError(f + ".owner", "corridor '" + z.owner + "' already has a zone");
    } else {
      const auto v = net.find_vertiport(z.owner);
      if (!v) throw ValidationError(f + ".owner", "unknown vertiport '" + z.owner + "'");
      if (++vertiport_owned[*v] > 1) throw ValidationError(f + ".owner", "vertiport '" + z.owner + "' already has a zone");
    }
  }
  for (std::size_t c = 0; c < corridor_owned.size(); ++c)
    if (corridor_owned[c] != 1) throw ValidationError("zones", "corridor '" + net.corridors[c].id + "' has no zone");
  for (std::size_t v = 0; v < vertiport_owned.size(); ++v)
    if (vertiport_owned[v] != 1) throw ValidationError("zones", "vertiport '" + net.vertiports[v].id + "' has no zone");

  std::set<AircraftId> ids;
  std::map<std::string, std::vector<std::pair<double, std::size_t>>> by_origin;
  for (std::size_t i = 0; i < s.flights.size(); ++i) {
    const auto& fl = s.flights[i];
    const std::string f = idx("flights", i);
    if (!ids.insert(fl.id).second) throw ValidationError(f + ".id", "duplicate aircraft id " + std::to_string(fl.id));
    const auto od = net.find_od_pair(fl.od);
    if (!od) throw ValidationError(f + ".od", "unknown O-D pair '" + fl.od + "'");
    if (!finite(fl.takeoff_s) || fl.takeoff_s < 0.0) throw ValidationError(f + ".takeoff_s", "must be finite and >= 0");
    by_origin[net.od_pairs[*od].origin].emplace_back(fl.takeoff_s, i);
  }
  for (auto& [origin, slots] : by_origin) {
    std::sort(slots.begin(), slots.end());
    for (std::size_t k = 1; k < slots.size(); ++k) {
      if (slots[k].first - slots[k - 1].first < sim.headway_s - 1e-9) {
        std::ostringstream msg;
        msg << "departs " << (slots[k].first - slots[k - 1].first) << " s after another flight from '" << origin
            << "' (headway " << sim.headway_s << " s)";
        throw ValidationError(idx("flights", slots[k].second) + ".takeoff_s", msg.str());
      }
    }
  }
}

void fill_default_zones(Scenario& s) {
  const auto& net = s.network;
  std::set<std::string> ids;
  std::set<std::string> corridor_owners, vertiport_owners;
  for (const auto& z : s.zones) {
    ids.insert(z.id);
    (z.kind == ZoneKind::Corridor ? corridor_owners : vertiport_owners).insert(z.owner);
  }
  auto fresh_id = [&](const std::string& base) {
    std::string id = base;
    for (int k = 1; ids.count(id); ++k) id = base + "_" + std::to_string(k);
    ids.insert(id);
    return id;
  };
  for (const auto& c : net.corridors) {
    if (!corridor_owners.count(c.id))
      s.zones.push_back({fresh_id("Z_" + c.id), ZoneKind::Corridor, c.id, kDefaultCorridorHalfWidthM, kDefaultAmbientDb});
  }
  for (const auto& v : net.vertiports) {
    if (!vertiport_owners.count(v.id))
      s.zones.push_back({fresh_id("Z_" + v.id), ZoneKind::Vertiport, v.id, kDefaultVertiportRadiusM, kDefaultAmbientDb});
  }
}

// ---- JSON ------------------------------------------------------------------

json scenario_to_json(const Scenario& s) {
  json net;
  net["vertiports"] = json::array();
  for (const auto& v : s.network.vertiports)
    net["vertiports"].push_back({{"id", v.id}, {"x_m", v.position.x}, {"y_m", v.position.y}});
  net["corridors"] = json::array();
  for (const auto& c : s.network.corridors)
    net["corridors"].push_back({{"id", c.id}, {"from", c.from}, {"to", c.to}, {"direction", to_string(c.direction)}});
  net["altitude_levels_ft"] = s.network.altitude_levels_ft;
  net["od_pairs"] = json::array();
  for (const auto& od : s.network.od_pairs)
    net["od_pairs"].push_back(
        {{"id", od.id}, {"origin", od.origin}, {"destination", od.destination}, {"corridors", od.corridors}});

  json zones = json::array();
  for (const auto& z : s.zones)
    zones.push_back({{"id", z.id},
                     {"kind", to_string(z.kind)},
                     {"owner", z.owner},
                     {"extent_m", z.extent_m},
                     {"ambient_db", z.ambient_db}});

  json flights = json::array();
  for (const auto& f : s.flights) flights.push_back({{"id", f.id}, {"od", f.od}, {"takeoff_s", f.takeoff_s}});

  const auto& sim = s.sim;
  json jsim = {{"timestep_s", sim.timestep_s},
               {"max_episode_steps", sim.max_episode_steps},
               {"seed", sim.seed},
               {"headway_s", sim.headway_s},
               {"ground_speed_mps", sim.ground_speed_mps},
               {"vertical_rate_ftpm", sim.vertical_rate_ftpm},
               {"hover_duration_s", sim.hover_duration_s}};

  return {{"format", "uam-scenario"}, {"version", 1}, {"network", net}, {"zones", zones}, {"flights", flights},
          {"sim", jsim}};
}

Scenario scenario_from_json(const json& doc) {
  Scenario s;
  try {
    if (!doc.is_object()) throw ParseError("scenario document must be a JSON object");
    for (const char* key : {"network", "flights"})
      if (!doc.contains(key)) throw ParseError(std::string("missing top-level key '") + key + "'");

    const json& net = doc.at("network");
    for (const auto& v : net.at("vertiports"))
      s.network.vertiports.push_back({v.at("id").get<std::string>(), {v.at("x_m").get<double>(), v.at("y_m").get<double>()}});
    for (const auto& c : net.at("corridors")) {
      Corridor cor{c.at("id").get<std::string>(), c.at("from").get<std::string>(), c.at("to").get<std::string>(),
                   CorridorDirection::Bidirectional};
      const std::string dir = c.value("direction", std::string("bidirectional"));
      if (dir == "forward") {
        cor.direction = CorridorDirection::Forward;
      } else if (dir != "bidirectional") {
        throw ParseError("corridor '" + cor.id + "': unknown direction '" + dir + "'");
      }
      s.network.corridors.push_back(std::move(cor));
    }
    if (net.contains("altitude_levels_ft"))
      s.network.altitude_levels_ft = net.at("altitude_levels_ft").get<std::vector<double>>();
    for (const auto& od : net.at("od_pairs"))
      s.network.od_pairs.push_back({od.at("id").get<std::string>(), od.at("origin").get<std::string>(),
                                    od.at("destination").get<std::string>(),
                                    od.at("corridors").get<std::vector<std::string>>()});

    if (doc.contains("zones")) {
      for (const auto& z : doc.at("zones")) {
        Zone zone;
        zone.id = z.at("id").get<std::string>();
        const std::string kind = z.at("kind").get<std::string>();
        if (kind == "corridor") {
          zone.kind = ZoneKind::Corridor;
          zone.extent_m = kDefaultCorridorHalfWidthM;
        } else if (kind == "vertiport") {
          zone.kind = ZoneKind::Vertiport;
          zone.extent_m = kDefaultVertiportRadiusM;
        } else {
          throw ParseError("zone '" + zone.id + "': unknown kind '" + kind + "'");
        }
        zone.owner = z.at("owner").get<std::string>();
        zone.extent_m = z.value("extent_m", zone.extent_m);
        zone.ambient_db = z.value("ambient_db", kDefaultAmbientDb);
        s.zones.push_back(std::move(zone));
      }
    }

    for (const auto& f : doc.at("flights"))
      s.flights.push_back({f.at("id").get<AircraftId>(), f.at("od").get<std::string>(), f.at("takeoff_s").get<double>()});

    if (doc.contains("sim")) {
      const json& j = doc.at("sim");
      SimSettings d;
      s.sim.timestep_s = j.value("timestep_s", d.timestep_s);
      s.sim.max_episode_steps = j.value("max_episode_steps", d.max_episode_steps);
      s.sim.seed = j.value("seed", d.seed);
      s.sim.headway_s = j.value("headway_s", d.headway_s);
      s.sim.ground_speed_mps = j.value("ground_speed_mps", d.ground_speed_mps);
      s.sim.vertical_rate_ftpm = j.value("vertical_rate_ftpm", d.vertical_rate_ftpm);
      s.sim.hover_duration_s = j.value("hover_duration_s", d.hover_duration_s);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scenario: ") + e.what());
  }
  fill_default_zones(s);
  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("scenario file '" + path.string() + "': " + e.what());
  }
  return scenario_from_json(doc);
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write scenario file '" + path.string() + "'");
  out << scenario_to_json(scenario).dump(2) << '\n';
}

// ---- generation ------------------------------------------------------------

namespace {

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  double length = 0.0;
};

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

/// Shortest path by corridor length, ties broken by lower vertiport index.
std::vector<std::size_t> shortest_path(std::size_t n, const std::vector<Edge>& edges, std::size_t src, std::size_t dst) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    adj[edges[e].a].emplace_back(edges[e].b, e);
    adj[edges[e].b].emplace_back(edges[e].a, e);
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> via(n, edges.size());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.emplace(0.0, src);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (auto [v, e] : adj[u]) {
      const double nd = d + edges[e].length;
      if (nd < dist[v]) {
        dist[v] = nd;
        via[v] = e;
        pq.emplace(nd, v);
      }
    }
  }
  if (!std::isfinite(dist[dst])) return {};
  std::vector<std::size_t> path;
  for (std::size_t v = dst; v != src;) {
    const std::size_t e = via[v];
    path.push_back(e);
    v = edges[e].a == v ? edges[e].b : edges[e].a;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

AirspaceNetwork generate_network(const NetworkGenOptions& o) {
  const std::size_t n = o.n_vertiports;
  if (n < 2) throw InfeasibleTopology("need at least two vertiports");
  if (o.n_corridors + 1 < n) throw InfeasibleTopology("too few corridors to connect every vertiport");
  if (o.n_corridors > n * (n - 1) / 2) throw InfeasibleTopology("more corridors than vertiport pairs");
  if (o.n_od_pairs > n * (n - 1)) throw InfeasibleTopology("more O-D pairs than ordered vertiport pairs");
  if (!(o.region_extent_m > 0.0)) throw InfeasibleTopology("region extent must be positive");

  Rng rng(derive_seed(o.seed, 0x6e6574));
  constexpr int kMaxAttempts = 200;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<Vec2> pts;
    int tries = 0;
    while (pts.size() < n && tries < 20000) {
      ++tries;
      const Vec2 p{rng.uniform(0.0, o.region_extent_m), rng.uniform(0.0, o.region_extent_m)};
      const bool ok = std::all_of(pts.begin(), pts.end(), [&](Vec2 q) { return distance(p, q) >= o.min_corridor_m; });
      if (ok) pts.push_back(p);
    }
    if (pts.size() < n) continue;

    std::vector<Edge> candidates;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        const double len = distance(pts[a], pts[b]);
        if (len >= o.min_corridor_m && len <= o.max_corridor_m) candidates.push_back({a, b, len});
      }
    if (candidates.size() < o.n_corridors) continue;
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Edge& x, const Edge& y) { return x.length < y.length; });

    // Minimum spanning tree first, then the shortest remaining candidates,
    // preferring ones that do not cross already chosen corridors.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<Edge> chosen;
    std::vector<bool> used(candidates.size(), false);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto ra = find_root(parent, candidates[i].a);
      const auto rb = find_root(parent, candidates[i].b);
      if (ra != rb) {
        parent[ra] = rb;
        chosen.push_back(candidates[i]);
        used[i] = true;
      }
    }
    if (chosen.size() != n - 1) continue;

    auto crosses = [&](const Edge& e) {
      for (const auto& c : chosen) {
        if (c.a == e.a || c.a == e.b || c.b == e.a || c.b == e.b) continue;
        if (segments_intersect(pts[c.a], pts[c.b], pts[e.a], pts[e.b])) return true;
      }
      return false;
    };
    for (int pass = 0; pass < 2 && chosen.size() < o.n_corridors; ++pass) {
      for (std::size_t i = 0; i < candidates.size() && chosen.size() < o.n_corridors; ++i) {
        if (used[i] || (pass == 0 && crosses(candidates[i]))) continue;
        chosen.push_back(candidates[i]);
        used[i] = true;
      }
    }
    if (chosen.size() != o.n_corridors) continue;

    AirspaceNetwork net;
    for (std::size_t i = 0; i < n; ++i) net.vertiports.push_back({"V" + std::to_string(i), pts[i]});
    for (std::size_t e = 0; e < chosen.size(); ++e)
      net.corridors.push_back({"C" + std::to_string(e), net.vertiports[chosen[e].a].id,
                               net.vertiports[chosen[e].b].id, CorridorDirection::Bidirectional});

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (a != b) pairs.emplace_back(a, b);
    rng.shuffle(std::span(pairs));
    pairs.resize(o.n_od_pairs);
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [a, b] = pairs[k];
      const auto path = shortest_path(n, chosen, a, b);
      OdPair od{"OD" + std::to_string(k), net.vertiports[a].id, net.vertiports[b].id, {}};
      for (auto e : path) od.corridors.push_back(net.corridors[e].id);
      net.od_pairs.push_back(std::move(od));
    }
    validate(net);
    return net;
  }
  throw InfeasibleTopology("could not build a connected network after " + std::to_string(kMaxAttempts) + " attempts");
}

Scenario generate_scenario(const AirspaceNetwork& network, const ScenarioGenOptions& options) {
  Scenario s;
  s.network = network;
  s.sim = options.sim;
  s.sim.seed = options.seed;
  fill_default_zones(s);

  Rng rng(derive_seed(options.seed, 0x666c74));
  // Staggered first departure per origin so origins do not launch in lockstep.
  std::map<std::string, double> next_slot;
  for (const auto& v : network.vertiports) next_slot[v.id] = std::floor(rng.uniform(0.0, s.sim.headway_s));

  const std::size_t n_od = network.od_pairs.size();
  if (options.n_flights > 0 && n_od == 0) throw ConfigError("cannot assign flights: network has no O-D pairs");
  for (std::size_t k = 0; k < options.n_flights; ++k) {
    const auto& od = network.od_pairs[k % n_od];
    double& slot = next_slot[od.origin];
    s.flights.push_back({static_cast<AircraftId>(k), od.id, slot});
    slot += s.sim.headway_s;
  }
  validate(s);
  return s;
}

// ---- index and queries -----------------------------------------------------

NetworkIndex::NetworkIndex(Scenario scenario) : scenario_(std::move(scenario)) {
  validate(scenario_);
  const auto& net = scenario_.network;
  n_corridors_ = net.corridors.size();

  routes_.reserve(net.od_pairs.size());
  for (const auto& od : net.od_pairs) {
    std::vector<Leg> legs;
    std::size_t at = *net.find_vertiport(od.origin);
    double total = 0.0;
    for (const auto& cid : od.corridors) {
      const std::size_t c = *net.find_corridor(cid);
      const std::size_t a = *net.find_vertiport(net.corridors[c].from);
      const std::size_t b = *net.find_vertiport(net.corridors[c].to);
      const std::size_t to = (a == at) ? b : a;
      Leg leg{c, at, to, net.vertiports[at].position, net.vertiports[to].position, 0.0};
      leg.length_m = distance(leg.start, leg.end);
      total += leg.length_m;
      legs.push_back(leg);
      at = to;
    }
    routes_.push_back(std::move(legs));
    route_lengths_.push_back(total);
  }

  for (const auto& f : scenario_.flights) flight_od_.push_back(*net.find_od_pair(f.od));

  corridor_zone_.assign(net.corridors.size(), 0);
  vertiport_zone_.assign(net.vertiports.size(), 0);
  for (std::size_t z = 0; z < scenario_.zones.size(); ++z) {
    const auto& zone = scenario_.zones[z];
    if (zone.kind == ZoneKind::Corridor)
      corridor_zone_[*net.find_corridor(zone.owner)] = z;
    else
      vertiport_zone_[*net.find_vertiport(zone.owner)] = z;
  }

  related_.assign(n_corridors_ * n_corridors_, 0);
  const auto inter = corridor_intersections(net);
  for (std::size_t a = 0; a < n_corridors_; ++a) {
    related_[a * n_corridors_ + a] = 1;
    for (auto b : inter[a]) related_[a * n_corridors_ + b] = 1;
  }
}

std::pair<Vec2, Vec2> NetworkIndex::corridor_segment(std::size_t corridor) const {
  const auto& net = scenario_.network;
  const auto& c = net.corridors.at(corridor);
  return {net.vertiports[*net.find_vertiport(c.from)].position, net.vertiports[*net.find_vertiport(c.to)].position};
}

std::size_t zone_of(const ZoneQuery& q, const NetworkIndex& index) {
  const auto& zones = index.scenario().zones;
  if (q.vertiport) {
    const std::size_t z = index.vertiport_zone(*q.vertiport);
    if (distance(q.position, index.vertiport_position(*q.vertiport)) > zones[z].extent_m)
      throw NoZone("position is outside the zone of vertiport " + index.network().vertiports[*q.vertiport].id);
    return z;
  }
  if (q.corridor) {
    const std::size_t z = index.corridor_zone(*q.corridor);
    const auto [a, b] = index.corridor_segment(*q.corridor);
    if (point_segment_distance(q.position, a, b) > zones[z].extent_m)
      throw NoZone("position is outside the zone of corridor " + index.network().corridors[*q.corridor].id);
    return z;
  }
  const auto& net = index.network();
  for (std::size_t v = 0; v < net.vertiports.size(); ++v) {
    const std::size_t z = index.vertiport_zone(v);
    if (distance(q.position, net.vertiports[v].position) <= zones[z].extent_m) return z;
  }
  for (std::size_t c = 0; c < net.corridors.size(); ++c) {
    const std::size_t z = index.corridor_zone(c);
    const auto [a, b] = index.corridor_segment(c);
    if (point_segment_distance(q.position, a, b) <= zones[z].extent_m) return z;
  }
  throw NoZone("position is off-network");
}

std::vector<std::vector<std::size_t>> corridor_intersections(const AirspaceNetwork& net) {
  const std::size_t n = net.corridors.size();
  struct Seg {
    std::size_t a, b;
    Vec2 p, q;
    double xmin, xmax, ymin, ymax;
  };
  std::vector<Seg> segs;
  segs.reserve(n);
  for (const auto& c : net.corridors) {
    const std::size_t a = *net.find_vertiport(c.from);
    const std::size_t b = *net.find_vertiport(c.to);
    const Vec2 p = net.vertiports[a].position;
    const Vec2 q = net.vertiports[b].position;
    segs.push_back({a, b, p, q, std::min(p.x, q.x), std::max(p.x, q.x), std::min(p.y, q.y), std::max(p.y, q.y)});
  }
  // Sweep over x: only segments whose x-extents overlap need the exact test.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto l, auto r) { return segs[l].xmin < segs[r].xmin; });

  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Seg& s = segs[order[i]];
    for (std::size_t j = i + 1; j < n && segs[order[j]].xmin <= s.xmax; ++j) {
      const Seg& t = segs[order[j]];
      if (t.ymin > s.ymax || t.ymax < s.ymin) continue;
      const bool shared = s.a == t.a || s.a == t.b || s.b == t.a || s.b == t.b;
      if (shared || segments_intersect(s.p, s.q, t.p, t.q)) {
        out[order[i]].push_back(order[j]);
        out[order[j]].push_back(order[i]);
      }
    }
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

}  // namespace uam::airspace
