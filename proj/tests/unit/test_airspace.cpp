#include <doctest.h>

#include <deque>
#include <filesystem>
#include <set>

#include "../support/fixtures.hpp"
#include "uam/errors.hpp"

using namespace uam;
using namespace uam::airspace;

namespace {

bool route_walks(const AirspaceNetwork& net, const OdPair& od) {
  std::string at = od.origin;
  for (const auto& cid : od.corridors) {
    const auto c = net.find_corridor(cid);
    if (!c) return false;
    const auto& cor = net.corridors[*c];
    if (cor.from == at)
      at = cor.to;
    else if (cor.to == at && cor.direction == CorridorDirection::Bidirectional)
      at = cor.from;
    else
      return false;
  }
  return at == od.destination;
}

bool connected(const AirspaceNetwork& net) {
  std::set<std::string> seen{net.vertiports.front().id};
  std::deque<std::string> queue{net.vertiports.front().id};
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (const auto& c : net.corridors) {
      for (const auto& [a, b] : {std::pair{c.from, c.to}, std::pair{c.to, c.from}}) {
        if (a == v && seen.insert(b).second) queue.push_back(b);
      }
    }
  }
  return seen.size() == net.vertiports.size();
}

}  // namespace

TEST_SUITE("airspace") {
  TEST_CASE("bundled synthetic scenario has the published counts") {
    const auto s = load_scenario(testing::data_dir() / "south_austin_synthetic.json");
    CHECK(s.network.vertiports.size() == 10);
    CHECK(s.network.corridors.size() == 19);
    CHECK(s.network.directional_link_count() == 38);
    CHECK(s.network.od_pairs.size() == 28);
    CHECK(s.flights.size() == 136);
  }

  TEST_CASE("generate_network reproduces the reference-scale topology") {
    NetworkGenOptions o;
    const auto net = generate_network(o);
    CHECK(net.vertiports.size() == 10);
    CHECK(net.corridors.size() == 19);
    CHECK(net.directional_link_count() == 38);
    CHECK(net.od_pairs.size() == 28);
    CHECK(generate_network(o) == net);
  }

  TEST_CASE("minimal network: two vertiports, one corridor, both directions") {
    NetworkGenOptions o{2, 1, 2, 5000.0, 0};
    const auto net = generate_network(o);
    REQUIRE(net.vertiports.size() == 2);
    REQUIRE(net.corridors.size() == 1);
    REQUIRE(net.od_pairs.size() == 2);
    CHECK(net.od_pairs[0].origin != net.od_pairs[1].origin);
  }

  TEST_CASE("generated networks are connected, routable and within length bounds") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      NetworkGenOptions o;
      o.seed = seed;
      const auto net = generate_network(o);
      CHECK(connected(net));
      for (const auto& od : net.od_pairs) CHECK(route_walks(net, od));
      for (std::size_t c = 0; c < net.corridors.size(); ++c) {
        CHECK(net.corridor_length_m(c) >= o.min_corridor_m - 1e-6);
        CHECK(net.corridor_length_m(c) <= o.max_corridor_m + 1e-6);
      }
    }
  }

  TEST_CASE("infeasible topologies are rejected") {
    CHECK_THROWS_AS(generate_network({10, 5, 4, 20000.0, 1}), InfeasibleTopology);
    CHECK_THROWS_AS(generate_network({3, 2, 7, 20000.0, 1}), InfeasibleTopology);
  }

  TEST_CASE("corridor_intersections equals the brute-force segment oracle") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Rng rng(seed);
      NetworkGenOptions o;
      o.seed = seed;
      o.n_vertiports = 8 + rng.below(9);
      o.n_corridors = std::min<std::size_t>(30, o.n_vertiports - 1 + rng.below(o.n_vertiports));
      o.n_od_pairs = 4;
      const auto net = generate_network(o);
      const auto got = corridor_intersections(net);
      REQUIRE(got.size() == net.corridors.size());
      for (std::size_t a = 0; a < net.corridors.size(); ++a) {
        std::vector<std::size_t> expect;
        for (std::size_t b = 0; b < net.corridors.size(); ++b) {
          if (a == b) continue;
          auto seg = [&](std::size_t c) {
            return std::pair{net.vertiports[*net.find_vertiport(net.corridors[c].from)].position,
                             net.vertiports[*net.find_vertiport(net.corridors[c].to)].position};
          };
          const auto [p, q] = seg(a);
          const auto [r, s] = seg(b);
          if (testing::oracle_segments_meet(p, q, r, s)) expect.push_back(b);
        }
        CHECK(got[a] == expect);
      }
    }
  }

  TEST_CASE("intersection cases: crossing, parallel, shared endpoint") {
    AirspaceNetwork net;
    net.vertiports = {{"A", {0, 0}}, {"B", {4000, 4000}}, {"C", {0, 4000}}, {"D", {4000, 0}},
                      {"E", {0, 10000}}, {"F", {4000, 10000}}, {"G", {8000, 10000}}};
    net.corridors = {{"AB", "A", "B"}, {"CD", "C", "D"}, {"EF", "E", "F"}, {"FG", "F", "G"}};
    const auto x = corridor_intersections(net);
    CHECK(x[0] == std::vector<std::size_t>{1});
    CHECK(x[1] == std::vector<std::size_t>{0});
    CHECK(x[2] == std::vector<std::size_t>{3});  // shared endpoint F
    CHECK(x[3] == std::vector<std::size_t>{2});

    AirspaceNetwork par;
    par.vertiports = {{"A", {0, 0}}, {"B", {5000, 0}}, {"C", {0, 1000}}, {"D", {5000, 1000}}};
    par.corridors = {{"AB", "A", "B"}, {"CD", "C", "D"}};
    const auto y = corridor_intersections(par);
    CHECK(y[0].empty());
    CHECK(y[1].empty());
  }

  TEST_CASE("scenario round trip is exact") {
    auto s = testing::generated_scenario(11);
    s.zones[3].ambient_db = 55.25;
    const auto dir = std::filesystem::temp_directory_path() / "uam_airspace_roundtrip";
    std::filesystem::create_directories(dir);
    save_scenario(s, dir / "s.json");
    CHECK(load_scenario(dir / "s.json") == s);
    CHECK(scenario_from_json(scenario_to_json(s)) == s);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("validation names the offending field") {
    auto s = testing::line_scenario(10000.0, {0.0, 60.0});
    SUBCASE("unknown O-D reference") {
      s.flights[1].od = "NOPE";
      try {
        validate(s);
        FAIL("expected ValidationError");
      } catch (const ValidationError& e) {
        CHECK(e.field() == "flights[1].od");
      }
    }
    SUBCASE("corridor with unknown vertiport") {
      s.network.corridors[0].to = "VX";
      CHECK_THROWS_AS(validate(s), ValidationError);
    }
    SUBCASE("same-origin takeoffs inside the headway") {
      s.flights[1].takeoff_s = 10.0;
      try {
        validate(s);
        FAIL("expected ValidationError");
      } catch (const ValidationError& e) {
        CHECK(e.field().find("takeoff_s") != std::string::npos);
      }
    }
    SUBCASE("ambient outside the plausible range") {
      s.zones[0].ambient_db = 120.0;
      CHECK_THROWS_AS(validate(s), ValidationError);
    }
  }

  TEST_CASE("malformed files raise ParseError") {
    CHECK_THROWS_AS(scenario_from_json(nlohmann::json::parse(R"({"network": 3})")), ParseError);
    CHECK_THROWS_AS(scenario_from_json(nlohmann::json::array()), ParseError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/file.json"), ParseError);
  }

  TEST_CASE("zone_of") {
    auto idx = testing::make_index(testing::line_scenario(10000.0, {0.0}));
    const auto& zones = idx->scenario().zones;
    const auto cz = zone_of({{5000.0, 0.0}, 0, std::nullopt}, *idx);
    CHECK(zones[cz].kind == ZoneKind::Corridor);
    CHECK(zones[cz].owner == "CAB");
    const auto vz = zone_of({{0.0, 0.0}, std::nullopt, 0}, *idx);
    CHECK(zones[vz].owner == "VA");
    CHECK_THROWS_AS(zone_of({{5000.0, 9000.0}, std::nullopt, std::nullopt}, *idx), NoZone);
    CHECK_THROWS_AS(zone_of({{5000.0, 9000.0}, 0, std::nullopt}, *idx), NoZone);
  }

  TEST_CASE("generated scenario respects same-origin headway") {
    const auto s = testing::generated_scenario(3);
    CHECK_NOTHROW(validate(s));
    CHECK(s.flights.size() == 136);
  }
}
