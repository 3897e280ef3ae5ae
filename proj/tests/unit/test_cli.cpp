#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/fixtures.hpp"
#include "uam/cli.hpp"

namespace fs = std::filesystem;
using namespace uam;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "uam");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

/// Fresh scratch directory removed on scope exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"gen-scenario", "--vertiports", "many"}).code == 2);
    CHECK(run({"eval", "--scenario", "x.json"}).code == 2);  // --checkpoint is required
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("gen-scenario") != std::string::npos);
  }

  TEST_CASE("gen-scenario writes the requested counts and refuses to overwrite") {
    Scratch s("uam_cli_gen");
    const auto path = s / "net.json";
    const auto r = run({"gen-scenario", "--vertiports", "6", "--corridors", "9", "--od-pairs", "7", "--flights", "20",
                        "--seed", "4", "--out", path});
    REQUIRE(r.code == 0);
    const auto scn = airspace::load_scenario(path);
    CHECK(scn.network.vertiports.size() == 6);
    CHECK(scn.network.corridors.size() == 9);
    CHECK(scn.network.od_pairs.size() == 7);
    CHECK(scn.flights.size() == 20);

    const auto again = run({"gen-scenario", "--seed", "4", "--out", path});
    CHECK(again.code == 1);
    CHECK(again.err.find("--force") != std::string::npos);
    CHECK(run({"gen-scenario", "--vertiports", "6", "--corridors", "9", "--od-pairs", "7", "--flights", "20", "--seed",
               "4", "--out", path, "--force"})
              .code == 0);
    CHECK(airspace::scenario_to_json(airspace::load_scenario(path)) == airspace::scenario_to_json(scn));

    CHECK(run({"gen-scenario", "--vertiports", "2", "--corridors", "40", "--out", s / "bad.json"}).code == 1);
  }

  TEST_CASE("validation failures exit with 1") {
    Scratch s("uam_cli_invalid");
    {
      std::ofstream bad(s.dir / "bad.json");
      bad << "{ not json";
    }
    CHECK(run({"train", "--scenario", s / "bad.json", "--out", s / "run"}).code == 1);
    CHECK(run({"train", "--scenario", s / "missing.json", "--out", s / "run"}).code == 1);
    const auto data = (testing::data_dir() / "smoke_2v8.json").string();
    CHECK(run({"train", "--scenario", data, "--out", s / "run", "--rho-sep", "-1"}).code == 1);
    CHECK(run({"train", "--scenario", data, "--out", s / "run", "--workers", "0"}).code == 1);
  }

  TEST_CASE("train with zero iterations then eval") {
    Scratch s("uam_cli_train");
    const auto data = (testing::data_dir() / "smoke_2v8.json").string();
    const auto run_dir = s / "run";
    const auto t = run({"train", "--scenario", data, "--out", run_dir, "--iterations", "0", "--hidden", "8",
                        "--workers", "1"});
    REQUIRE(t.code == 0);
    CHECK(fs::exists(fs::path(run_dir) / "checkpoint_initial.bin"));
    CHECK(fs::exists(fs::path(run_dir) / "config.json"));
    CHECK(fs::exists(fs::path(run_dir) / "scenario.json"));
    CHECK(line_count(fs::path(run_dir) / "train_log.csv") == 1);
    CHECK(run({"train", "--scenario", data, "--out", run_dir, "--iterations", "0"}).code == 1);

    const auto eval_dir = s / "eval";
    const auto e = run({"eval", "--scenario", data, "--checkpoint", run_dir + "/checkpoint_initial.bin", "--episodes",
                        "2", "--out", eval_dir, "--workers", "1"});
    REQUIRE(e.code == 0);
    CHECK(e.out.find("mean LOS") != std::string::npos);
    CHECK(fs::exists(fs::path(eval_dir) / "report.json"));
    CHECK(line_count(fs::path(eval_dir) / "episodes.csv") == 3);

    // The recorded config replays the run.
    const auto replay = run({"train", "--config", run_dir + "/config.json", "--out", s / "replay", "--iterations",
                             "0"});
    CHECK(replay.code == 0);
  }

  TEST_CASE("report energy and noise") {
    Scratch s("uam_cli_report");
    REQUIRE(run({"report", "energy", "--out", s / "energy.csv"}).code == 0);
    CHECK(line_count(s.dir / "energy.csv") == 1 + 4 * 5);
    REQUIRE(run({"report", "noise", "--out", s / "noise.csv"}).code == 0);
    CHECK(line_count(s.dir / "noise.csv") == 1 + 6 * 5);
    const auto data = (testing::data_dir() / "smoke_2v8.json").string();
    REQUIRE(run({"report", "noise", "--scenario", data, "--out", s / "zones.csv"}).code == 0);
    CHECK(line_count(s.dir / "zones.csv") == 1 + airspace::load_scenario(data).zones.size());
    CHECK(run({"report", "energy", "--out", s / "energy.csv"}).code == 1);
    CHECK(run({"report"}).code == 2);
  }
}
