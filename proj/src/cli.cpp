#include "uam/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "uam/airspace.hpp"
#include "uam/energy.hpp"
#include "uam/errors.hpp"
#include "uam/metrics.hpp"
#include "uam/nn.hpp"
#include "uam/noise.hpp"
#include "uam/ppo.hpp"
#include "uam/version.hpp"

namespace uam::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOutputDirEnv = "UAM_OUTPUT_DIR";
constexpr const char* kWorkersEnv = "UAM_WORKERS";

struct Usage : Error {
  using Error::Error;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Refuses to replace an existing file unless forced.
void guard_output(const fs::path& path, bool force) {
  if (fs::exists(path) && !force)
    throw ValidationError(path.string(), "already exists; pass --force to overwrite");
}

std::optional<std::string> env_var(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

// ---- run configuration -----------------------------------------------------

/// Everything a train/eval/sweep run needs, after merging defaults, the
/// config file, environment overrides and flags (in increasing priority).
struct RunConfig {
  fs::path scenario;
  fs::path output_dir;
  std::uint64_t seed = 0;
  std::size_t workers = 5;
  std::int64_t checkpoint_every = 100;
  int hidden = 256;
  std::optional<std::vector<double>> levels_ft;
  std::optional<double> timestep_s;
  std::optional<std::int64_t> max_episode_steps;
  env::EnvConfig env{};
  ppo::PpoConfig ppo{};
};

json to_json(const RunConfig& c) {
  json j = {
      {"scenario", c.scenario.string()},
      {"output_dir", c.output_dir.string()},
      {"seed", c.seed},
      {"workers", c.workers},
      {"checkpoint_every", c.checkpoint_every},
      {"network", {{"hidden", c.hidden}}},
      {"env", env::to_json(c.env)},
      {"ppo", ppo::to_json(c.ppo)},
  };
  if (c.levels_ft) j["levels_ft"] = *c.levels_ft;
  if (c.timestep_s) j["timestep_s"] = *c.timestep_s;
  if (c.max_episode_steps) j["max_episode_steps"] = *c.max_episode_steps;
  return j;
}

void apply_config_file(RunConfig& c, const fs::path& path) {
  const json j = read_json_file(path);
  if (!j.is_object()) throw ValidationError(path.string(), "run config must be a JSON object");
  const fs::path base = path.parent_path();
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "scenario") {
        fs::path p = v.get<std::string>();
        c.scenario = p.is_absolute() ? p : base / p;
      } else if (key == "output_dir") {
        c.output_dir = v.get<std::string>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "workers") {
        c.workers = v.get<std::size_t>();
      } else if (key == "checkpoint_every") {
        c.checkpoint_every = v.get<std::int64_t>();
      } else if (key == "network") {
        for (const auto& [nk, nv] : v.items()) {
          if (nk != "hidden") throw ValidationError("network." + nk, "unknown key");
          c.hidden = nv.get<int>();
        }
      } else if (key == "levels_ft") {
        c.levels_ft = v.get<std::vector<double>>();
      } else if (key == "timestep_s") {
        c.timestep_s = v.get<double>();
      } else if (key == "max_episode_steps") {
        c.max_episode_steps = v.get<std::int64_t>();
      } else if (key == "env") {
        c.env = env::env_config_from_json(v, c.env);
      } else if (key == "ppo") {
        c.ppo = ppo::ppo_config_from_json(v, c.ppo);
      } else {
        throw ValidationError(key, "unknown run-config key");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Flags shared by train, eval and sweep. Unset flags leave the config alone.
struct CommonFlags {
  std::string config;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<double> rho_noise, rho_sep, rho_energy;
  bool force = false;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Run-config JSON file");
    app->add_option("--scenario", scenario, "Scenario JSON file");
    app->add_option("--out", out, "Output directory");
    app->add_option("--seed", seed, "Seed");
    app->add_option("--workers", workers, "Worker threads (default 5)");
    app->add_option("--rho-noise", rho_noise, "Noise reward weight");
    app->add_option("--rho-sep", rho_sep, "Separation reward weight");
    app->add_option("--rho-energy", rho_energy, "Energy reward weight");
    app->add_flag("--force", force, "Overwrite existing outputs");
  }

  RunConfig resolve(const std::string& default_out) const {
    RunConfig c;
    c.output_dir = default_out;
    if (!config.empty()) apply_config_file(c, config);
    if (auto v = env_var(kOutputDirEnv)) c.output_dir = *v;
    if (auto v = env_var(kWorkersEnv)) {
      try {
        c.workers = static_cast<std::size_t>(std::stoul(*v));
      } catch (const std::exception&) {
        throw ValidationError(kWorkersEnv, "not a non-negative integer");
      }
    }
    if (!scenario.empty()) c.scenario = scenario;
    if (!out.empty()) c.output_dir = out;
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    if (rho_noise) c.env.weights.rho_noise = *rho_noise;
    if (rho_sep) c.env.weights.rho_sep = *rho_sep;
    if (rho_energy) c.env.weights.rho_energy = *rho_energy;
    if (c.workers == 0) throw ValidationError("workers", "must be at least 1");
    if (c.scenario.empty()) throw ValidationError("scenario", "no scenario given (--scenario or config file)");
    c.env.validate();
    return c;
  }
};

std::shared_ptr<const airspace::NetworkIndex> load_index(const RunConfig& c, airspace::Scenario* copy = nullptr) {
  auto scn = airspace::load_scenario(c.scenario);
  if (c.levels_ft) scn.network.altitude_levels_ft = *c.levels_ft;
  if (c.timestep_s) scn.sim.timestep_s = *c.timestep_s;
  if (c.max_episode_steps) scn.sim.max_episode_steps = *c.max_episode_steps;
  airspace::validate(scn);
  if (copy) *copy = scn;
  return std::make_shared<const airspace::NetworkIndex>(std::move(scn));
}

ppo::TrainConfig make_train_config(const RunConfig& c, std::shared_ptr<const airspace::NetworkIndex> index) {
  ppo::TrainConfig tc;
  tc.index = std::move(index);
  tc.env = c.env;
  tc.ppo = c.ppo;
  tc.ppo.seed = c.seed;
  tc.dims.hidden = c.hidden;
  tc.output_dir = c.output_dir;
  tc.workers = c.workers;
  tc.checkpoint_every = c.checkpoint_every;
  return tc;
}

void write_run_record(const RunConfig& c, const airspace::Scenario& scn, const fs::path& dir) {
  fs::create_directories(dir);
  RunConfig resolved = c;
  resolved.scenario = "scenario.json";
  resolved.output_dir = ".";
  std::ofstream(dir / "config.json") << to_json(resolved).dump(2) << '\n';
  airspace::save_scenario(scn, dir / "scenario.json");
}

// ---- subcommands -------------------------------------------------------------

int run_gen_scenario(const airspace::NetworkGenOptions& net, const airspace::ScenarioGenOptions& scn_opts,
                     const fs::path& out_path, bool force, std::ostream& out) {
  guard_output(out_path, force);
  const auto network = airspace::generate_network(net);
  const auto scenario = airspace::generate_scenario(network, scn_opts);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  airspace::save_scenario(scenario, out_path);
  out << "wrote " << out_path.string() << ": " << network.vertiports.size() << " vertiports, "
      << network.corridors.size() << " corridors (" << network.directional_link_count() << " directional links), "
      << network.od_pairs.size() << " O-D pairs, " << scenario.flights.size() << " flights\n";
  return 0;
}

int run_train(const RunConfig& c, bool force, std::ostream& out) {
  guard_output(c.output_dir / "train_log.csv", force);
  airspace::Scenario scn;
  auto index = load_index(c, &scn);
  auto tc = make_train_config(c, index);
  tc.extra_metadata = {{"scenario_source", c.scenario.string()}};
  write_run_record(c, scn, c.output_dir);
  tc.on_iteration = [&out](const ppo::IterationLog& r) {
    if (r.iteration % 10 == 0)
      out << "iter " << r.iteration << " reward " << r.mean_reward << " entropy " << r.entropy << " los "
          << r.los_events << '\n';
  };
  const auto result = ppo::train(tc);
  out << "trained " << result.log.size() << " iterations into " << c.output_dir.string() << '\n';
  return 0;
}

int run_eval(const RunConfig& c, const fs::path& checkpoint, std::size_t episodes, bool force, std::ostream& out) {
  guard_output(c.output_dir / "report.json", force);
  airspace::Scenario scn;
  auto index = load_index(c, &scn);
  const auto ck = nn::load_checkpoint(checkpoint);
  const nn::NetworkPolicy policy(ck.params);
  const auto report = metrics::evaluate(policy, index, c.env, episodes, c.seed, c.workers);
  write_run_record(c, scn, c.output_dir);
  std::ofstream(c.output_dir / "checkpoint_source.txt") << checkpoint.string() << '\n';
  metrics::write_report(c.output_dir, report);
  out << "evaluated " << episodes << " episodes: mean LOS " << report.get("los_events").mean
      << ", mean network noise increase " << report.get("network_noise_increase_db").mean << " dB, mean altitude changes "
      << report.get("total_altitude_changes").mean << '\n';
  return 0;
}

std::vector<metrics::WeightTriple> parse_grid(const std::string& text) {
  std::vector<metrics::WeightTriple> grid;
  std::stringstream rows(text);
  std::string row;
  while (std::getline(rows, row, ';')) {
    if (row.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream cols(row);
    std::string cell;
    std::vector<double> v;
    while (std::getline(cols, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("grid", "bad number '" + cell + "'");
      }
    }
    if (v.size() != 3) throw ValidationError("grid", "each entry needs three weights: '" + row + "'");
    grid.push_back({v[0], v[1], v[2]});
  }
  return grid;
}

int run_sweep(const RunConfig& c, const std::string& grid_text, std::size_t episodes, std::uint64_t eval_seed,
              bool allow_arbitrary, bool force, std::ostream& out) {
  const auto grid = parse_grid(grid_text);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      metrics::validate_triple(grid[i], allow_arbitrary);
    } catch (const ConfigError& e) {
      throw ValidationError("grid[" + std::to_string(i) + "]", e.what());
    }
  }
  const auto table = c.output_dir / "tradeoff.csv";
  guard_output(table, force);
  metrics::SweepOptions opt;
  airspace::Scenario scn;
  opt.base = make_train_config(c, load_index(c, &scn));
  opt.output_dir = c.output_dir;
  opt.eval_episodes = episodes;
  opt.eval_seed = eval_seed;
  opt.allow_arbitrary = allow_arbitrary;
  opt.reuse_checkpoints = !force;
  write_run_record(c, scn, c.output_dir);
  const auto rows = metrics::sweep(grid, opt);
  std::ofstream csv(table);
  metrics::write_tradeoff_csv(csv, rows);
  out << "wrote " << rows.size() << " rows to " << table.string() << '\n';
  return 0;
}

int run_report_energy(const std::string& scenario, const fs::path& out_path, bool force, std::ostream& out) {
  guard_output(out_path, force);
  const energy::EnergyParams p;
  std::vector<std::pair<std::string, double>> routes;
  if (!scenario.empty()) {
    const airspace::NetworkIndex index(airspace::load_scenario(scenario));
    for (std::size_t k = 0; k < index.network().od_pairs.size(); ++k)
      routes.emplace_back(index.network().od_pairs[k].id, meters_to_feet(index.route_length_m(k)));
  } else {
    for (double km : {5.0, 10.0, 20.0, 40.0})
      routes.emplace_back("straight_" + std::to_string(static_cast<int>(km)) + "km", meters_to_feet(km * 1000.0));
  }
  std::ofstream csv(out_path);
  csv.precision(10);
  csv << "route_id,distance_ft,alt_ft,feasible,e_hover_mj,e_climb_mj,e_cruise_mj,e_descent_mj,e_total_mj,extra_ratio\n";
  for (const auto& [id, d] : routes) {
    std::optional<double> base;
    try {
      base = energy::mission_energy(d, airspace::kDefaultAltitudeLevelsFt.front(), p).e_total_j;
    } catch (const RouteTooShort&) {
    }
    for (double alt : airspace::kDefaultAltitudeLevelsFt) {
      csv << id << ',' << d << ',' << alt << ',';
      try {
        const auto m = energy::mission_energy(d, alt, p);
        csv << "1," << m.e_hover_j / 1e6 << ',' << m.e_climb_j / 1e6 << ',' << m.e_cruise_j / 1e6 << ','
            << m.e_descent_j / 1e6 << ',' << m.e_total_j / 1e6 << ',';
        if (base) csv << m.e_total_j / *base - 1.0;
        csv << '\n';
      } catch (const RouteTooShort&) {
        csv << "0,,,,,,\n";
      }
    }
  }
  out << "wrote " << out_path.string() << '\n';
  return 0;
}

int run_report_noise(const std::string& scenario, const std::string& checkpoint, std::uint64_t seed,
                     const fs::path& out_path, bool force, std::ostream& out) {
  guard_output(out_path, force);
  std::ofstream csv(out_path);
  csv.precision(10);
  if (scenario.empty()) {
    csv << "condition,altitude_ft,sel_db,normalized\n";
    for (const auto& c : noise::npd_conditions()) {
      const auto cfg = noise::NoiseConfig::from_regression(c);
      for (double alt : airspace::kDefaultAltitudeLevelsFt)
        csv << noise::to_string(c) << ',' << alt << ',' << noise::npd_sel(alt, c) << ','
            << noise::normalized_noise(alt, cfg, c) << '\n';
    }
  } else {
    auto index = std::make_shared<const airspace::NetworkIndex>(airspace::load_scenario(scenario));
    const env::EnvConfig cfg;
    std::unique_ptr<env::Policy> policy;
    if (checkpoint.empty())
      policy = std::make_unique<env::FixedActionPolicy>(sim::Action::Maintain);
    else
      policy = std::make_unique<nn::NetworkPolicy>(nn::load_checkpoint(checkpoint).params);
    const auto report = metrics::evaluate(*policy, index, cfg, 1, seed);
    csv << "zone_id,kind,ambient_db,cumulative_db,increase_db\n";
    for (const auto& z : report.episodes.front().zones) {
      csv << z.zone_id << ',' << (z.kind == airspace::ZoneKind::Corridor ? "corridor" : "vertiport") << ','
          << z.ambient_db << ',';
      if (z.exposed) csv << z.cumulative_db << ',' << z.increase_db;
      else csv << ',';
      csv << '\n';
    }
  }
  out << "wrote " << out_path.string() << '\n';
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Urban air mobility altitude-control toolkit", "uam"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // gen-scenario
  auto* gen = app.add_subcommand("gen-scenario", "Generate a synthetic corridor network and flight schedule");
  airspace::NetworkGenOptions net;
  airspace::ScenarioGenOptions scn_opts;
  std::string gen_out = "scenario.json";
  bool gen_force = false;
  gen->add_option("--vertiports", net.n_vertiports, "Vertiport count")->capture_default_str();
  gen->add_option("--corridors", net.n_corridors, "Corridor count")->capture_default_str();
  gen->add_option("--od-pairs", net.n_od_pairs, "O-D pair count")->capture_default_str();
  gen->add_option("--flights", scn_opts.n_flights, "Flight count")->capture_default_str();
  gen->add_option("--seed", net.seed, "Seed")->capture_default_str();
  gen->add_option("--extent-m", net.region_extent_m, "Side of the square region, m")->capture_default_str();
  gen->add_option("--headway-s", scn_opts.sim.headway_s, "Same-origin departure headway, s")->capture_default_str();
  gen->add_option("--max-steps", scn_opts.sim.max_episode_steps, "Episode step budget")->capture_default_str();
  gen->add_option("--out", gen_out, "Output file")->capture_default_str();
  gen->add_flag("--force", gen_force, "Overwrite an existing file");

  // train
  auto* train = app.add_subcommand("train", "Train a shared policy");
  CommonFlags train_flags;
  train_flags.add(train);
  std::optional<std::int64_t> iterations;
  std::optional<double> lr;
  std::optional<std::size_t> parallel_sims, batch_size;
  std::optional<int> epochs, hidden;
  std::optional<std::int64_t> checkpoint_every;
  train->add_option("--iterations", iterations, "PPO iterations");
  train->add_option("--lr", lr, "Learning rate");
  train->add_option("--parallel-sims", parallel_sims, "Environment instances");
  train->add_option("--batch-size", batch_size, "Minibatch size");
  train->add_option("--epochs", epochs, "Epochs per update");
  train->add_option("--hidden", hidden, "Hidden width");
  train->add_option("--checkpoint-every", checkpoint_every, "Checkpoint period in iterations");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint over independent episodes");
  CommonFlags eval_flags;
  eval_flags.add(eval);
  std::string checkpoint;
  std::size_t episodes = 100;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--episodes", episodes, "Episodes")->capture_default_str();

  // sweep
  auto* sw = app.add_subcommand("sweep", "Train and evaluate one policy per reward-weight triple");
  CommonFlags sweep_flags;
  sweep_flags.add(sw);
  std::string grid;
  std::size_t sweep_episodes = 100;
  std::uint64_t eval_seed = 1;
  bool allow_arbitrary = false;
  std::optional<std::int64_t> sweep_iterations;
  sw->add_option("--grid", grid, "Triples 'noise,sep,energy;...'")->required();
  sw->add_option("--episodes", sweep_episodes, "Evaluation episodes per triple")->capture_default_str();
  sw->add_option("--eval-seed", eval_seed, "Evaluation master seed")->capture_default_str();
  sw->add_option("--iterations", sweep_iterations, "PPO iterations per triple");
  sw->add_flag("--allow-arbitrary", allow_arbitrary, "Accept triples outside the pairwise design");

  // report
  auto* report = app.add_subcommand("report", "Emit energy or noise model reports");
  report->require_subcommand(1);
  auto* rep_energy = report->add_subcommand("energy", "Mission energy per route and flight level");
  auto* rep_noise = report->add_subcommand("noise", "NPD table, or per-zone noise for one scenario episode");
  std::string rep_scenario, rep_checkpoint, rep_out;
  std::uint64_t rep_seed = 1;
  bool rep_force = false;
  for (auto* sub : {rep_energy, rep_noise}) {
    sub->add_option("--scenario", rep_scenario, "Scenario file");
    sub->add_option("--out", rep_out, "Output CSV");
    sub->add_flag("--force", rep_force, "Overwrite an existing file");
  }
  rep_noise->add_option("--checkpoint", rep_checkpoint, "Policy checkpoint (default: always maintain)");
  rep_noise->add_option("--seed", rep_seed, "Episode seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) {
      scn_opts.seed = net.seed;
      return run_gen_scenario(net, scn_opts, gen_out, gen_force, out);
    }
    if (*train) {
      auto c = train_flags.resolve("runs/train");
      if (iterations) c.ppo.iterations = *iterations;
      if (lr) c.ppo.learning_rate = *lr;
      if (parallel_sims) c.ppo.parallel_sims = *parallel_sims;
      if (batch_size) c.ppo.batch_size = *batch_size;
      if (epochs) c.ppo.epochs = *epochs;
      if (hidden) c.hidden = *hidden;
      if (checkpoint_every) c.checkpoint_every = *checkpoint_every;
      c.ppo.validate();
      return run_train(c, train_flags.force, out);
    }
    if (*eval) {
      auto c = eval_flags.resolve("runs/eval");
      if (!eval_flags.seed && eval_flags.config.empty()) c.seed = 1;
      if (episodes == 0) throw ValidationError("episodes", "must be at least 1");
      return run_eval(c, checkpoint, episodes, eval_flags.force, out);
    }
    if (*sw) {
      auto c = sweep_flags.resolve("runs/sweep");
      if (sweep_iterations) c.ppo.iterations = *sweep_iterations;
      c.ppo.validate();
      if (sweep_episodes == 0) throw ValidationError("episodes", "must be at least 1");
      return run_sweep(c, grid, sweep_episodes, eval_seed, allow_arbitrary, sweep_flags.force, out);
    }
    if (*rep_energy) return run_report_energy(rep_scenario, rep_out.empty() ? "energy_report.csv" : rep_out, rep_force, out);
    if (*rep_noise)
      return run_report_noise(rep_scenario, rep_checkpoint, rep_seed, rep_out.empty() ? "noise_report.csv" : rep_out,
                              rep_force, out);
  } catch (const ValidationError& e) {
    err << "error: invalid " << e.field() << ": " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace uam::cli
