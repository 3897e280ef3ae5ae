#include "uam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "uam/errors.hpp"
#include "uam/sim.hpp"
#include "uam/version.hpp"

namespace uam::metrics {

double EpisodeMetrics::mean_flight_energy_j() const {
  if (flight_energy_j.empty()) return 0.0;
  return std::accumulate(flight_energy_j.begin(), flight_energy_j.end(), 0.0) /
         static_cast<double>(flight_energy_j.size());
}

EpisodeMetrics collect_episode_metrics(const sim::WorldState& w, const energy::EnergyParams& params) {
  EpisodeMetrics m;
  m.episode_steps = w.step;
  m.los_event_count = w.los_events.size();

  const auto& zones = w.scenario().zones;
  double linear_increase = 0.0;
  for (std::size_t z = 0; z < zones.size(); ++z) {
    const auto& acc = w.zone_noise[z];
    ZoneNoise zn;
    zn.zone_id = zones[z].id;
    zn.kind = zones[z].kind;
    zn.ambient_db = acc.ambient_db();
    zn.energy_sum = acc.energy_sum();
    zn.exposed = !acc.empty();
    if (zn.exposed) {
      zn.cumulative_db = acc.cumulative_db();
      zn.increase_db = zn.cumulative_db - zn.ambient_db;
      linear_increase += std::pow(10.0, zn.increase_db / 10.0);
    }
    m.zones.push_back(std::move(zn));
  }
  if (linear_increase > 0.0) m.network_noise_increase_db = 10.0 * std::log10(linear_increase);

  const auto& levels = w.levels();
  for (const auto& ac : w.aircraft) {
    m.ascent_count_total += ac.ascent_count;
    m.total_altitude_changes += ac.ascent_count + ac.descent_count;
    if (ac.phase == sim::Phase::Done) ++m.flights_completed;
    if (ac.phase == sim::Phase::Pending) continue;
    energy::FlightProfile profile;
    profile.levels_ft = levels;
    profile.level_seconds = ac.level_seconds;
    profile.climb_seconds = ac.climb_seconds;
    profile.descent_seconds = ac.descent_seconds;
    profile.initial_level_ft = levels.front();
    profile.arrival_alt_ft = ac.altitude_ft >= levels.front() ? ac.altitude_ft : levels.front();
    m.flight_energy_j.push_back(energy::trajectory_energy(profile, params));
  }

  m.occupancy_steps = w.occupancy_steps;
  const auto total = std::accumulate(m.occupancy_steps.begin(), m.occupancy_steps.end(), std::int64_t{0});
  if (total > 0)
    for (auto s : m.occupancy_steps) m.altitude_occupancy.push_back(static_cast<double>(s) / static_cast<double>(total));
  return m;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("summary of empty data");
  std::sort(v.begin(), v.end());
  Summary s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = quantile_sorted(v, 0.5);
  s.q1 = quantile_sorted(v, 0.25);
  s.q3 = quantile_sorted(v, 0.75);
  s.min = v.front();
  s.max = v.back();
  return s;
}

const Summary& EvaluationReport::get(const std::string& name) const {
  for (const auto& [k, s] : summary)
    if (k == name) return s;
  throw std::out_of_range("no summary named " + name);
}

namespace {

double mean_zone_increase(const EpisodeMetrics& m) {
  double sum = 0.0;
  int n = 0;
  for (const auto& z : m.zones)
    if (z.exposed) {
      sum += z.increase_db;
      ++n;
    }
  return n ? sum / n : 0.0;
}

std::string level_key(double level_ft) {
  std::ostringstream os;
  os << "occupancy_" << level_ft << "ft";
  return os.str();
}

}  // namespace

EvaluationReport evaluate(const env::Policy& policy, std::shared_ptr<const airspace::NetworkIndex> index,
                          const env::EnvConfig& cfg, std::size_t n_episodes, std::uint64_t seed, std::size_t workers) {
  if (n_episodes == 0) throw ConfigError("evaluation needs at least one episode");
  EvaluationReport r;
  r.seed = seed;
  r.level_ft = index->network().altitude_levels_ft;
  r.episodes.resize(n_episodes);

  auto run = [&](std::size_t k) {
    auto res = env::episode_rollout(policy, index, derive_seed(seed, k), cfg, false, env::ActionMode::Greedy);
    r.episodes[k] = std::move(res.finished_episodes.front());
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, n_episodes));
  if (n_threads == 1) {
    for (std::size_t k = 0; k < n_episodes; ++k) run(k);
  } else {
    std::vector<std::exception_ptr> errors(n_threads);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      threads.emplace_back([&, t] {
        try {
          for (std::size_t k = t; k < n_episodes; k += n_threads) run(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  auto series = [&](auto&& f) {
    std::vector<double> v;
    for (const auto& e : r.episodes) v.push_back(static_cast<double>(f(e)));
    return summarize(std::move(v));
  };
  r.summary.emplace_back("los_events", series([](const auto& e) { return e.los_event_count; }));
  r.summary.emplace_back("network_noise_increase_db", series([](const auto& e) { return e.network_noise_increase_db; }));
  r.summary.emplace_back("mean_zone_noise_increase_db", series([](const auto& e) { return mean_zone_increase(e); }));
  r.summary.emplace_back("total_altitude_changes", series([](const auto& e) { return e.total_altitude_changes; }));
  r.summary.emplace_back("ascent_count_total", series([](const auto& e) { return e.ascent_count_total; }));
  r.summary.emplace_back("mean_flight_energy_mj", series([](const auto& e) { return e.mean_flight_energy_j() / 1e6; }));
  r.summary.emplace_back("episode_steps", series([](const auto& e) { return e.episode_steps; }));
  r.summary.emplace_back("mean_reward", series([](const auto& e) {
                           return e.transitions ? e.reward_sum / static_cast<double>(e.transitions) : 0.0;
                         }));

  r.mean_occupancy.assign(r.level_ft.size(), 0.0);
  std::size_t counted = 0;
  for (const auto& e : r.episodes) {
    if (e.altitude_occupancy.empty()) continue;
    for (std::size_t l = 0; l < r.mean_occupancy.size(); ++l) r.mean_occupancy[l] += e.altitude_occupancy[l];
    ++counted;
  }
  for (auto& v : r.mean_occupancy) v = counted ? v / static_cast<double>(counted) : 0.0;
  for (std::size_t l = 0; l < r.level_ft.size(); ++l) {
    r.summary.emplace_back(level_key(r.level_ft[l]), series([l](const EpisodeMetrics& e) {
                             return e.altitude_occupancy.empty() ? 0.0 : e.altitude_occupancy[l];
                           }));
  }
  return r;
}

nlohmann::ordered_json report_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "uam-evaluation";
  j["version"] = kVersion;
  j["seed"] = r.seed;
  j["episodes"] = r.episodes.size();
  j["action_selection"] = "greedy";
  j["headline_noise_series"] = "network_noise_increase_db";
  j["levels_ft"] = r.level_ft;
  j["mean_occupancy"] = r.mean_occupancy;
  auto& s = j["summary"];
  s = nlohmann::ordered_json::object();
  for (const auto& [name, v] : r.summary)
    s[name] = {{"mean", v.mean}, {"median", v.median}, {"q1", v.q1}, {"q3", v.q3}, {"min", v.min}, {"max", v.max}};
  auto& eps = j["per_episode"];
  eps = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.episodes.size(); ++k) {
    const auto& e = r.episodes[k];
    eps.push_back({{"episode", k},
                   {"los_events", e.los_event_count},
                   {"network_noise_increase_db", e.network_noise_increase_db},
                   {"total_altitude_changes", e.total_altitude_changes},
                   {"ascent_count_total", e.ascent_count_total},
                   {"episode_steps", e.episode_steps},
                   {"flights_completed", e.flights_completed},
                   {"altitude_occupancy", e.altitude_occupancy}});
  }
  return j;
}

void write_zone_noise_csv(std::ostream& out, const EvaluationReport& r) {
  const auto old = out.precision(17);
  out << "episode,zone_id,kind,ambient_db,energy_sum,cumulative_db,increase_db\n";
  for (std::size_t k = 0; k < r.episodes.size(); ++k) {
    for (const auto& z : r.episodes[k].zones) {
      out << k << ',' << z.zone_id << ',' << (z.kind == airspace::ZoneKind::Corridor ? "corridor" : "vertiport") << ','
          << z.ambient_db << ',' << z.energy_sum << ',';
      if (z.exposed)
        out << z.cumulative_db << ',' << z.increase_db;
      else
        out << ',';
      out << '\n';
    }
  }
  out.precision(old);
}

void write_report(const std::filesystem::path& dir, const EvaluationReport& r) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.json") << report_json(r).dump(2) << '\n';

  {
    std::ofstream out(dir / "episodes.csv");
    out.precision(17);
    out << "episode,episode_steps,los_events,network_noise_increase_db,total_altitude_changes,ascent_count_total,"
           "mean_flight_energy_mj,mean_reward";
    for (double l : r.level_ft) out << ',' << level_key(l);
    out << '\n';
    for (std::size_t k = 0; k < r.episodes.size(); ++k) {
      const auto& e = r.episodes[k];
      out << k << ',' << e.episode_steps << ',' << e.los_event_count << ',' << e.network_noise_increase_db << ','
          << e.total_altitude_changes << ',' << e.ascent_count_total << ',' << e.mean_flight_energy_j() / 1e6 << ','
          << (e.transitions ? e.reward_sum / static_cast<double>(e.transitions) : 0.0);
      for (std::size_t l = 0; l < r.level_ft.size(); ++l)
        out << ',' << (e.altitude_occupancy.empty() ? 0.0 : e.altitude_occupancy[l]);
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "zone_noise.csv");
    write_zone_noise_csv(out, r);
  }
  {
    std::ofstream out(dir / "plot_noise_box.csv");
    out.precision(17);
    out << "series,mean,median,q1,q3,min,max\n";
    auto row = [&](const std::string& name, const Summary& s) {
      out << name << ',' << s.mean << ',' << s.median << ',' << s.q1 << ',' << s.q3 << ',' << s.min << ',' << s.max
          << '\n';
    };
    row("network_total", r.get("network_noise_increase_db"));
    if (!r.episodes.empty()) {
      for (std::size_t z = 0; z < r.episodes.front().zones.size(); ++z) {
        std::vector<double> v;
        for (const auto& e : r.episodes)
          if (e.zones[z].exposed) v.push_back(e.zones[z].increase_db);
        if (!v.empty()) row(r.episodes.front().zones[z].zone_id, summarize(std::move(v)));
      }
    }
  }
  {
    std::ofstream out(dir / "plot_los_vs_noise.csv");
    out.precision(17);
    out << "episode,los_events,network_noise_increase_db\n";
    for (std::size_t k = 0; k < r.episodes.size(); ++k)
      out << k << ',' << r.episodes[k].los_event_count << ',' << r.episodes[k].network_noise_increase_db << '\n';
  }
  {
    std::ofstream out(dir / "plot_altitude_hist.csv");
    out.precision(17);
    out << "level_ft,mean_occupancy\n";
    for (std::size_t l = 0; l < r.level_ft.size(); ++l) out << r.level_ft[l] << ',' << r.mean_occupancy[l] << '\n';
  }
}

// ---- sweep ------------------------------------------------------------------

void validate_triple(const WeightTriple& w, bool allow_arbitrary) {
  const double v[3] = {w.rho_noise, w.rho_sep, w.rho_energy};
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("reward weights must be finite and non-negative");
  if (allow_arbitrary) return;
  for (int zero = 0; zero < 3; ++zero) {
    if (v[zero] != 0.0) continue;
    double rest = 0.0;
    for (int k = 0; k < 3; ++k)
      if (k != zero) rest += v[k];
    if (std::abs(rest - 1.0) <= 1e-9) return;
  }
  std::ostringstream os;
  os << "weight triple (" << w.rho_noise << ", " << w.rho_sep << ", " << w.rho_energy
     << ") must have one zero entry and the other two summing to 1";
  throw ConfigError(os.str());
}

namespace {

std::string row_dir_name(const WeightTriple& w) {
  std::ostringstream os;
  os << "noise" << w.rho_noise << "_sep" << w.rho_sep << "_energy" << w.rho_energy;
  return os.str();
}

}  // namespace

std::vector<SweepRow> sweep(const std::vector<WeightTriple>& grid, const SweepOptions& opt) {
  for (const auto& w : grid) validate_triple(w, opt.allow_arbitrary);
  std::vector<SweepRow> rows;
  for (const auto& w : grid) {
    SweepRow row;
    row.weights = w;
    row.run_dir = opt.output_dir.empty() ? std::filesystem::path{} : opt.output_dir / row_dir_name(w);

    ppo::TrainConfig tc = opt.base;
    tc.env.weights.rho_noise = w.rho_noise;
    tc.env.weights.rho_sep = w.rho_sep;
    tc.env.weights.rho_energy = w.rho_energy;
    tc.output_dir = row.run_dir;

    nn::ParameterSet params;
    const auto ckpt = row.run_dir / "checkpoint_final.bin";
    if (opt.reuse_checkpoints && !row.run_dir.empty() && std::filesystem::exists(ckpt))
      params = nn::load_checkpoint(ckpt).params;
    else
      params = ppo::train(tc).params;

    const nn::NetworkPolicy policy(std::move(params));
    const auto report = evaluate(policy, tc.index, tc.env, opt.eval_episodes, opt.eval_seed, tc.workers);
    if (!row.run_dir.empty()) write_report(row.run_dir / "eval", report);
    row.mean_los = report.get("los_events").mean;
    row.mean_noise_increase_db = report.get("network_noise_increase_db").mean;
    row.mean_altitude_changes = report.get("total_altitude_changes").mean;
    rows.push_back(row);
  }
  return rows;
}

void write_tradeoff_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  const auto old = out.precision(17);
  out << "rho_noise,rho_sep,rho_energy,mean_los,mean_noise_increase_db,mean_altitude_changes,run_dir\n";
  for (const auto& r : rows)
    out << r.weights.rho_noise << ',' << r.weights.rho_sep << ',' << r.weights.rho_energy << ',' << r.mean_los << ','
        << r.mean_noise_increase_db << ',' << r.mean_altitude_changes << ',' << r.run_dir.string() << '\n';
  out.precision(old);
}

}  // namespace uam::metrics
