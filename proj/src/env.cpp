#include "uam/env.hpp"

#include <algorithm>
#include <cmath>

#include "uam/errors.hpp"

namespace uam::env {

void RewardWeights::validate() const {
  if (!(rho_noise >= 0.0 && rho_sep >= 0.0 && rho_energy >= 0.0)) throw ConfigError("reward weights must be >= 0");
  if (!(c_e >= 0.0)) throw ConfigError("c_e must be >= 0");
  if (!(c_max > 0.0)) throw ConfigError("c_max must be positive");
}

void EnvConfig::validate() const {
  weights.validate();
  sim.separation.validate();
  if (!(noise.n_max_db > noise.n_min_db)) throw ConfigError("noise normalization needs n_max_db > n_min_db");
}

nlohmann::json to_json(const EnvConfig& cfg) {
  const auto& c = cfg.sim.noise_condition;
  return {
      {"rho_noise", cfg.weights.rho_noise},
      {"rho_sep", cfg.weights.rho_sep},
      {"rho_energy", cfg.weights.rho_energy},
      {"c_e", cfg.weights.c_e},
      {"c_max", cfg.weights.c_max},
      {"d_los_m", cfg.sim.separation.d_los_m},
      {"d_comm_m", cfg.sim.separation.d_comm_m},
      {"departure_shift_s", cfg.sim.departure_shift_s},
      {"noise_mode", c.mode == noise::OperatingMode::L ? "L" : c.mode == noise::OperatingMode::D ? "D" : "A"},
      {"noise_position", c.position == noise::MicPosition::Centerline ? "centerline" : "side"},
      {"noise_n_min_db", cfg.noise.n_min_db},
      {"noise_n_max_db", cfg.noise.n_max_db},
  };
}

EnvConfig env_config_from_json(const nlohmann::json& j, EnvConfig cfg) {
  if (!j.is_object()) throw ConfigError("environment config must be an object");
  auto mode = cfg.sim.noise_condition.mode;
  auto position = cfg.sim.noise_condition.position;
  bool condition_changed = false;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "rho_noise") cfg.weights.rho_noise = v.get<double>();
      else if (key == "rho_sep") cfg.weights.rho_sep = v.get<double>();
      else if (key == "rho_energy") cfg.weights.rho_energy = v.get<double>();
      else if (key == "c_e") cfg.weights.c_e = v.get<double>();
      else if (key == "c_max") cfg.weights.c_max = v.get<double>();
      else if (key == "d_los_m") cfg.sim.separation.d_los_m = v.get<double>();
      else if (key == "d_comm_m") cfg.sim.separation.d_comm_m = v.get<double>();
      else if (key == "departure_shift_s") cfg.sim.departure_shift_s = v.get<double>();
      else if (key == "noise_n_min_db") cfg.noise.n_min_db = v.get<double>();
      else if (key == "noise_n_max_db") cfg.noise.n_max_db = v.get<double>();
      else if (key == "noise_mode") {
        const auto m = v.get<std::string>();
        if (m == "L") mode = noise::OperatingMode::L;
        else if (m == "D") mode = noise::OperatingMode::D;
        else if (m == "A") mode = noise::OperatingMode::A;
        else throw ConfigError("noise_mode must be L, D or A");
        condition_changed = true;
      } else if (key == "noise_position") {
        const auto m = v.get<std::string>();
        if (m == "centerline") position = noise::MicPosition::Centerline;
        else if (m == "side") position = noise::MicPosition::Side;
        else throw ConfigError("noise_position must be centerline or side");
        condition_changed = true;
      } else {
        throw ConfigError("unknown environment key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("environment config: ") + e.what());
  }
  if (condition_changed) {
    cfg.sim.noise_condition = noise::npd_condition(mode, position);
    if (!j.contains("noise_n_min_db") && !j.contains("noise_n_max_db"))
      cfg.noise = noise::NoiseConfig::from_regression(cfg.sim.noise_condition, cfg.noise.z_low_ft, cfg.noise.z_high_ft);
  }
  cfg.validate();
  return cfg;
}

namespace {

void one_hot(Action a, double* out) {
  out[0] = out[1] = out[2] = 0.0;
  out[static_cast<int>(a)] = 1.0;
}

double log_prob(const std::array<double, 3>& p, int a) { return std::log(std::max(p[a], 1e-300)); }

}  // namespace

Observation observe(const sim::WorldState& w, AircraftId id) {
  const auto& own = w.get(id);
  if (!w.is_active_agent(own)) throw NotEnroute("aircraft " + std::to_string(id) + " is not en route");
  const auto& levels = w.levels();
  const double base = levels.front();
  const double span = levels.size() > 1 ? levels.back() - levels.front() : kAltitudeScaleFt;

  Observation obs;
  auto& o = obs.ownship;
  o[0] = std::clamp((own.altitude_ft - base) / span, -1.0, 1.0);
  o[1] = own.changing ? 1.0 : 0.0;
  o[2] = std::clamp((own.target_altitude_ft - base) / span, -1.0, 1.0);
  one_hot(own.last_action, &o[3]);
  o[6] = std::min(own.ascent_count / kAdjustmentScale, 1.0);

  const double d_comm = w.options.separation.d_comm_m;
  for (AircraftId nid : sim::neighbors(w, id)) {
    const auto& other = w.get(nid);
    NeighborFeatures f{};
    f[0] = std::clamp((other.altitude_ft - own.altitude_ft) / kAltitudeScaleFt, -1.0, 1.0);
    f[1] = distance(own.position, other.position) / d_comm;
    one_hot(other.last_action, &f[2]);
    obs.neighbors.push_back(f);
  }
  return obs;
}

double proximity_weight(double d_o_m, const sim::SeparationConfig& cfg) {
  if (d_o_m < cfg.d_los_m) return 1.0;
  if (d_o_m <= cfg.d_comm_m) return (cfg.d_comm_m - d_o_m) / (cfg.d_comm_m - cfg.d_los_m);
  return 0.0;
}

double congestion(const sim::WorldState& w, AircraftId id) {
  const auto& own = w.get(id);
  const auto& sep = w.options.separation;
  double c = 0.0;
  for (AircraftId nid : sim::neighbors(w, id)) {
    const auto& other = w.get(nid);
    if (std::abs(feet_to_meters(other.altitude_ft - own.altitude_ft)) >= sep.d_los_m) continue;
    c += proximity_weight(distance(own.position, other.position), sep);
  }
  return c;
}

RewardBreakdown reward(const sim::WorldState& w, AircraftId id, Action action, const EnvConfig& cfg) {
  const auto& own = w.get(id);
  if (!w.is_active_agent(own)) throw NotEnroute("aircraft " + std::to_string(id) + " is not en route");
  RewardBreakdown r;
  r.noise = -noise::normalized_noise(own.altitude_ft, cfg.noise, w.options.noise_condition);
  r.sep = -std::min(congestion(w, id) / cfg.weights.c_max, 1.0);
  if (action == Action::Ascend && own.initiated_ascent) r.energy = -cfg.weights.c_e * own.initiated_ascent_number;
  const auto& k = cfg.weights;
  r.total = k.rho_noise * r.noise + k.rho_sep * r.sep + k.rho_energy * r.energy;
  return r;
}

void FixedActionPolicy::evaluate(std::span<const Observation> obs, std::vector<std::array<double, 3>>& probs,
                                 std::vector<double>& values) const {
  std::array<double, 3> p{};
  p[static_cast<int>(action_)] = 1.0;
  probs.assign(obs.size(), p);
  values.assign(obs.size(), 0.0);
}

int sample_action(const std::array<double, 3>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int a = 0; a < 2; ++a) {
    acc += probs[a];
    if (u < acc) return a;
  }
  // Guard against rounding in the cumulative sum: never pick a zero-mass action.
  if (probs[2] > 0.0) return 2;
  return probs[1] > 0.0 ? 1 : 0;
}

int greedy_action(const std::array<double, 3>& probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

// ---- Environment ---------------------------------------------------------

Environment::Environment(std::shared_ptr<const airspace::NetworkIndex> index, EnvConfig cfg, std::uint64_t seed)
    : index_(std::move(index)), cfg_(std::move(cfg)), seed_(seed), rng_(derive_seed(seed, 0xac7)) {
  cfg_.validate();
  reset(derive_seed(seed_, 0));
}

void Environment::reset(std::uint64_t episode_seed) {
  world_ = sim::reset(index_, episode_seed, cfg_.sim);
  open_.assign(world_.aircraft.size(), Open{});
  rewards_ = {};
  los_seen_ = 0;
  fresh_ = true;
}

void Environment::finish_episode(const Policy& policy, ChunkResult& out) {
  flush_open(policy, out);
  auto m = metrics::collect_episode_metrics(world_, energy_);
  m.transitions = rewards_.transitions;
  m.reward_sum = rewards_.reward_sum;
  m.noise_reward_sum = rewards_.noise_reward_sum;
  m.sep_reward_sum = rewards_.sep_reward_sum;
  m.energy_reward_sum = rewards_.energy_reward_sum;
  out.finished_episodes.push_back(std::move(m));
  fresh_ = false;
}

void Environment::flush_open(const Policy& policy, ChunkResult& out) {
  std::vector<Observation> pending;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < open_.size(); ++i) {
    if (open_[i].awaiting_value) {
      pending.push_back(open_[i].traj.steps.back().next_obs);
      slots.push_back(i);
    }
  }
  if (!pending.empty()) {
    std::vector<std::array<double, 3>> probs;
    std::vector<double> values;
    policy.evaluate(pending, probs, values);
    for (std::size_t k = 0; k < slots.size(); ++k) open_[slots[k]].traj.steps.back().next_value = values[k];
  }
  for (auto& o : open_) {
    if (!o.traj.steps.empty()) out.trajectories.push_back(std::move(o.traj));
    o = Open{};
  }
}

void Environment::step_once(const Policy& policy, ActionMode mode, bool collect, ChunkResult& out) {
  if (world_.terminal()) {
    if (fresh_) finish_episode(policy, out);
    ++episode_;
    reset(derive_seed(seed_, episode_));
  }

  std::vector<std::size_t> slots;
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < world_.aircraft.size(); ++i) {
    if (world_.aircraft[i].phase != sim::Phase::Enroute) continue;
    slots.push_back(i);
    obs.push_back(observe(world_, world_.aircraft[i].id));
  }

  std::vector<std::array<double, 3>> probs;
  std::vector<double> values;
  sim::JointActions actions;
  std::vector<int> chosen(slots.size());
  if (!obs.empty()) {
    policy.evaluate(obs, probs, values);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      auto& o = open_[slots[k]];
      if (o.awaiting_value) {
        o.traj.steps.back().next_value = values[k];
        o.awaiting_value = false;
      }
      chosen[k] = mode == ActionMode::Greedy ? greedy_action(probs[k]) : sample_action(probs[k], rng_);
      actions.emplace(world_.aircraft[slots[k]].id, static_cast<Action>(chosen[k]));
    }
  }

  sim::step(world_, actions);
  out.los_events += world_.los_events.size() - los_seen_;
  los_seen_ = world_.los_events.size();

  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& ac = world_.aircraft[slots[k]];
    const auto action = static_cast<Action>(chosen[k]);
    const auto r = reward(world_, ac.id, action, cfg_);
    ++rewards_.transitions;
    rewards_.reward_sum += r.total;
    rewards_.noise_reward_sum += r.noise;
    rewards_.sep_reward_sum += r.sep;
    rewards_.energy_reward_sum += r.energy;
    ++out.transitions;
    if (!collect) continue;

    Transition t;
    t.obs = std::move(obs[k]);
    t.action = chosen[k];
    t.reward = r.total;
    t.components = r;
    t.next_obs = observe(world_, ac.id);
    t.done = ac.phase != sim::Phase::Enroute;
    t.old_log_prob = log_prob(probs[k], chosen[k]);
    t.value = values[k];
    t.agent = ac.id;

    auto& o = open_[slots[k]];
    if (o.traj.steps.empty()) {
      o.traj.agent = ac.id;
      o.traj.episode = episode_;
    }
    o.traj.steps.push_back(std::move(t));
    if (o.traj.steps.back().done) {
      out.trajectories.push_back(std::move(o.traj));
      o = Open{};
    } else {
      o.awaiting_value = true;
    }
  }
}

ChunkResult Environment::run(const Policy& policy, std::size_t n_steps, ActionMode mode, bool collect) {
  ChunkResult out;
  for (std::size_t s = 0; s < n_steps; ++s) step_once(policy, mode, collect, out);
  flush_open(policy, out);
  return out;
}

ChunkResult Environment::run_episode(const Policy& policy, ActionMode mode, bool collect) {
  ChunkResult out;
  if (world_.terminal() && !fresh_) {
    ++episode_;
    reset(derive_seed(seed_, episode_));
  }
  while (!world_.terminal()) step_once(policy, mode, collect, out);
  finish_episode(policy, out);
  return out;
}

ChunkResult episode_rollout(const Policy& policy, std::shared_ptr<const airspace::NetworkIndex> index,
                            std::uint64_t seed, const EnvConfig& cfg, bool collect, ActionMode mode) {
  Environment env(std::move(index), cfg, seed);
  env.reset(seed);
  return env.run_episode(policy, mode, collect);
}

}  // namespace uam::env
