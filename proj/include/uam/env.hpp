#pragma once

// Decision-process layer over the simulator: per-agent observations, the
// three-part reward, and rollouts driven by a shared policy.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "uam/episode_metrics.hpp"
#include "uam/noise.hpp"
#include "uam/rng.hpp"
#include "uam/sim.hpp"

namespace uam::env {

using sim::Action;
using sim::AircraftId;

inline constexpr int kOwnshipFeatures = 7;
inline constexpr int kNeighborFeatures = 5;
inline constexpr double kAltitudeScaleFt = 2000.0;
inline constexpr double kAdjustmentScale = 8.0;

using OwnshipFeatures = std::array<double, kOwnshipFeatures>;
using NeighborFeatures = std::array<double, kNeighborFeatures>;

/// Ownship: [z, changing, z_target, last action one-hot (3), N_adj].
/// Neighbor: [z_rel, d_o, last action one-hot (3)].
struct Observation {
  OwnshipFeatures ownship{};
  std::vector<NeighborFeatures> neighbors;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct RewardWeights {
  double rho_noise = 0.0;
  double rho_sep = 1.0;
  double rho_energy = 0.0;
  double c_e = 0.05;
  double c_max = 10.0;

  /// Throws ConfigError for negative weights or non-positive c_max.
  void validate() const;
};

struct EnvConfig {
  RewardWeights weights{};
  sim::SimOptions sim{};
  noise::NoiseConfig noise = noise::NoiseConfig::from_regression();

  EnvConfig() { sim.departure_shift_s = 60.0; }
  void validate() const;
};

/// Run-config keys: rho_noise, rho_sep, rho_energy, c_e, c_max, d_los_m,
/// d_comm_m, departure_shift_s, noise_mode, noise_position.
nlohmann::json to_json(const EnvConfig& cfg);
/// Overlays the keys present in `j` onto `base`; unknown keys raise ConfigError.
EnvConfig env_config_from_json(const nlohmann::json& j, EnvConfig base = {});

struct RewardBreakdown {
  double total = 0.0;
  double noise = 0.0;
  double sep = 0.0;
  double energy = 0.0;
};

/// Throws NotEnroute unless the aircraft is an active agent.
Observation observe(const sim::WorldState& world, AircraftId id);

double proximity_weight(double d_o_m, const sim::SeparationConfig& cfg);

/// Sum of proximity weights over neighbors within d_LOS vertically.
double congestion(const sim::WorldState& world, AircraftId id);

/// Reward for the step that just executed `action`. Throws NotEnroute.
RewardBreakdown reward(const sim::WorldState& world, AircraftId id, Action action, const EnvConfig& cfg);

/// Shared decision maker. evaluate() must be safe to call concurrently.
class Policy {
 public:
  virtual ~Policy() = default;
  /// Fills one probability triple and one value estimate per observation.
  virtual void evaluate(std::span<const Observation> obs, std::vector<std::array<double, 3>>& probs,
                        std::vector<double>& values) const = 0;
};

/// Picks the same action everywhere, with value 0.
class FixedActionPolicy final : public Policy {
 public:
  explicit FixedActionPolicy(Action action) : action_(action) {}
  void evaluate(std::span<const Observation> obs, std::vector<std::array<double, 3>>& probs,
                std::vector<double>& values) const override;

 private:
  Action action_;
};

enum class ActionMode { Sample, Greedy };

int sample_action(const std::array<double, 3>& probs, Rng& rng);
int greedy_action(const std::array<double, 3>& probs);

struct Transition {
  Observation obs;
  int action = 0;
  double reward = 0.0;
  RewardBreakdown components;
  Observation next_obs;
  bool done = false;        // aircraft landed
  double old_log_prob = 0.0;
  double value = 0.0;       // V(obs) at collection time
  double next_value = 0.0;  // V(next_obs) at collection time, 0 when done
  AircraftId agent = 0;
};

/// Time-ordered transitions of one agent within one episode. Ends at landing
/// or where collection stopped.
struct Trajectory {
  AircraftId agent = 0;
  std::uint64_t episode = 0;
  std::vector<Transition> steps;
};

struct ChunkResult {
  std::vector<Trajectory> trajectories;
  std::vector<metrics::EpisodeMetrics> finished_episodes;
  std::size_t los_events = 0;
  std::size_t transitions = 0;
};

/// One simulated world stepped by a policy; episodes restart automatically.
/// Owns its random state, so a given seed reproduces the same experience.
class Environment {
 public:
  Environment(std::shared_ptr<const airspace::NetworkIndex> index, EnvConfig cfg, std::uint64_t seed);

  /// Advances `n_steps` joint steps. Open trajectories are cut at the end and
  /// bootstrapped with the policy's value of their last next-observation.
  ChunkResult run(const Policy& policy, std::size_t n_steps, ActionMode mode, bool collect = true);

  /// Runs the current episode to its end (resetting first if it is finished).
  ChunkResult run_episode(const Policy& policy, ActionMode mode, bool collect);

  /// Starts a fresh episode with the given seed.
  void reset(std::uint64_t episode_seed);

  const sim::WorldState& world() const { return world_; }
  std::uint64_t episode() const noexcept { return episode_; }

 private:
  struct Open {
    Trajectory traj;
    bool awaiting_value = false;
  };

  void step_once(const Policy& policy, ActionMode mode, bool collect, ChunkResult& out);
  void finish_episode(const Policy& policy, ChunkResult& out);
  void flush_open(const Policy& policy, ChunkResult& out);

  std::shared_ptr<const airspace::NetworkIndex> index_;
  EnvConfig cfg_;
  std::uint64_t seed_;
  Rng rng_;
  sim::WorldState world_;
  std::uint64_t episode_ = 0;
  bool fresh_ = true;
  std::vector<Open> open_;  // parallel to world_.aircraft
  metrics::EpisodeMetrics rewards_;  // reward sums of the running episode
  std::size_t los_seen_ = 0;
  energy::EnergyParams energy_{};
};

/// Resets with `seed` and plays one full episode.
ChunkResult episode_rollout(const Policy& policy, std::shared_ptr<const airspace::NetworkIndex> index,
                            std::uint64_t seed, const EnvConfig& cfg, bool collect,
                            ActionMode mode = ActionMode::Greedy);

}  // namespace uam::env
