#pragma once

// Clipped-surrogate policy optimization with pooled multi-agent experience and
// a single shared parameter set.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uam/env.hpp"
#include "uam/nn.hpp"

namespace uam::ppo {

enum class AdvantageEstimator { Gae, DiscountedReturn };

struct PpoConfig {
  std::size_t batch_size = 512;
  int epochs = 6;
  double learning_rate = 1e-5;
  double clip_epsilon = 0.4;
  double value_coeff = 0.01;
  double entropy_coeff = 0.01;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  AdvantageEstimator estimator = AdvantageEstimator::Gae;
  bool normalize_advantages = true;
  std::size_t update_interval_steps = 32;
  std::int64_t iterations = 10000;
  std::size_t parallel_sims = 5;
  std::uint64_t seed = 0;

  // Adam moments.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  nn::LossSpec loss_spec() const { return {clip_epsilon, value_coeff, entropy_coeff, 1.0}; }
};

nlohmann::json to_json(const PpoConfig& cfg);
/// Overlays the keys present in `j` onto `base`. Unknown keys raise ConfigError.
PpoConfig ppo_config_from_json(const nlohmann::json& j, PpoConfig base = {});

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Per-agent estimates over one time-ordered trajectory. Each step
/// bootstraps from its stored next_value unless it is terminal. Throws
/// EmptyTrajectory.
Advantages compute_advantages(std::span<const env::Transition> trajectory, double gamma, double gae_lambda,
                              AdvantageEstimator estimator = AdvantageEstimator::Gae);

/// Shifts and scales to zero mean and unit variance (no-op for fewer than two
/// values or zero spread).
void normalize(std::vector<double>& values);

/// Flattens trajectories into learner samples (advantages normalized across
/// the whole pool when enabled).
std::vector<nn::Sample> build_samples(std::span<const env::Trajectory> trajectories, const PpoConfig& cfg);

class Adam {
 public:
  Adam(const nn::Dims& dims, double beta1, double beta2, double eps);
  void step(nn::ParameterSet& params, const nn::ParameterSet& grads, double lr);
  std::int64_t steps() const noexcept { return t_; }

 private:
  nn::ParameterSet m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

struct UpdateStats {
  std::size_t samples = 0;
  std::size_t minibatches = 0;
  double loss = 0.0;  // mean over minibatches, before each step
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// Owns the live parameters and optimizer state.
class Learner {
 public:
  Learner(nn::ParameterSet params, PpoConfig cfg);

  /// K epochs of shuffled minibatches. A pool smaller than the batch size is
  /// used as one minibatch. On NonFiniteLoss the parameters and optimizer are
  /// restored to their state before the call and the error is rethrown.
  UpdateStats update(std::span<const nn::Sample> batch);

  const nn::ParameterSet& params() const noexcept { return params_; }
  const PpoConfig& config() const noexcept { return cfg_; }

 private:
  nn::ParameterSet params_;
  PpoConfig cfg_;
  Adam adam_;
  Rng rng_;
};

struct IterationLog {
  std::int64_t iteration = 0;
  double mean_reward = 0.0;  // per agent transition
  double mean_noise = 0.0;
  double mean_sep = 0.0;
  double mean_energy = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  std::size_t los_events = 0;
  double approx_kl = 0.0;
  double loss = 0.0;
  std::size_t transitions = 0;
  std::size_t episodes_finished = 0;
  bool update_skipped = false;
};

struct TrainConfig {
  std::shared_ptr<const airspace::NetworkIndex> index;
  env::EnvConfig env{};
  PpoConfig ppo{};
  nn::Dims dims{};
  std::filesystem::path output_dir;  // empty: nothing written
  std::size_t workers = 5;
  std::int64_t checkpoint_every = 100;
  nlohmann::json extra_metadata = nlohmann::json::object();
  std::function<void(const IterationLog&)> on_iteration;
};

struct TrainResult {
  nn::ParameterSet params;
  std::vector<IterationLog> log;
};

/// Collect/update loop. Output files (when output_dir is set): train_log.csv,
/// run_metadata.json, checkpoint_initial.bin, checkpoint_<iter>.bin,
/// checkpoint_final.bin. With zero iterations only the initial checkpoint and
/// an empty log are written.
TrainResult train(const TrainConfig& cfg);

}  // namespace uam::ppo
