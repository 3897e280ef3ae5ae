#include "uam/ppo.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <thread>

#include "uam/errors.hpp"
#include "uam/version.hpp"

namespace uam::ppo {

void PpoConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(clip_epsilon > 0.0)) throw ConfigError("clip_epsilon must be positive");
  if (!(value_coeff >= 0.0 && entropy_coeff >= 0.0)) throw ConfigError("loss coefficients must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (update_interval_steps == 0) throw ConfigError("update_interval_steps must be positive");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (parallel_sims == 0) throw ConfigError("parallel_sims must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0))
    throw ConfigError("invalid Adam parameters");
}

nlohmann::json to_json(const PpoConfig& c) {
  return {
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"learning_rate", c.learning_rate},
      {"clip_epsilon", c.clip_epsilon},
      {"value_coeff", c.value_coeff},
      {"entropy_coeff", c.entropy_coeff},
      {"gamma", c.gamma},
      {"gae_lambda", c.gae_lambda},
      {"advantage_estimator", c.estimator == AdvantageEstimator::Gae ? "gae" : "discounted_return"},
      {"normalize_advantages", c.normalize_advantages},
      {"update_interval_steps", c.update_interval_steps},
      {"iterations", c.iterations},
      {"parallel_sims", c.parallel_sims},
      {"seed", c.seed},
      {"optimizer", "adam"},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
  };
}

PpoConfig ppo_config_from_json(const nlohmann::json& j, PpoConfig c) {
  if (!j.is_object()) throw ConfigError("ppo config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "clip_epsilon") c.clip_epsilon = v.get<double>();
      else if (key == "value_coeff") c.value_coeff = v.get<double>();
      else if (key == "entropy_coeff") c.entropy_coeff = v.get<double>();
      else if (key == "gamma") c.gamma = v.get<double>();
      else if (key == "gae_lambda") c.gae_lambda = v.get<double>();
      else if (key == "normalize_advantages") c.normalize_advantages = v.get<bool>();
      else if (key == "update_interval_steps") c.update_interval_steps = v.get<std::size_t>();
      else if (key == "iterations") c.iterations = v.get<std::int64_t>();
      else if (key == "parallel_sims") c.parallel_sims = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "adam_beta1") c.adam_beta1 = v.get<double>();
      else if (key == "adam_beta2") c.adam_beta2 = v.get<double>();
      else if (key == "adam_eps") c.adam_eps = v.get<double>();
      else if (key == "optimizer") {
        if (v.get<std::string>() != "adam") throw ConfigError("only the adam optimizer is available");
      } else if (key == "advantage_estimator") {
        const auto s = v.get<std::string>();
        if (s == "gae") c.estimator = AdvantageEstimator::Gae;
        else if (s == "discounted_return") c.estimator = AdvantageEstimator::DiscountedReturn;
        else throw ConfigError("advantage_estimator must be gae or discounted_return");
      } else {
        throw ConfigError("unknown ppo key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ppo config: ") + e.what());
  }
  c.validate();
  return c;
}

Advantages compute_advantages(std::span<const env::Transition> traj, double gamma, double gae_lambda,
                              AdvantageEstimator estimator) {
  if (traj.empty()) throw EmptyTrajectory();
  const std::size_t n = traj.size();
  Advantages out;
  out.advantages.resize(n);
  out.returns.resize(n);
  if (estimator == AdvantageEstimator::Gae) {
    double running = 0.0;
    for (std::size_t k = n; k-- > 0;) {
      const auto& t = traj[k];
      const double live = t.done ? 0.0 : 1.0;
      const double delta = t.reward + gamma * live * t.next_value - t.value;
      running = delta + gamma * gae_lambda * live * running;
      out.advantages[k] = running;
      out.returns[k] = running + t.value;
    }
  } else {
    double g = traj.back().done ? 0.0 : traj.back().next_value;
    for (std::size_t k = n; k-- > 0;) {
      const auto& t = traj[k];
      if (t.done) g = 0.0;
      g = t.reward + gamma * g;
      out.returns[k] = g;
      out.advantages[k] = g - t.value;
    }
  }
  return out;
}

void normalize(std::vector<double>& v) {
  if (v.size() < 2) return;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-12)) {
    for (double& x : v) x -= mean;
    return;
  }
  for (double& x : v) x = (x - mean) / sd;
}

std::vector<nn::Sample> build_samples(std::span<const env::Trajectory> trajectories, const PpoConfig& cfg) {
  std::vector<nn::Sample> out;
  std::vector<double> adv;
  for (const auto& traj : trajectories) {
    if (traj.steps.empty()) continue;
    const auto a = compute_advantages(traj.steps, cfg.gamma, cfg.gae_lambda, cfg.estimator);
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      const auto& t = traj.steps[k];
      out.push_back({t.obs, t.action, a.advantages[k], a.returns[k], t.old_log_prob});
      adv.push_back(a.advantages[k]);
    }
  }
  if (cfg.normalize_advantages) {
    normalize(adv);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].advantage = adv[i];
  }
  return out;
}

Adam::Adam(const nn::Dims& dims, double beta1, double beta2, double eps)
    : m_(dims), v_(dims), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(nn::ParameterSet& params, const nn::ParameterSet& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = params.flat();
  auto g = grads.flat();
  auto m = m_.flat();
  auto v = v_.flat();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
    p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
  }
}

Learner::Learner(nn::ParameterSet params, PpoConfig cfg)
    : params_(std::move(params)),
      cfg_(cfg),
      adam_(params_.dims(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      rng_(derive_seed(cfg.seed, 0x1ea7)) {
  cfg_.validate();
}

UpdateStats Learner::update(std::span<const nn::Sample> batch) {
  UpdateStats stats;
  stats.samples = batch.size();
  if (batch.empty()) return stats;

  const auto saved_params = params_;
  const auto saved_adam = adam_;
  const std::size_t n = batch.size();
  const std::size_t b = std::min(cfg_.batch_size, n);
  const auto spec = cfg_.loss_spec();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::ParameterSet grads(params_.dims());
  std::vector<nn::Sample> mb;

  try {
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      rng_.shuffle(std::span<std::size_t>(order));
      // Full minibatches only; the shuffled remainder sits out this epoch.
      for (std::size_t start = 0; start + b <= n; start += b) {
        mb.clear();
        for (std::size_t k = start; k < start + b; ++k) mb.push_back(batch[order[k]]);
        grads.set_zero();
        const auto diag = nn::ppo_loss(params_, mb, spec, &grads);
        if (!grads.all_finite()) throw NonFiniteLoss("non-finite gradient");
        adam_.step(params_, grads, cfg_.learning_rate);
        ++stats.minibatches;
        stats.loss += diag.loss;
        stats.entropy += diag.entropy;
        stats.clip_fraction += diag.clip_fraction;
        stats.approx_kl += diag.approx_kl;
      }
    }
  } catch (const NonFiniteLoss&) {
    params_ = saved_params;
    adam_ = saved_adam;
    throw;
  }
  const double k = static_cast<double>(stats.minibatches);
  stats.loss /= k;
  stats.entropy /= k;
  stats.clip_fraction /= k;
  stats.approx_kl /= k;
  return stats;
}

// ---- training loop ----------------------------------------------------------

namespace {

constexpr const char* kLogHeader =
    "iteration,mean_reward,mean_noise_component,mean_sep_component,mean_energy_component,entropy,clip_fraction,"
    "los_events,approx_kl,loss,transitions,episodes_finished,update_skipped";

void write_log_row(std::ostream& out, const IterationLog& r) {
  out << r.iteration << ',' << r.mean_reward << ',' << r.mean_noise << ',' << r.mean_sep << ',' << r.mean_energy
      << ',' << r.entropy << ',' << r.clip_fraction << ',' << r.los_events << ',' << r.approx_kl << ',' << r.loss
      << ',' << r.transitions << ',' << r.episodes_finished << ',' << (r.update_skipped ? 1 : 0) << '\n';
}

std::vector<env::ChunkResult> collect(std::vector<env::Environment>& envs, const env::Policy& policy,
                                      std::size_t steps, std::size_t workers) {
  std::vector<env::ChunkResult> results(envs.size());
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, envs.size()));
  if (n_threads == 1) {
    for (std::size_t k = 0; k < envs.size(); ++k) results[k] = envs[k].run(policy, steps, env::ActionMode::Sample);
    return results;
  }
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n_threads; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < envs.size(); k += n_threads)
          results[k] = envs[k].run(policy, steps, env::ActionMode::Sample);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  if (!cfg.index) throw ConfigError("training needs a scenario");
  cfg.ppo.validate();
  cfg.env.validate();

  Learner learner(nn::init_params(cfg.ppo.seed, cfg.dims), cfg.ppo);
  std::vector<env::Environment> envs;
  for (std::size_t k = 0; k < cfg.ppo.parallel_sims; ++k)
    envs.emplace_back(cfg.index, cfg.env, derive_seed(cfg.ppo.seed, 1000 + k));

  const bool write = !cfg.output_dir.empty();
  std::ofstream log;
  auto checkpoint = [&](const std::string& name, std::int64_t iteration) {
    if (!write) return;
    nlohmann::json meta = {{"iteration", iteration}, {"seed", cfg.ppo.seed}, {"version", kVersion}};
    nn::save_checkpoint(cfg.output_dir / name, learner.params(), meta);
  };

  if (write) {
    std::filesystem::create_directories(cfg.output_dir);
    nlohmann::ordered_json meta;
    meta["version"] = kVersion;
    meta["seed"] = cfg.ppo.seed;
    meta["ppo"] = to_json(cfg.ppo);
    meta["env"] = to_json(cfg.env);
    meta["network"] = {{"own_in", cfg.dims.own_in},
                       {"nbr_in", cfg.dims.nbr_in},
                       {"hidden", cfg.dims.hidden},
                       {"actions", cfg.dims.actions}};
    meta["workers"] = cfg.workers;
    meta["checkpoint_every"] = cfg.checkpoint_every;
    meta["extra"] = cfg.extra_metadata;
    std::ofstream(cfg.output_dir / "run_metadata.json") << meta.dump(2) << '\n';
    log.open(cfg.output_dir / "train_log.csv", std::ios::trunc);
    log << std::setprecision(10) << kLogHeader << '\n';
    log.flush();
    checkpoint("checkpoint_initial.bin", 0);
  }

  TrainResult result;
  for (std::int64_t it = 1; it <= cfg.ppo.iterations; ++it) {
    const nn::NetworkPolicy snapshot(learner.params());
    auto chunks = collect(envs, snapshot, cfg.ppo.update_interval_steps, cfg.workers);

    std::vector<env::Trajectory> pool;
    IterationLog row;
    row.iteration = it;
    for (auto& c : chunks) {
      row.los_events += c.los_events;
      row.episodes_finished += c.finished_episodes.size();
      for (auto& t : c.trajectories) pool.push_back(std::move(t));
    }
    for (const auto& traj : pool) {
      for (const auto& t : traj.steps) {
        row.mean_reward += t.reward;
        row.mean_noise += t.components.noise;
        row.mean_sep += t.components.sep;
        row.mean_energy += t.components.energy;
        ++row.transitions;
      }
    }
    if (row.transitions > 0) {
      const double n = static_cast<double>(row.transitions);
      row.mean_reward /= n;
      row.mean_noise /= n;
      row.mean_sep /= n;
      row.mean_energy /= n;
    }

    const auto samples = build_samples(pool, cfg.ppo);
    try {
      const auto stats = learner.update(samples);
      row.entropy = stats.entropy;
      row.clip_fraction = stats.clip_fraction;
      row.approx_kl = stats.approx_kl;
      row.loss = stats.loss;
      row.update_skipped = stats.minibatches == 0;
    } catch (const NonFiniteLoss&) {
      row.update_skipped = true;
    }

    if (write) {
      write_log_row(log, row);
      log.flush();
    }
    if (cfg.on_iteration) cfg.on_iteration(row);
    result.log.push_back(row);
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it != cfg.ppo.iterations)
      checkpoint("checkpoint_" + std::to_string(it) + ".bin", it);
  }
  if (cfg.ppo.iterations > 0) checkpoint("checkpoint_final.bin", cfg.ppo.iterations);
  result.params = learner.params();
  return result;
}

}  // namespace uam::ppo
