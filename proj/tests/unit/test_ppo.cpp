#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "../support/gradcheck.hpp"
#include "uam/errors.hpp"
#include "uam/ppo.hpp"

using namespace uam;
using namespace uam::ppo;

namespace {

std::vector<env::Transition> make_traj(const std::vector<double>& r, const std::vector<double>& v,
                                       const std::vector<double>& next_v, bool terminal) {
  std::vector<env::Transition> t(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    t[k].reward = r[k];
    t[k].value = v[k];
    t[k].next_value = next_v[k];
  }
  if (terminal) {
    t.back().done = true;
    t.back().next_value = 0.0;
  }
  return t;
}

std::vector<nn::Sample> snapshot_batch(const nn::ParameterSet& p, Rng& rng, std::size_t n) {
  std::vector<nn::Sample> batch(n);
  for (auto& s : batch) {
    s.obs = testing::random_observation(rng, rng.below(4));
    const auto out = nn::forward(p, s.obs);
    s.action = static_cast<int>(rng.below(3));
    s.old_log_prob = std::log(out.probs[static_cast<std::size_t>(s.action)]);
    s.advantage = rng.normal();
    s.ret = out.value + rng.normal();
  }
  return batch;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TrainConfig tiny_train_config() {
  TrainConfig tc;
  tc.index = testing::make_index(testing::line_scenario(12000.0, {0.0, 60.0}, {0.0, 60.0}));
  tc.dims.hidden = 16;
  tc.ppo.iterations = 6;
  tc.ppo.parallel_sims = 3;
  tc.ppo.batch_size = 32;
  tc.ppo.epochs = 2;
  tc.ppo.learning_rate = 1e-3;
  tc.ppo.seed = 42;
  tc.workers = 1;
  tc.checkpoint_every = 2;
  return tc;
}

}  // namespace

TEST_SUITE("ppo") {
  TEST_CASE("single terminal step") {
    const auto t = make_traj({2.5}, {1.0}, {7.0}, true);
    const auto a = compute_advantages(t, 1.0, 0.95);
    CHECK(a.advantages[0] == 1.5);
    CHECK(a.returns[0] == 2.5);
  }

  TEST_CASE("null trajectory") {
    const auto t = make_traj({0, 0, 0}, {0, 0, 0}, {0, 0, 0}, false);
    for (double x : compute_advantages(t, 0.99, 0.95).advantages) CHECK(x == 0.0);
    CHECK_THROWS_AS(compute_advantages({}, 0.99, 0.95), EmptyTrajectory);
  }

  TEST_CASE("hand-rolled estimators on a 5-step trajectory") {
    const std::vector<double> r = {0.3, -1.0, 0.0, 2.0, -0.5};
    const std::vector<double> v = {0.1, 0.4, -0.2, 0.7, 0.05};
    const std::vector<double> nv = {0.4, -0.2, 0.7, 0.05, 0.9};  // last bootstraps a truncated tail
    const double g = 0.9;
    for (bool terminal : {false, true}) {
      const auto t = make_traj(r, v, nv, terminal);
      std::vector<double> delta(5);
      for (int k = 0; k < 5; ++k) {
        const double boot = (terminal && k == 4) ? 0.0 : nv[k];
        delta[k] = r[k] + g * boot - v[k];
      }
      // lambda = 0: one-step TD errors.
      const auto td = compute_advantages(t, g, 0.0);
      for (int k = 0; k < 5; ++k) CHECK(td.advantages[k] == doctest::Approx(delta[k]).epsilon(1e-14));
      // lambda = 0.8: explicit weighted sum.
      const double lam = 0.8;
      const auto gae = compute_advantages(t, g, lam);
      for (int k = 0; k < 5; ++k) {
        double a = 0.0;
        for (int l = k; l < 5; ++l) a += std::pow(g * lam, l - k) * delta[l];
        CHECK(gae.advantages[k] == doctest::Approx(a).epsilon(1e-13));
        CHECK(gae.returns[k] == doctest::Approx(a + v[k]).epsilon(1e-13));
      }
      // Discounted return.
      const auto dr = compute_advantages(t, g, lam, AdvantageEstimator::DiscountedReturn);
      for (int k = 0; k < 5; ++k) {
        double ret = terminal ? 0.0 : std::pow(g, 5 - k) * nv[4];
        for (int l = k; l < 5; ++l) ret += std::pow(g, l - k) * r[l];
        CHECK(dr.returns[k] == doctest::Approx(ret).epsilon(1e-13));
        CHECK(dr.advantages[k] == doctest::Approx(ret - v[k]).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("normalization") {
    std::vector<double> x = {1, 2, 3, 4, 10};
    normalize(x);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / 5.0;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var / 5.0 == doctest::Approx(1.0));
    std::vector<double> flat = {3, 3, 3};
    normalize(flat);
    for (double v : flat) CHECK(v == 0.0);
  }

  TEST_CASE("zero learning rate leaves parameters unchanged") {
    const auto p = testing::gradcheck_params(1, 16);
    PpoConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.batch_size = 16;
    Learner learner(p, cfg);
    Rng rng(2);
    const auto batch = snapshot_batch(p, rng, 40);
    const auto stats = learner.update(batch);
    CHECK(stats.minibatches == 6 * 2);
    CHECK(learner.params() == p);
  }

  TEST_CASE("updates are deterministic for a seed") {
    const auto p = testing::gradcheck_params(3, 16);
    PpoConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 16;
    Rng rng(4);
    const auto batch = snapshot_batch(p, rng, 50);
    Learner a(p, cfg), b(p, cfg);
    a.update(batch);
    b.update(batch);
    CHECK(a.params() == b.params());
    CHECK_FALSE(a.params() == p);
  }

  TEST_CASE("a pool smaller than the batch size is one minibatch") {
    const auto p = testing::gradcheck_params(5, 8);
    PpoConfig cfg;
    cfg.batch_size = 512;
    cfg.epochs = 3;
    Learner learner(p, cfg);
    Rng rng(6);
    CHECK(learner.update(snapshot_batch(p, rng, 20)).minibatches == 3);
  }

  TEST_CASE("non-finite loss restores the learner") {
    const auto p = testing::gradcheck_params(7, 8);
    PpoConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 4;
    Learner learner(p, cfg);
    Rng rng(8);
    auto batch = snapshot_batch(p, rng, 8);
    batch[5].ret = std::nan("");
    CHECK_THROWS_AS(learner.update(batch), NonFiniteLoss);
    CHECK(learner.params() == p);
  }

  TEST_CASE("updates lower the loss on their own batch") {
    int improved = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto p = testing::gradcheck_params(100 + trial, 16);
      PpoConfig cfg;
      cfg.learning_rate = 1e-4;
      cfg.batch_size = 32;
      cfg.seed = trial;
      Rng rng(200 + trial);
      const auto batch = snapshot_batch(p, rng, 64);
      const double before = nn::ppo_loss(p, batch, cfg.loss_spec(), nullptr).loss;
      Learner learner(p, cfg);
      learner.update(batch);
      const double after = nn::ppo_loss(learner.params(), batch, cfg.loss_spec(), nullptr).loss;
      if (after <= before) ++improved;
    }
    CHECK(improved >= 40);
  }

  TEST_CASE("a large entropy bonus drives the policy to uniform") {
    const auto p = testing::gradcheck_params(9, 16);
    PpoConfig cfg;
    cfg.entropy_coeff = 10.0;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 1;
    cfg.batch_size = 64;
    Rng rng(10);
    auto batch = snapshot_batch(p, rng, 64);
    for (auto& s : batch) s.advantage = 0.0;
    Learner learner(p, cfg);
    const double start = nn::ppo_loss(p, batch, cfg.loss_spec(), nullptr).entropy;
    for (int it = 0; it < 100; ++it) learner.update(batch);
    const double end = nn::ppo_loss(learner.params(), batch, cfg.loss_spec(), nullptr).entropy;
    CHECK(start < std::log(3.0) - 0.05);
    CHECK(std::abs(end - std::log(3.0)) < 0.01);
  }

  TEST_CASE("config JSON round trip and validation") {
    PpoConfig c;
    c.learning_rate = 3e-4;
    c.estimator = AdvantageEstimator::DiscountedReturn;
    const auto back = ppo_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK_THROWS_AS(ppo_config_from_json({{"nonsense", 1}}), ConfigError);
    CHECK_THROWS_AS(ppo_config_from_json({{"clip_epsilon", 0.0}}), ConfigError);
    CHECK_THROWS_AS(ppo_config_from_json({{"gamma", 1.5}}), ConfigError);
    CHECK_THROWS_AS(ppo_config_from_json({{"batch_size", 0}}), ConfigError);
  }

  TEST_CASE("zero iterations: initial checkpoint and an empty log") {
    auto tc = tiny_train_config();
    tc.ppo.iterations = 0;
    tc.output_dir = std::filesystem::temp_directory_path() / "uam_ppo_zero";
    std::filesystem::remove_all(tc.output_dir);
    const auto res = train(tc);
    CHECK(res.log.empty());
    CHECK(std::filesystem::exists(tc.output_dir / "checkpoint_initial.bin"));
    CHECK_FALSE(std::filesystem::exists(tc.output_dir / "checkpoint_final.bin"));
    const auto log = slurp(tc.output_dir / "train_log.csv");
    CHECK(std::count(log.begin(), log.end(), '\n') == 1);
    CHECK(log.rfind("iteration,mean_reward,mean_noise_component,mean_sep_component,mean_energy_component,entropy,"
                    "clip_fraction,los_events",
                    0) == 0);
    std::filesystem::remove_all(tc.output_dir);
  }

  TEST_CASE("training is reproducible and independent of worker count") {
    auto tc = tiny_train_config();
    tc.output_dir = std::filesystem::temp_directory_path() / "uam_ppo_run";
    std::filesystem::remove_all(tc.output_dir);
    const auto a = train(tc);
    CHECK(std::filesystem::exists(tc.output_dir / "checkpoint_2.bin"));
    CHECK(std::filesystem::exists(tc.output_dir / "checkpoint_final.bin"));
    CHECK(std::filesystem::exists(tc.output_dir / "run_metadata.json"));
    const auto log = slurp(tc.output_dir / "train_log.csv");
    CHECK(std::count(log.begin(), log.end(), '\n') == 7);
    std::filesystem::remove_all(tc.output_dir);

    tc.output_dir.clear();
    const auto b = train(tc);
    tc.workers = 3;
    const auto c = train(tc);
    CHECK(a.params == b.params);
    CHECK(a.params == c.params);
    REQUIRE(a.log.size() == 6);
    for (const auto& row : a.log) {
      CHECK(row.entropy >= 0.0);
      CHECK(row.entropy <= std::log(3.0) + 1e-12);
    }
  }
}
