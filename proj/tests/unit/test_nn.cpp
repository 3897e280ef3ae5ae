#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "../support/gradcheck.hpp"
#include "uam/errors.hpp"

using namespace uam;
using namespace uam::nn;

namespace {

constexpr std::array kBlocks = {Block::OwnW, Block::OwnB,   Block::NbrW,   Block::NbrB, Block::AttW1,  Block::CtxW2,
                                Block::TrunkW, Block::TrunkB, Block::PiW, Block::PiB, Block::ValueW, Block::ValueB};

double sum_sq(const ParameterSet& p, Block b) { return p[b].squaredNorm(); }

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("init is deterministic, seed-dependent and validates widths") {
    Dims d;
    d.hidden = 16;
    CHECK(init_params(3, d) == init_params(3, d));
    CHECK_FALSE(init_params(3, d) == init_params(4, d));
    const auto p = init_params(3, d);
    CHECK(p.all_finite());
    CHECK(p[Block::OwnB].isZero());
    CHECK(p[Block::TrunkB].isZero());
    Dims bad = d;
    bad.own_in = 9;
    CHECK_THROWS_AS(init_params(3, bad), ConfigError);
    bad = d;
    bad.nbr_in = 4;
    CHECK_THROWS_AS(init_params(3, bad), ConfigError);
  }

  TEST_CASE("default shapes") {
    ParameterSet p;
    CHECK(p.shape(Block::AttW1) == std::pair{256, 256});
    CHECK(p.shape(Block::CtxW2) == std::pair{256, 256});
    CHECK(p.shape(Block::TrunkW) == std::pair{256, 512});
    CHECK(p.shape(Block::PiW) == std::pair{3, 256});
    CHECK(p.shape(Block::ValueW) == std::pair{1, 256});
  }

  TEST_CASE("softmax outputs form a distribution") {
    const auto p = testing::gradcheck_params(1, 32);
    Rng rng(2);
    for (int k = 0; k < 200; ++k) {
      const auto out = forward(p, testing::random_observation(rng, rng.below(12)));
      double s = 0.0;
      for (double v : out.probs) {
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
      CHECK(std::isfinite(out.value));
    }
  }

  TEST_CASE("attention: singleton, twins, permutation, empty set") {
    const auto p = testing::gradcheck_params(5, 16);
    Rng rng(6);
    ForwardCache c;

    auto one = testing::random_observation(rng, 1);
    forward(p, std::span<const env::Observation>(&one, 1), c);
    CHECK(c.alpha(0) == 1.0);

    auto twins = testing::random_observation(rng, 1);
    twins.neighbors.push_back(twins.neighbors[0]);
    forward(p, std::span<const env::Observation>(&twins, 1), c);
    CHECK(c.alpha(0) == 0.5);
    CHECK(c.alpha(1) == 0.5);

    auto empty = testing::random_observation(rng, 0);
    forward(p, std::span<const env::Observation>(&empty, 1), c);
    CHECK(c.c.isZero());

    for (int trial = 0; trial < 50; ++trial) {
      auto o = testing::random_observation(rng, 2 + rng.below(12));
      const auto base = forward(p, o);
      auto shuffled = o;
      rng.shuffle(std::span(shuffled.neighbors));
      const auto perm = forward(p, shuffled);
      CHECK(perm.probs == base.probs);
      CHECK(perm.value == base.value);
    }
  }

  TEST_CASE("batched forward equals one-at-a-time forward") {
    const auto p = testing::gradcheck_params(8, 16);
    Rng rng(9);
    std::vector<env::Observation> batch;
    for (int k = 0; k < 20; ++k) batch.push_back(testing::random_observation(rng, rng.below(6)));
    ForwardCache c;
    forward(p, batch, c);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto single = forward(p, batch[i]);
      for (int a = 0; a < 3; ++a)
        CHECK(c.probs(a, static_cast<Eigen::Index>(i)) == doctest::Approx(single.probs[a]).epsilon(1e-12));
      CHECK(c.values(static_cast<Eigen::Index>(i)) == doctest::Approx(single.value).epsilon(1e-12));
    }
  }

  TEST_CASE("gradient matches finite differences for every block (small network)") {
    LossSpec spec{0.4, 0.5, 0.1, 1.0};
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto p = testing::gradcheck_params(seed, 6);
      Rng rng(100 + seed);
      const auto batch = testing::gradcheck_batch(p, rng, 12, spec.clip_epsilon);
      for (auto b : kBlocks) {
        const auto r = testing::gradcheck_block(p, batch, spec, b);
        CHECK_MESSAGE(r.worst_rel < 1e-4, block_name(b) << " worst relative error " << r.worst_rel);
      }
    }
  }

  TEST_CASE("zeroed objectives leave only the entropy gradient") {
    const auto p = testing::gradcheck_params(11, 8);
    Rng rng(12);
    auto batch = testing::gradcheck_batch(p, rng, 10, 0.4);
    for (auto& s : batch) {
      s.advantage = 0.0;
      s.ret = forward(p, s.obs).value;
    }
    ParameterSet g_pol_val(p.dims());
    ppo_loss(p, batch, {0.4, 0.01, 0.0, 1.0}, &g_pol_val);
    for (auto b : kBlocks) CHECK(sum_sq(g_pol_val, b) < 1e-24);

    ParameterSet g_ent(p.dims());
    ppo_loss(p, batch, {0.4, 0.01, 0.01, 1.0}, &g_ent);
    CHECK(g_ent[Block::PiW].cwiseAbs().maxCoeff() > 1e-8);
    CHECK(g_ent[Block::ValueW].cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
    const auto p = testing::gradcheck_params(13, 8);
    Rng rng(14);
    const auto batch = testing::gradcheck_batch(p, rng, 9, 0.4);
    auto doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    ParameterSet g1(p.dims()), g2(p.dims());
    const auto l1 = ppo_loss(p, batch, {}, &g1);
    const auto l2 = ppo_loss(p, doubled, {}, &g2);
    CHECK(l1.loss == doctest::Approx(l2.loss).epsilon(1e-12));
    for (std::size_t k = 0; k < g1.size(); ++k)
      CHECK(g1.flat()[k] == doctest::Approx(g2.flat()[k]).epsilon(1e-9).scale(1e-12));
  }

  TEST_CASE("clip arithmetic") {
    CHECK(clipped_surrogate(1.5, 2.0, 0.4) == doctest::Approx(2.8));
    CHECK(clipped_surrogate(0.5, -1.0, 0.4) == doctest::Approx(-0.6));
    CHECK(clipped_surrogate(1.0, 3.0, 0.4) == 3.0);
    CHECK(huber(0.5, 1.0) == 0.125);
    CHECK(huber(-3.0, 1.0) == 2.5);
  }

  TEST_CASE("identity ratio: no clipping, zero divergence") {
    const auto p = testing::gradcheck_params(15, 8);
    Rng rng(16);
    auto batch = testing::gradcheck_batch(p, rng, 20, 0.4);
    for (auto& s : batch) s.old_log_prob = std::log(forward(p, s.obs).probs[static_cast<std::size_t>(s.action)]);
    const auto d = ppo_loss(p, batch, {}, nullptr);
    CHECK(d.clip_fraction == 0.0);
    CHECK(std::abs(d.approx_kl) < 1e-12);
    CHECK(d.entropy >= 0.0);
    CHECK(d.entropy <= std::log(3.0) + 1e-12);
  }

  TEST_CASE("errors") {
    const auto p = testing::gradcheck_params(17, 8);
    CHECK_THROWS_AS(ppo_loss(p, {}, {}, nullptr), ShapeError);
    Rng rng(18);
    auto batch = testing::gradcheck_batch(p, rng, 4, 0.4);
    batch[0].ret = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ppo_loss(p, batch, {}, nullptr), NonFiniteLoss);
  }

  TEST_CASE("checkpoint round trip preserves outputs bitwise") {
    const auto p = testing::gradcheck_params(19, 24);
    const auto path = std::filesystem::temp_directory_path() / "uam_nn_ckpt.bin";
    save_checkpoint(path, p, {{"iteration", 7}, {"seed", 19}});
    const auto ck = load_checkpoint(path);
    CHECK(ck.params == p);
    CHECK(ck.metadata.at("iteration") == 7);
    Rng rng(20);
    for (int k = 0; k < 10; ++k) {
      const auto o = testing::random_observation(rng, rng.below(5));
      CHECK(forward(ck.params, o).probs == forward(p, o).probs);
    }

    {
      std::ofstream junk(path, std::ios::binary | std::ios::trunc);
      junk << "not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    save_checkpoint(path, p);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
  }
}
