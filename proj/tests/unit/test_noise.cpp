#include <doctest.h>

#include <cmath>

#include "uam/errors.hpp"
#include "uam/noise.hpp"
#include "uam/rng.hpp"

using namespace uam;
using namespace uam::noise;

namespace {

// Mode L centerline regression evaluated directly.
double mode_l_centerline(double z) {
  const double x = std::log10(z);
  return 88.09 + 3.21 * x - 2.62 * x * x;
}

}  // namespace

TEST_SUITE("noise") {
  TEST_CASE("Mode L centerline reference values") {
    const auto c = default_condition();
    CHECK(std::abs(npd_sel(1000.0, c) - 74.14) < 0.01);
    CHECK(std::abs(npd_sel(200.0, c) - 81.60) < 0.01);
    CHECK(std::abs(npd_sel(3000.0, c) - 67.57) < 0.05);
  }

  TEST_CASE("hand-evaluated regression agrees at arbitrary distances") {
    // Coefficients transcribed independently of the library table.
    for (double z : {200.0, 450.0, 1000.0, 2000.0, 7777.0, 20000.0})
      CHECK(npd_sel(z, default_condition()) == doctest::Approx(mode_l_centerline(z)).epsilon(1e-12));
  }

  TEST_CASE("every condition is strictly decreasing over the validity window") {
    for (const auto& c : npd_conditions()) {
      double prev = npd_sel(kMinDistanceFt, c);
      for (int k = 1; k <= 4000; ++k) {
        const double z = kMinDistanceFt + (kMaxDistanceFt - kMinDistanceFt) * k / 4000.0;
        const double v = npd_sel(z, c);
        CHECK_MESSAGE(v < prev, to_string(c) << " at " << z);
        prev = v;
      }
    }
  }

  TEST_CASE("distances outside the window are rejected") {
    CHECK_THROWS_AS(npd_sel(199.9, default_condition()), OutOfRange);
    CHECK_THROWS_AS(npd_sel(20000.1, default_condition()), OutOfRange);
  }

  TEST_CASE("accumulation follows the energy-domain definition") {
    ZoneNoiseAccumulator acc(60.0);
    CHECK(acc.empty());
    CHECK_THROWS_AS(acc.cumulative_increase(), EmptyAccumulator);
    acc.accumulate(74.14);
    CHECK(acc.energy_sum() == doctest::Approx(std::pow(10.0, 7.414)).epsilon(1e-14));
    CHECK(acc.cumulative_increase() == doctest::Approx(74.14 - 35.56 - 60.0).epsilon(1e-12));
    CHECK(std::abs(acc.cumulative_increase() - (-21.42)) < 1e-9);

    ZoneNoiseAccumulator doubled = acc;
    doubled.accumulate(74.14);
    CHECK(std::abs(doubled.cumulative_increase() - acc.cumulative_increase() - 10.0 * std::log10(2.0)) < 1e-9);

    ZoneNoiseAccumulator halves(60.0);
    halves.accumulate(74.14, 0.5);
    halves.accumulate(74.14, 0.5);
    CHECK(halves.energy_sum() == doctest::Approx(acc.energy_sum()).epsilon(1e-15));
  }

  TEST_CASE("N identical events raise the increase by 10 log10 N") {
    for (int n : {1, 2, 5, 10, 137}) {
      ZoneNoiseAccumulator acc(50.0);
      for (int k = 0; k < n; ++k) acc.accumulate(70.0);
      CHECK(acc.cumulative_increase() - (70.0 - 35.56 - 50.0) == doctest::Approx(10.0 * std::log10(n)).epsilon(1e-12));
    }
  }

  TEST_CASE("offset cancellation") {
    ZoneNoiseAccumulator acc(0.0);
    acc.accumulate(35.56);
    CHECK(std::abs(acc.cumulative_increase()) < 1e-12);
  }

  TEST_CASE("merge matches pooled accumulation and is commutative") {
    Rng rng(5);
    ZoneNoiseAccumulator a(60.0), b(60.0), pooled(60.0);
    for (int k = 0; k < 50; ++k) {
      const double e = rng.uniform(60.0, 80.0);
      (k % 2 ? a : b).accumulate(e);
      pooled.accumulate(e);
    }
    ZoneNoiseAccumulator ab = a, ba = b;
    ab.merge(b);
    ba.merge(a);
    CHECK(ab.energy_sum() == ba.energy_sum());
    CHECK(std::abs(ab.cumulative_increase() - pooled.cumulative_increase()) < 1e-9);
    const double expected = 10.0 * std::log10(a.energy_sum() + b.energy_sum()) - 35.56 - 60.0;
    CHECK(std::abs(ab.cumulative_increase() - expected) < 1e-12);
  }

  TEST_CASE("normalized noise endpoints and monotonicity") {
    const auto cfg = NoiseConfig::from_regression();
    CHECK(normalized_noise(1000.0, cfg) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(normalized_noise(3000.0, cfg) == doctest::Approx(0.0).epsilon(1e-12));
    const double mid = normalized_noise(2000.0, cfg);
    const double expect = (mode_l_centerline(2000.0) - mode_l_centerline(3000.0)) /
                          (mode_l_centerline(1000.0) - mode_l_centerline(3000.0));
    CHECK(mid == doctest::Approx(expect).epsilon(1e-12));
    double prev = 2.0;
    for (double z = 900.0; z <= 3100.0; z += 10.0) {
      const double v = normalized_noise(z, cfg);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v <= prev);
      prev = v;
    }
  }

  TEST_CASE("tabulated endpoints keep the minimum within the clamp tolerance") {
    const NoiseConfig table{};  // 67.54 / 74.14
    CHECK(normalized_noise(1000.0, table) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(normalized_noise(3000.0, table) < 0.01);
  }

  TEST_CASE("all six conditions are distinct and named") {
    const auto all = npd_conditions();
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j) CHECK(to_string(all[i]) != to_string(all[j]));
  }
}
