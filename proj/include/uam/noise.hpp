#pragma once

// Single-event NPD regression, cumulative noise increase over ambient, and the
// normalized noise term used by the reward.

#include <array>
#include <string>

namespace uam::noise {

enum class OperatingMode { L, D, A };
enum class MicPosition { Centerline, Side };

/// Regression coefficients for one (mode, position) condition. Only the six
/// fitted conditions exist; build them with `npd_condition`.
struct NpdCondition {
  OperatingMode mode = OperatingMode::L;
  MicPosition position = MicPosition::Centerline;
  double c0 = 0.0;  // dB
  double c1 = 0.0;  // dB per log10(ft)
  double c2 = 0.0;  // dB per log10(ft)^2
};

NpdCondition npd_condition(OperatingMode mode, MicPosition position);

/// All six fitted conditions, in table order.
std::array<NpdCondition, 6> npd_conditions();

/// Condition used for flyover noise everywhere in the simulator.
inline NpdCondition default_condition() { return npd_condition(OperatingMode::L, MicPosition::Centerline); }

std::string to_string(const NpdCondition& c);

inline constexpr double kMinDistanceFt = 200.0;
inline constexpr double kMaxDistanceFt = 20000.0;

/// Offset subtracted from the cumulative level (numerically 10*log10(3600)).
inline constexpr double kSelToLeqOffsetDb = 35.56;

/// SEL in dB(A) at slant distance `distance_ft`. Throws OutOfRange outside
/// [200, 20000] ft.
double npd_sel(double distance_ft, const NpdCondition& condition);

struct NoiseConfig {
  double z_low_ft = 1000.0;   // altitude of maximum noise
  double z_high_ft = 3000.0;  // altitude of minimum noise
  double n_min_db = 67.54;    // rounded tabulated value; see normalized()
  double n_max_db = 74.14;
  double sel_to_leq_offset_db = kSelToLeqOffsetDb;

  /// Endpoints taken from the regression itself at z_high/z_low, so that the
  /// normalized term is exactly 0 and 1 there.
  static NoiseConfig from_regression(const NpdCondition& condition = default_condition(), double z_low_ft = 1000.0,
                                     double z_high_ft = 3000.0);
};

/// (SEL(z) - n_min) / (n_max - n_min), clamped to [0, 1].
double normalized_noise(double altitude_ft, const NoiseConfig& cfg, const NpdCondition& condition = default_condition());

/// Energy-domain accumulation of SEL events for one zone.
class ZoneNoiseAccumulator {
 public:
  ZoneNoiseAccumulator() = default;
  explicit ZoneNoiseAccumulator(double ambient_db, double energy_sum = 0.0)
      : energy_sum_(energy_sum), ambient_db_(ambient_db) {}

  /// energy_sum += weight * 10^(sel/10). weight must be positive.
  void accumulate(double sel_db, double weight = 1.0);

  /// Energy-domain merge; the ambient level of `*this` is kept.
  void merge(const ZoneNoiseAccumulator& other) { energy_sum_ += other.energy_sum_; }

  double energy_sum() const noexcept { return energy_sum_; }
  double ambient_db() const noexcept { return ambient_db_; }
  bool empty() const noexcept { return energy_sum_ == 0.0; }

  /// 10*log10(sum) - offset. Throws EmptyAccumulator when empty.
  double cumulative_db(double offset_db = kSelToLeqOffsetDb) const;

  /// cumulative_db() - ambient. Throws EmptyAccumulator when empty.
  double cumulative_increase(double offset_db = kSelToLeqOffsetDb) const;

 private:
  double energy_sum_ = 0.0;
  double ambient_db_ = 0.0;
};

inline ZoneNoiseAccumulator accumulate_event(ZoneNoiseAccumulator acc, double sel_db, double weight) {
  acc.accumulate(sel_db, weight);
  return acc;
}

inline double cumulative_increase(const ZoneNoiseAccumulator& acc) { return acc.cumulative_increase(); }

}  // namespace uam::noise
