#include "uam/noise.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uam/errors.hpp"

namespace uam::noise {

namespace {

struct Row {
  OperatingMode mode;
  MicPosition position;
  double c0, c1, c2;
};

constexpr std::array<Row, 6> kTable = {{
    {OperatingMode::L, MicPosition::Centerline, 88.09, 3.21, -2.62},
    {OperatingMode::L, MicPosition::Side, 78.01, 7.26, -3.39},
    {OperatingMode::D, MicPosition::Centerline, 84.05, 8.76, -4.18},
    {OperatingMode::D, MicPosition::Side, 77.34, 11.34, -4.72},
    {OperatingMode::A, MicPosition::Centerline, 93.35, 5.17, -2.86},
    {OperatingMode::A, MicPosition::Side, 85.55, 6.83, -3.14},
}};

}  // namespace

NpdCondition npd_condition(OperatingMode mode, MicPosition position) {
  for (const auto& r : kTable)
    if (r.mode == mode && r.position == position) return {r.mode, r.position, r.c0, r.c1, r.c2};
  throw OutOfRange("no NPD condition for the requested mode/position");
}

std::array<NpdCondition, 6> npd_conditions() {
  std::array<NpdCondition, 6> out;
  for (std::size_t i = 0; i < kTable.size(); ++i)
    out[i] = {kTable[i].mode, kTable[i].position, kTable[i].c0, kTable[i].c1, kTable[i].c2};
  return out;
}

std::string to_string(const NpdCondition& c) {
  const char* mode = c.mode == OperatingMode::L ? "L" : c.mode == OperatingMode::D ? "D" : "A";
  std::ostringstream os;
  os << "Mode " << mode << " - " << (c.position == MicPosition::Centerline ? "Centerline" : "Side");
  return os.str();
}

double npd_sel(double distance_ft, const NpdCondition& c) {
  if (!(distance_ft >= kMinDistanceFt && distance_ft <= kMaxDistanceFt)) {
    std::ostringstream os;
    os << "NPD distance " << distance_ft << " ft outside [" << kMinDistanceFt << ", " << kMaxDistanceFt << "] ft";
    throw OutOfRange(os.str());
  }
  const double l = std::log10(distance_ft);
  return c.c0 + c.c1 * l + c.c2 * l * l;
}

NoiseConfig NoiseConfig::from_regression(const NpdCondition& condition, double z_low_ft, double z_high_ft) {
  NoiseConfig cfg;
  cfg.z_low_ft = z_low_ft;
  cfg.z_high_ft = z_high_ft;
  cfg.n_max_db = npd_sel(z_low_ft, condition);
  cfg.n_min_db = npd_sel(z_high_ft, condition);
  return cfg;
}

double normalized_noise(double altitude_ft, const NoiseConfig& cfg, const NpdCondition& condition) {
  const double z = std::clamp(altitude_ft, kMinDistanceFt, kMaxDistanceFt);
  const double v = (npd_sel(z, condition) - cfg.n_min_db) / (cfg.n_max_db - cfg.n_min_db);
  return std::clamp(v, 0.0, 1.0);
}

void ZoneNoiseAccumulator::accumulate(double sel_db, double weight) {
  energy_sum_ += weight * std::pow(10.0, sel_db / 10.0);
}

double ZoneNoiseAccumulator::cumulative_db(double offset_db) const {
  if (empty()) throw EmptyAccumulator();
  return 10.0 * std::log10(energy_sum_) - offset_db;
}

double ZoneNoiseAccumulator::cumulative_increase(double offset_db) const {
  return cumulative_db(offset_db) - ambient_db_;
}

}  // namespace uam::noise
