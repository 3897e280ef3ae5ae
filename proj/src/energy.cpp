#include "uam/energy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "uam/errors.hpp"
#include "uam/geometry.hpp"

namespace uam::energy {

namespace {

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Parasite plus induced drag at airspeed v (m/s) and density rho.
double drag_n(double rho, double v_mps, const EnergyParams& p) {
  const double q_s = 0.5 * rho * v_mps * v_mps * p.ref_area_m2;
  const double weight = p.mass_kg * p.g;
  return q_s * p.cd0 + weight * weight / (4.0 * p.cd0 * p.ld_max * p.ld_max * q_s);
}

double climb_seconds(double cruise_alt_ft, const EnergyParams& p) {
  return (cruise_alt_ft - p.hover_leg_ft) / p.roc_ftpm * 60.0;
}

}  // namespace

void EnergyParams::validate() const {
  auto eff = [](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in (0, 1]");
  };
  auto pos = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  eff(eta_hover, "eta_hover");
  eff(eta_climb, "eta_climb");
  eff(eta_cruise, "eta_cruise");
  eff(descent_power_fraction, "descent_power_fraction");
  pos(mass_kg, "mass_kg");
  pos(g, "g");
  pos(disk_loading, "disk_loading");
  pos(ld_max, "ld_max");
  pos(cd0, "cd0");
  pos(ref_area_m2, "ref_area_m2");
  pos(flight_path_angle_deg, "flight_path_angle_deg");
  pos(roc_ftpm, "roc_ftpm");
  pos(v_cruise_ftps, "v_cruise_ftps");
  pos(hover_leg_ft, "hover_leg_ft");
  pos(hover_leg_duration_s, "hover_leg_duration_s");
}

double air_density(double alt_ft) {
  if (!(alt_ft >= 0.0 && alt_ft <= 10000.0)) {
    std::ostringstream os;
    os << "density model valid for 0-10000 ft, got " << alt_ft;
    throw OutOfRange(os.str());
  }
  return kSeaLevelDensity + (kDensityAt10kFt - kSeaLevelDensity) * alt_ft / 10000.0;
}

double climb_speed_ftps(const EnergyParams& p) {
  return p.roc_ftpm / (std::sin(deg_to_rad(p.flight_path_angle_deg)) * 60.0);
}

double hover_power(const EnergyParams& p) {
  return p.mass_kg * p.g / p.eta_hover * std::sqrt(p.disk_loading / (2.0 * kSeaLevelDensity));
}

double climb_power(double cruise_alt_ft, const EnergyParams& p) {
  const double mid_ft = (cruise_alt_ft - p.hover_leg_ft) / 2.0 + p.hover_leg_ft;
  const double rho = air_density(mid_ft);
  const double v = feet_to_meters(climb_speed_ftps(p));
  const double gamma = deg_to_rad(p.flight_path_angle_deg);
  return v / p.eta_climb * (p.mass_kg * p.g * std::sin(gamma) + drag_n(rho, v, p));
}

double cruise_power(double alt_ft, const EnergyParams& p) {
  const double v = feet_to_meters(p.v_cruise_ftps);
  return v / p.eta_cruise * drag_n(air_density(alt_ft), v, p);
}

double descent_power(double alt_ft, const EnergyParams& p) {
  return p.descent_power_fraction * cruise_power(alt_ft, p);
}

double climb_descent_distance_ft(double cruise_alt_ft, const EnergyParams& p) {
  // Horizontal speed during climb/descent, times both segments' durations.
  const double horizontal_ftps = p.roc_ftpm / std::tan(deg_to_rad(p.flight_path_angle_deg)) / 60.0;
  return horizontal_ftps * climb_seconds(cruise_alt_ft, p) * 2.0;
}

MissionEnergy mission_energy(double route_distance_ft, double cruise_alt_ft, const EnergyParams& p) {
  MissionEnergy m;
  m.cruise_alt_ft = cruise_alt_ft;
  m.route_distance_ft = route_distance_ft;
  const double d_cruise = route_distance_ft - climb_descent_distance_ft(cruise_alt_ft, p);
  if (!(d_cruise > 0.0)) {
    std::ostringstream os;
    os << "route of " << route_distance_ft << " ft leaves no cruise segment at " << cruise_alt_ft << " ft";
    throw RouteTooShort(os.str());
  }
  const double t_climb = climb_seconds(cruise_alt_ft, p);
  m.e_hover_j = hover_power(p) * 2.0 * p.hover_leg_duration_s;
  m.e_climb_j = climb_power(cruise_alt_ft, p) * t_climb;
  m.e_cruise_j = cruise_power(cruise_alt_ft, p) * d_cruise / p.v_cruise_ftps;
  m.e_descent_j = descent_power(cruise_alt_ft, p) * t_climb;
  m.e_total_j = m.e_hover_j + m.e_climb_j + m.e_cruise_j + m.e_descent_j;
  return m;
}

double extra_energy_ratio(double route_distance_ft, double alt_ft, const EnergyParams& p, double baseline_alt_ft) {
  return mission_energy(route_distance_ft, alt_ft, p).e_total_j /
             mission_energy(route_distance_ft, baseline_alt_ft, p).e_total_j -
         1.0;
}

double trajectory_energy(const FlightProfile& f, const EnergyParams& p) {
  double e = hover_power(p) * 2.0 * p.hover_leg_duration_s;
  e += climb_power(f.initial_level_ft, p) * climb_seconds(f.initial_level_ft, p);
  for (std::size_t i = 0; i < f.levels_ft.size(); ++i) {
    const double level = f.levels_ft[i];
    if (i < f.level_seconds.size()) e += cruise_power(level, p) * f.level_seconds[i];
    if (i < f.climb_seconds.size()) e += climb_power(level, p) * f.climb_seconds[i];
    if (i < f.descent_seconds.size()) e += descent_power(level, p) * f.descent_seconds[i];
  }
  e += descent_power(f.arrival_alt_ft, p) * climb_seconds(f.arrival_alt_ft, p);
  return e;
}

}  // namespace uam::energy
