#pragma once

// eVTOL mission energy model: momentum-theory hover, climb/cruise power with
// parasite and induced drag, descent at a fixed fraction of cruise power.
//
// Units: inputs in the customary aviation units (ft, ft/min, ft/s); forces and
// powers evaluated in SI with 0.3048 m/ft.

#include <vector>

namespace uam::energy {

struct EnergyParams {
  double mass_kg = 1800.0;
  double g = 9.81;
  double disk_loading = 580.0;  // N/m^2
  double eta_hover = 0.75;
  double eta_climb = 0.75;
  double eta_cruise = 0.8;
  double ld_max = 20.0;
  double cd0 = 0.03;
  double ref_area_m2 = 30.0;
  double flight_path_angle_deg = 10.0;
  double roc_ftpm = 1000.0;
  double v_cruise_ftps = 135.0;
  double hover_leg_ft = 250.0;
  double hover_leg_duration_s = 30.0;  // each of takeoff and landing
  double descent_power_fraction = 0.4;

  /// Throws ConfigError if any efficiency is outside (0, 1] or any physical
  /// quantity is not positive.
  void validate() const;
};

inline constexpr double kSeaLevelDensity = 1.225;
inline constexpr double kDensityAt10kFt = 0.9046;

/// Linear density model between 0 and 10,000 ft. Throws OutOfRange outside.
double air_density(double alt_ft);

/// Climb airspeed implied by the rate of climb and flight path angle, ft/s.
double climb_speed_ftps(const EnergyParams& p);

double hover_power(const EnergyParams& p);
/// Evaluated at the mid-point density between the hover leg top and cruise.
double climb_power(double cruise_alt_ft, const EnergyParams& p);
double cruise_power(double alt_ft, const EnergyParams& p);
double descent_power(double alt_ft, const EnergyParams& p);

/// Horizontal distance covered by climb plus descent, ft.
double climb_descent_distance_ft(double cruise_alt_ft, const EnergyParams& p);

struct MissionEnergy {
  double e_hover_j = 0.0;
  double e_climb_j = 0.0;
  double e_cruise_j = 0.0;
  double e_descent_j = 0.0;
  double e_total_j = 0.0;
  double cruise_alt_ft = 0.0;
  double route_distance_ft = 0.0;
};

/// Throws RouteTooShort when no distance remains for cruise.
MissionEnergy mission_energy(double route_distance_ft, double cruise_alt_ft, const EnergyParams& p);

/// E_total(alt) / E_total(baseline_alt) - 1.
double extra_energy_ratio(double route_distance_ft, double alt_ft, const EnergyParams& p,
                          double baseline_alt_ft = 1000.0);

/// Time a simulated flight spent in each regime, used to integrate energy
/// along a flown trajectory with altitude changes.
struct FlightProfile {
  std::vector<double> levels_ft;           // flight levels
  std::vector<double> level_seconds;       // level flight time per level
  std::vector<double> climb_seconds;       // climb time, indexed by target level
  std::vector<double> descent_seconds;     // en-route descent time, by origin level
  double initial_level_ft = 1000.0;        // level entered after takeoff
  double arrival_alt_ft = 1000.0;          // altitude when the route ended
};

/// Hover legs + initial climb to the entry level + integrated cruise/climb/
/// descent power over the profile + final descent from the arrival altitude.
double trajectory_energy(const FlightProfile& profile, const EnergyParams& p);

}  // namespace uam::energy
