#pragma once

#include <span>
#include <string>
#include <vector>

#include "evfleet/network.hpp"

namespace evfleet {

struct RangeExtenderParams {
  bool enabled = true;
  double power_w = 15'000.0;
  double soc_on = 0.20;
  double soc_off = 0.40;
  double specific_fuel_l_per_kwh = 0.30;
};

/// Physical constants of one vehicle model. The default-constructed values
/// form the "reference_compact" preset; they are configuration, not
/// measured data.
struct VehicleParams {
  double mass_kg = 1500.0;
  double drag_coefficient = 0.30;
  double frontal_area_m2 = 2.2;
  double rolling_coefficient = 0.01;
  double drivetrain_efficiency = 0.90;
  bool recuperation_enabled = true;
  double recuperation_efficiency = 0.60;
  double max_recuperation_power_w = 30'000.0;
  double auxiliary_power_w = 300.0;
  double battery_capacity_wh = 18'000.0;
  double max_charging_power_w = 3600.0;
  double max_acceleration_mps2 = 1.2;
  double max_deceleration_mps2 = 1.5;
  RangeExtenderParams range_extender;

  /// Human-readable invariant violations, keyed by field name. Empty if valid.
  std::vector<std::string> violations() const;
};

VehicleParams reference_compact_preset();
/// Effectively unlimited battery (10^9 Wh) for degenerate sanity runs.
VehicleParams infinite_battery_preset();

struct Environment {
  double gravity_mps2 = 9.81;
  double air_density_kgpm3 = 1.2;
};

/// Cumulative energy flows, all non-decreasing.
struct EnergyCounters {
  double consumed_wh = 0.0;        // drivetrain draw + auxiliary load
  double recuperated_wh = 0.0;     // braking energy returned to the battery
  double range_extended_wh = 0.0;  // generator output into the battery
  double grid_charged_wh = 0.0;    // energy stored at charging stations
  double fuel_l = 0.0;
  double distance_m = 0.0;

  EnergyCounters& operator+=(const EnergyCounters& o);
};

struct EdgePosition {
  EdgeId edge;
  double offset_m = 0.0;
};

struct VehicleState {
  double soc = 1.0;
  double velocity_mps = 0.0;
  EdgePosition position;
  bool range_extender_on = false;
  EnergyCounters cumulative;
};

/// One integration step. Time is relative to the start of the segment;
/// velocity, acceleration and powers are step averages, `soc` and
/// `range_extender_on` hold at the start of the step.
struct TraceSample {
  double t_s = 0.0;
  double dt_s = 0.0;
  double v_mps = 0.0;
  double a_mps2 = 0.0;
  double gradient = 0.0;
  double p_traction_w = 0.0;
  double p_battery_w = 0.0;  // net battery terminal power, positive = discharge
  double p_recup_w = 0.0;
  double p_re_w = 0.0;
  double soc = 0.0;
  bool range_extender_on = false;
};

using DriveTrace = std::vector<TraceSample>;

/// Wheel power for the longitudinal model. Positive is propulsion demand,
/// negative is braking surplus. Zero at standstill.
double traction_power(double v_mps, double a_mps2, double gradient, const VehicleParams& params,
                      const Environment& env);

struct BatteryFlows {
  double drive_w = 0.0;  // drivetrain draw, >= 0
  double aux_w = 0.0;
  double recup_w = 0.0;  // recuperated inflow, >= 0

  double net_w() const { return drive_w + aux_w - recup_w; }
};

BatteryFlows battery_flows(double p_traction_w, const VehicleParams& params);

/// Battery terminal power for a wheel power demand, including the
/// auxiliary load. Positive = discharge.
double battery_power(double p_traction_w, const VehicleParams& params);

struct RangeExtenderOutput {
  double power_w = 0.0;
  double fuel_l = 0.0;
  bool on = false;
};

/// Relay control with hysteresis between soc_on and soc_off.
RangeExtenderOutput range_extender_step(const VehicleState& state, const VehicleParams& params,
                                        double dt_s);

/// SOC after drawing `p_battery_net_w` for `dt_s`, clamped to [0, 1].
double integrate_soc(double soc, double p_battery_net_w, double dt_s, double capacity_wh);

/// Trapezoidal (or triangular) velocity profile over one edge.
struct SpeedProfile {
  double length_m = 0.0;
  double v_entry = 0.0;
  double v_peak = 0.0;
  double v_exit = 0.0;
  double accel = 0.0;
  double decel = 0.0;
  double t_accel = 0.0;
  double t_cruise = 0.0;
  double t_decel = 0.0;
  double s_accel = 0.0;
  double s_cruise = 0.0;

  double duration() const { return t_accel + t_cruise + t_decel; }
  double position(double t) const;
  double velocity(double t) const;
};

/// Throws ModelError when the vehicle cannot brake from v_entry to
/// v_exit_target within the edge, or when either speed exceeds v_cruise.
/// If the edge is too short to accelerate to v_exit_target, the exit speed
/// is lowered to the reachable value.
SpeedProfile plan_speed_profile(double length_m, double v_entry, double v_exit_target,
                                double v_cruise, double max_accel, double max_decel);

struct SegmentResult {
  DriveTrace trace;
  double duration_s = 0.0;
  double exit_velocity_mps = 0.0;
  EnergyCounters delta;
  bool stranded = false;
};

/// Drives one edge with fixed step `dt_s` (last step shorter), chaining
/// traction -> battery -> range extender -> SOC each step. `state` is
/// advanced to the end of the edge, or to the stranding point if the
/// battery empties.
SegmentResult drive_segment(VehicleState& state, const Edge& edge, double v_entry,
                            double v_exit_target, double v_cruise, const VehicleParams& params,
                            const Environment& env, double dt_s);

struct SegmentPlan {
  EdgeId edge;
  double v_entry = 0.0;
  double v_exit = 0.0;
  double v_cruise = 0.0;
};

/// Entry/exit speeds for driving `edges` from standstill to standstill,
/// with cruise speeds taken at `hour`. Exit speeds respect both the braking
/// distance to every downstream edge and the reachable acceleration.
std::vector<SegmentPlan> plan_route_speeds(const RoadNetwork& net, std::span<const EdgeId> edges,
                                           int hour, const VehicleParams& params);

struct DriveEstimate {
  double duration_s = 0.0;
  double energy_wh = 0.0;  // net battery draw, range extender off
  double distance_m = 0.0;
};

/// Dry run of driving `edges` with the range extender disabled and no SOC
/// clamping.
DriveEstimate estimate_drive(const RoadNetwork& net, std::span<const EdgeId> edges, int hour,
                             const VehicleParams& params, const Environment& env, double dt_s);

}  // namespace evfleet
