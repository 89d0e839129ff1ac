#include "evfleet/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "evfleet/errors.hpp"

namespace evfleet {

namespace {
constexpr double kJoulesPerWh = 3600.0;
constexpr double kJoulesPerKwh = 3.6e6;
}  // namespace

std::vector<std::string> VehicleParams::violations() const {
  std::vector<std::string> out;
  auto positive = [&out](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(fmt::format("{} must be > 0", name));
  };
  auto efficiency = [&out](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) out.push_back(fmt::format("{} must be in (0, 1]", name));
  };
  positive(mass_kg, "mass_kg");
  positive(drag_coefficient, "drag_coefficient");
  positive(frontal_area_m2, "frontal_area_m2");
  positive(rolling_coefficient, "rolling_coefficient");
  efficiency(drivetrain_efficiency, "drivetrain_efficiency");
  efficiency(recuperation_efficiency, "recuperation_efficiency");
  positive(max_recuperation_power_w, "max_recuperation_power_w");
  positive(auxiliary_power_w, "auxiliary_power_w");
  positive(battery_capacity_wh, "battery_capacity_wh");
  positive(max_charging_power_w, "max_charging_power_w");
  positive(max_acceleration_mps2, "max_acceleration_mps2");
  positive(max_deceleration_mps2, "max_deceleration_mps2");
  const auto& re = range_extender;
  if (re.enabled) {
    positive(re.power_w, "range_extender.power_w");
    positive(re.specific_fuel_l_per_kwh, "range_extender.specific_fuel_l_per_kwh");
  }
  if (!(re.soc_on >= 0.0 && re.soc_on < re.soc_off && re.soc_off <= 1.0)) {
    out.push_back("range_extender: require 0 <= soc_on < soc_off <= 1");
  }
  return out;
}

VehicleParams reference_compact_preset() { return VehicleParams{}; }

VehicleParams infinite_battery_preset() {
  VehicleParams p;
  p.battery_capacity_wh = 1e9;
  return p;
}

EnergyCounters& EnergyCounters::operator+=(const EnergyCounters& o) {
  consumed_wh += o.consumed_wh;
  recuperated_wh += o.recuperated_wh;
  range_extended_wh += o.range_extended_wh;
  grid_charged_wh += o.grid_charged_wh;
  fuel_l += o.fuel_l;
  distance_m += o.distance_m;
  return *this;
}

double traction_power(double v, double a, double gradient, const VehicleParams& p,
                      const Environment& env) {
  if (v <= 0.0) return 0.0;
  const double theta = std::atan(gradient);
  const double m = p.mass_kg;
  const double g = env.gravity_mps2;
  const double force = m * a + m * g * std::sin(theta) +
                       p.rolling_coefficient * m * g * std::cos(theta) +
                       0.5 * env.air_density_kgpm3 * p.drag_coefficient * p.frontal_area_m2 * v * v;
  return force * v;
}

BatteryFlows battery_flows(double p_traction_w, const VehicleParams& p) {
  BatteryFlows f;
  f.aux_w = p.auxiliary_power_w;
  if (p_traction_w >= 0.0) {
    f.drive_w = p_traction_w / p.drivetrain_efficiency;
  } else if (p.recuperation_enabled) {
    f.recup_w = std::min(-p_traction_w * p.recuperation_efficiency, p.max_recuperation_power_w);
  }
  return f;
}

double battery_power(double p_traction_w, const VehicleParams& p) {
  return battery_flows(p_traction_w, p).net_w();
}

RangeExtenderOutput range_extender_step(const VehicleState& state, const VehicleParams& p,
                                        double dt_s) {
  const auto& re = p.range_extender;
  if (!re.enabled) return {};
  bool on = state.range_extender_on;
  if (state.soc < re.soc_on) {
    on = true;
  } else if (state.soc >= re.soc_off) {
    on = false;
  }
  if (!on) return {};
  return {re.power_w, re.specific_fuel_l_per_kwh * re.power_w * dt_s / kJoulesPerKwh, true};
}

double integrate_soc(double soc, double p_net_w, double dt_s, double capacity_wh) {
  return std::clamp(soc - p_net_w * dt_s / (capacity_wh * kJoulesPerWh), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

double SpeedProfile::position(double t) const {
  t = std::clamp(t, 0.0, duration());
  if (t <= t_accel) return v_entry * t + 0.5 * accel * t * t;
  if (t <= t_accel + t_cruise) return s_accel + v_peak * (t - t_accel);
  const double tau = t - t_accel - t_cruise;
  return s_accel + s_cruise + v_peak * tau - 0.5 * decel * tau * tau;
}

double SpeedProfile::velocity(double t) const {
  t = std::clamp(t, 0.0, duration());
  if (t <= t_accel) return v_entry + accel * t;
  if (t <= t_accel + t_cruise) return v_peak;
  return std::max(0.0, v_peak - decel * (t - t_accel - t_cruise));
}

SpeedProfile plan_speed_profile(double length, double v0, double v1, double vc, double a,
                                double d) {
  constexpr double kRel = 1e-9;
  if (v0 > vc * (1 + kRel) || v1 > vc * (1 + kRel)) {
    throw ModelError(fmt::format("segment speeds ({}, {}) exceed cruise speed {}", v0, v1, vc));
  }
  v0 = std::min(v0, vc);
  v1 = std::min(v1, vc);
  if (v1 * v1 - v0 * v0 > 2.0 * a * length) v1 = std::sqrt(v0 * v0 + 2.0 * a * length);
  if (v0 * v0 - v1 * v1 > 2.0 * d * length * (1 + 1e-6)) {
    throw ModelError(fmt::format("cannot brake from {} to {} m/s within {} m", v0, v1, length));
  }

  double vp = vc;
  if ((vc * vc - v0 * v0) / (2 * a) + (vc * vc - v1 * v1) / (2 * d) > length) {
    vp = std::sqrt((2 * a * d * length + d * v0 * v0 + a * v1 * v1) / (a + d));
    vp = std::max({vp, v0, v1});
  }

  SpeedProfile p;
  p.length_m = length;
  p.v_entry = v0;
  p.v_peak = vp;
  p.v_exit = v1;
  p.accel = a;
  p.decel = d;
  p.s_accel = (vp * vp - v0 * v0) / (2 * a);
  const double s_decel = (vp * vp - v1 * v1) / (2 * d);
  p.s_cruise = std::max(0.0, length - p.s_accel - s_decel);
  p.t_accel = (vp - v0) / a;
  p.t_cruise = vp > 0.0 ? p.s_cruise / vp : 0.0;
  p.t_decel = (vp - v1) / d;
  return p;
}

SegmentResult drive_segment(VehicleState& state, const Edge& edge, double v_entry,
                            double v_exit_target, double v_cruise, const VehicleParams& params,
                            const Environment& env, double dt_s) {
  if (!(dt_s > 0.0)) throw ModelError("drive_segment: dt must be positive");
  const SpeedProfile profile =
      plan_speed_profile(edge.length_m, v_entry, v_exit_target, v_cruise,
                         params.max_acceleration_mps2, params.max_deceleration_mps2);
  const double total = profile.duration();
  const double capacity_j = params.battery_capacity_wh * kJoulesPerWh;
  const double fuel_rate = params.range_extender.specific_fuel_l_per_kwh;

  SegmentResult result;
  result.trace.reserve(static_cast<std::size_t>(total / dt_s) + 2);
  double offset = 0.0;
  double elapsed = 0.0;

  for (std::size_t k = 0; elapsed < total; ++k) {
    const double t0 = static_cast<double>(k) * dt_s;
    if (t0 >= total) break;
    const double h = std::min(dt_s, total - t0);
    const double x0 = profile.position(t0);
    const double x1 = profile.position(t0 + h);
    const double v = (x1 - x0) / h;
    const double a = (profile.velocity(t0 + h) - profile.velocity(t0)) / h;

    const double p_traction = traction_power(v, a, edge.gradient, params, env);
    const BatteryFlows flows = battery_flows(p_traction, params);
    const RangeExtenderOutput re = range_extender_step(state, params, h);

    double recup = flows.recup_w;
    double re_power = re.power_w;
    double net = flows.drive_w + flows.aux_w - recup - re_power;
    double step = h;
    double soc_next = state.soc - net * h / capacity_j;

    if (soc_next > 1.0) {
      // Battery full: curtail generator output first, then recuperation.
      const double absorbable = (1.0 - state.soc) * capacity_j / h;
      const double budget = flows.drive_w + flows.aux_w + absorbable;
      re_power = std::clamp(budget - recup, 0.0, re_power);
      recup = std::min(recup, budget - re_power);
      net = flows.drive_w + flows.aux_w - recup - re_power;
      soc_next = 1.0;
    } else if (soc_next <= 0.0 && net > 0.0) {
      step = state.soc * capacity_j / net;
      soc_next = 0.0;
      result.stranded = true;
    }

    TraceSample s;
    s.t_s = t0;
    s.dt_s = step;
    s.v_mps = v;
    s.a_mps2 = a;
    s.gradient = edge.gradient;
    s.p_traction_w = p_traction;
    s.p_battery_w = net;
    s.p_recup_w = recup;
    s.p_re_w = re_power;
    s.soc = state.soc;
    s.range_extender_on = re.on;
    result.trace.push_back(s);

    result.delta.consumed_wh += (flows.drive_w + flows.aux_w) * step / kJoulesPerWh;
    result.delta.recuperated_wh += recup * step / kJoulesPerWh;
    result.delta.range_extended_wh += re_power * step / kJoulesPerWh;
    result.delta.fuel_l += fuel_rate * re_power * step / kJoulesPerKwh;
    result.delta.distance_m += v * step;

    state.soc = soc_next;
    state.range_extender_on = re.on;
    elapsed = t0 + step;
    if (result.stranded) {
      offset = x0 + v * step;
      break;
    }
    offset = x1;
  }

  result.duration_s = elapsed;
  result.exit_velocity_mps = result.stranded ? 0.0 : profile.v_exit;
  state.velocity_mps = result.exit_velocity_mps;
  state.position.offset_m = std::clamp(offset, 0.0, edge.length_m);
  state.cumulative += result.delta;
  return result;
}

std::vector<SegmentPlan> plan_route_speeds(const RoadNetwork& net, std::span<const EdgeId> edges,
                                           int hour, const VehicleParams& params) {
  const std::size_t n = edges.size();
  std::vector<SegmentPlan> plan(n);
  if (n == 0) return plan;
  const double a = params.max_acceleration_mps2;
  const double d = params.max_deceleration_mps2;
  for (std::size_t i = 0; i < n; ++i) {
    plan[i].edge = edges[i];
    plan[i].v_cruise = net.cruise_speed(edges[i], hour);
  }
  // Backward pass: every exit speed must allow stopping by the route end.
  plan[n - 1].v_exit = 0.0;
  for (std::size_t i = n - 1; i > 0; --i) {
    const double len = net.edge(edges[i]).length_m;
    plan[i - 1].v_exit =
        std::min({plan[i - 1].v_cruise, plan[i].v_cruise,
                  std::sqrt(plan[i].v_exit * plan[i].v_exit + 2.0 * d * len)});
  }
  // Forward pass: exit speeds limited by what acceleration can reach.
  double v_in = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double len = net.edge(edges[i]).length_m;
    plan[i].v_entry = v_in;
    plan[i].v_exit = std::min(plan[i].v_exit, std::sqrt(v_in * v_in + 2.0 * a * len));
    v_in = plan[i].v_exit;
  }
  return plan;
}

DriveEstimate estimate_drive(const RoadNetwork& net, std::span<const EdgeId> edges, int hour,
                             const VehicleParams& params, const Environment& env, double dt_s) {
  VehicleParams scratch = params;
  scratch.range_extender.enabled = false;
  scratch.battery_capacity_wh = 1e15;
  VehicleState state;
  state.soc = 0.5;

  DriveEstimate est;
  for (const SegmentPlan& seg : plan_route_speeds(net, edges, hour, params)) {
    const SegmentResult r = drive_segment(state, net.edge(seg.edge), seg.v_entry, seg.v_exit,
                                          seg.v_cruise, scratch, env, dt_s);
    est.duration_s += r.duration_s;
    est.distance_m += r.delta.distance_m;
    est.energy_wh += r.delta.consumed_wh - r.delta.recuperated_wh;
  }
  return est;
}

}  // namespace evfleet
