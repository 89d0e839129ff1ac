#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "evfleet/dynamics.hpp"
#include "evfleet/errors.hpp"

using namespace evfleet;

namespace {

Edge flat_edge(double length, double gradient = 0.0) {
  Edge e;
  e.name = "x";
  e.length_m = length;
  e.speed_limit_mps = 30.0;
  e.gradient = gradient;
  return e;
}

double traction_energy_j(const DriveTrace& tr) {
  double j = 0.0;
  for (const auto& s : tr) j += s.p_traction_w * s.dt_s;
  return j;
}

double battery_energy_j(const DriveTrace& tr) {
  double j = 0.0;
  for (const auto& s : tr) j += s.p_battery_w * s.dt_s;
  return j;
}

}  // namespace

TEST_CASE("traction power examples") {
  const VehicleParams p = reference_compact_preset();
  const Environment env;
  // Hand evaluation: rolling 147.15 N, drag 158.4 N, times 20 m/s.
  CHECK(traction_power(20.0, 0.0, 0.0, p, env) == doctest::Approx(6111.0).epsilon(1e-12));
  // Coasting: (-1500 + 305.55) * 20.
  CHECK(traction_power(20.0, -1.0, 0.0, p, env) == doctest::Approx(-23889.0).epsilon(1e-12));
  CHECK(traction_power(0.0, 2.0, 0.1, p, env) == 0.0);
}

TEST_CASE("battery power branches") {
  VehicleParams p = reference_compact_preset();
  p.auxiliary_power_w = 200.0;
  CHECK(battery_power(0.0, p) == doctest::Approx(200.0));
  p.auxiliary_power_w = 0.0;
  CHECK(battery_power(-10'000.0, p) == doctest::Approx(-6000.0));
  CHECK(battery_power(-100'000.0, p) == doctest::Approx(-30'000.0));
  CHECK(battery_power(9000.0, p) == doctest::Approx(10'000.0));
  p.recuperation_enabled = false;
  CHECK(battery_power(-10'000.0, p) == 0.0);
}

TEST_CASE("integrate_soc examples") {
  CHECK(integrate_soc(0.5, 0.0, 10.0, 18'000.0) == 0.5);
  CHECK(integrate_soc(0.5, 18'000.0, 3600.0, 18'000.0) == 0.0);
  CHECK(integrate_soc(0.5, -3600.0, 1800.0, 18'000.0) == doctest::Approx(0.6));
  CHECK(integrate_soc(0.99, -36'000.0, 3600.0, 18'000.0) == 1.0);
}

TEST_CASE("range extender hysteresis") {
  const VehicleParams p = reference_compact_preset();
  VehicleState s;
  s.soc = 0.5;
  auto out = range_extender_step(s, p, 1.0);
  CHECK_FALSE(out.on);
  CHECK(out.power_w == 0.0);
  CHECK(out.fuel_l == 0.0);

  s.soc = 0.15;
  out = range_extender_step(s, p, 1.0);
  CHECK(out.on);
  CHECK(out.power_w == p.range_extender.power_w);
  // 15 kW for 1 s is 15/3600 kWh at 0.3 l/kWh.
  CHECK(out.fuel_l == doctest::Approx(0.3 * 15.0 / 3600.0));

  s.soc = 0.3;
  s.range_extender_on = true;
  CHECK(range_extender_step(s, p, 1.0).on);
  s.range_extender_on = false;
  CHECK_FALSE(range_extender_step(s, p, 1.0).on);
  s.soc = 0.4;
  s.range_extender_on = true;
  CHECK_FALSE(range_extender_step(s, p, 1.0).on);
}

TEST_CASE("parameter validation names the field") {
  VehicleParams p;
  CHECK(p.violations().empty());
  p.range_extender.soc_on = 0.5;
  p.range_extender.soc_off = 0.4;
  const auto v = p.violations();
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("range_extender") != std::string::npos);
  p = VehicleParams{};
  p.mass_kg = -1.0;
  CHECK_FALSE(p.violations().empty());
}

TEST_CASE("speed profiles") {
  SUBCASE("pure cruise") {
    const auto prof = plan_speed_profile(100.0, 10.0, 10.0, 10.0, 1.0, 1.0);
    CHECK(prof.duration() == doctest::Approx(10.0));
    CHECK(prof.t_accel == 0.0);
    CHECK(prof.t_decel == 0.0);
  }
  SUBCASE("trapezoid from standstill to standstill") {
    const auto prof = plan_speed_profile(200.0, 0.0, 0.0, 10.0, 1.0, 1.0);
    CHECK(prof.t_accel == doctest::Approx(10.0));
    CHECK(prof.s_accel == doctest::Approx(50.0));
    CHECK(prof.t_cruise == doctest::Approx(10.0));
    CHECK(prof.s_cruise == doctest::Approx(100.0));
    CHECK(prof.t_decel == doctest::Approx(10.0));
    CHECK(prof.duration() == doctest::Approx(30.0));
    CHECK(prof.position(prof.duration()) == doctest::Approx(200.0));
  }
  SUBCASE("short edge becomes a triangle") {
    const auto prof = plan_speed_profile(50.0, 0.0, 0.0, 10.0, 1.0, 1.0);
    CHECK(prof.v_peak == doctest::Approx(std::sqrt(50.0)));
    CHECK(prof.t_cruise == doctest::Approx(0.0));
  }
  SUBCASE("unreachable exit speed is lowered") {
    const auto prof = plan_speed_profile(8.0, 0.0, 10.0, 10.0, 1.0, 1.0);
    CHECK(prof.v_exit == doctest::Approx(4.0));
  }
  SUBCASE("cannot brake in time") {
    CHECK_THROWS_AS(plan_speed_profile(10.0, 20.0, 0.0, 20.0, 1.2, 1.0), ModelError);
  }
}

TEST_CASE("200 m segment takes 30 s and covers the edge") {
  VehicleParams p = reference_compact_preset();
  p.max_acceleration_mps2 = 1.0;
  p.max_deceleration_mps2 = 1.0;
  VehicleState s;
  const auto r = drive_segment(s, flat_edge(200.0), 0.0, 0.0, 10.0, p, Environment{}, 1.0);
  CHECK(r.duration_s == doctest::Approx(30.0));
  CHECK(r.trace.size() == 30);
  CHECK(r.delta.distance_m == doctest::Approx(200.0).epsilon(1e-9));
  CHECK(s.position.offset_m == doctest::Approx(200.0));
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].t_s > r.trace[i - 1].t_s);
}

TEST_CASE("constant-speed work matches the closed form") {
  const VehicleParams p = reference_compact_preset();
  const Environment env;
  for (double v : {5.0, 13.9, 20.0, 27.0}) {
    VehicleState s;
    const double d = 1234.5;
    const auto r = drive_segment(s, flat_edge(d), v, v, v, p, env, 0.7);
    const double expect =
        (p.rolling_coefficient * p.mass_kg * env.gravity_mps2 +
         0.5 * env.air_density_kgpm3 * p.drag_coefficient * p.frontal_area_m2 * v * v) * d;
    CHECK(traction_energy_j(r.trace) == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("up/down gradient asymmetry") {
  const VehicleParams p = reference_compact_preset();
  const Environment env;
  for (double g : {0.01, 0.04, 0.08}) {
    const double d = 800.0, v = 12.0;
    VehicleState up_state, down_state;
    const auto up = drive_segment(up_state, flat_edge(d, g), v, v, v, p, env, 1.0);
    const auto down = drive_segment(down_state, flat_edge(d, -g), v, v, v, p, env, 1.0);
    const double expect = 2.0 * p.mass_kg * env.gravity_mps2 * std::sin(std::atan(g)) * d;
    CHECK(traction_energy_j(up.trace) - traction_energy_j(down.trace) ==
          doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("random segment chains conserve energy and respect bounds") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trip = 0; trip < 200; ++trip) {
    VehicleParams p = reference_compact_preset();
    p.mass_kg = 900.0 + 1500.0 * u(rng);
    p.battery_capacity_wh = 2000.0 + 30'000.0 * u(rng);
    p.recuperation_efficiency = 0.2 + 0.8 * u(rng);
    p.max_recuperation_power_w = 2000.0 + 40'000.0 * u(rng);
    p.range_extender.enabled = trip % 3 == 0;
    p.range_extender.power_w = 2000.0 + 20'000.0 * u(rng);
    p.range_extender.soc_on = 0.1 + 0.3 * u(rng);
    p.range_extender.soc_off = p.range_extender.soc_on + 0.05 + 0.3 * u(rng);
    const Environment env;
    const double dt = 0.25 + 1.5 * u(rng);

    VehicleState s;
    s.soc = 0.02 + 0.98 * u(rng);
    s.range_extender_on = u(rng) < 0.3;
    const double soc0 = s.soc;
    double battery_j = 0.0, scale_j = 0.0;
    const int n_edges = 2 + static_cast<int>(u(rng) * 8);
    for (int k = 0; k < n_edges; ++k) {
      const Edge e = flat_edge(30.0 + 600.0 * u(rng), 0.12 * (u(rng) - 0.5));
      const double vc = 5.0 + 20.0 * u(rng);
      const auto r = drive_segment(s, e, 0.0, 0.0, vc, p, env, dt);
      for (const auto& smp : r.trace) {
        battery_j += smp.p_battery_w * smp.dt_s;
        scale_j += std::abs(smp.p_battery_w) * smp.dt_s;
        CHECK(smp.soc >= 0.0);
        CHECK(smp.soc <= 1.0);
        if (smp.p_traction_w < 0.0) {
          CHECK(smp.p_recup_w <= std::min(-smp.p_traction_w * p.recuperation_efficiency,
                                          p.max_recuperation_power_w) + 1e-9);
        } else {
          CHECK(smp.p_recup_w == 0.0);
        }
        if (p.range_extender.enabled) {
          if (smp.soc >= p.range_extender.soc_off) CHECK_FALSE(smp.range_extender_on);
        }
      }
      for (std::size_t i = 1; i < r.trace.size(); ++i) {
        const auto& a = r.trace[i - 1];
        const auto& b = r.trace[i];
        if (!a.range_extender_on && b.range_extender_on) CHECK(b.soc < p.range_extender.soc_on);
      }
      if (r.stranded) break;
    }
    CHECK(s.soc >= 0.0);
    CHECK(s.soc <= 1.0);
    const double stored_j = p.battery_capacity_wh * 3600.0 * (soc0 - s.soc);
    CHECK(std::abs(stored_j - battery_j) <= 1e-6 * std::max(scale_j, 1.0));
  }
}

TEST_CASE("without recuperation SOC never rises on non-negative gradients") {
  VehicleParams p = reference_compact_preset();
  p.recuperation_enabled = false;
  p.range_extender.enabled = false;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VehicleState s;
  s.soc = 0.8;
  double prev = s.soc;
  for (int k = 0; k < 50; ++k) {
    const auto r = drive_segment(s, flat_edge(50.0 + 500.0 * u(rng), 0.05 * u(rng)), 0.0, 0.0,
                                 8.0 + 15.0 * u(rng), p, Environment{}, 1.0);
    for (const auto& smp : r.trace) {
      CHECK(smp.soc <= prev);
      prev = smp.soc;
    }
    CHECK(s.soc <= prev);
    prev = s.soc;
  }
}

TEST_CASE("an empty battery strands the vehicle mid-edge") {
  VehicleParams p = reference_compact_preset();
  p.battery_capacity_wh = 5.0;
  p.range_extender.enabled = false;
  VehicleState s;
  s.soc = 1.0;
  const auto r = drive_segment(s, flat_edge(3000.0), 0.0, 0.0, 15.0, p, Environment{}, 1.0);
  CHECK(r.stranded);
  CHECK(s.soc == 0.0);
  CHECK(s.position.offset_m < 3000.0);
  CHECK(r.exit_velocity_mps == 0.0);
  CHECK(battery_energy_j(r.trace) == doctest::Approx(5.0 * 3600.0).epsilon(1e-9));
}

TEST_CASE("energy counters never decrease") {
  VehicleParams p = reference_compact_preset();
  VehicleState s;
  s.soc = 0.25;
  EnergyCounters prev = s.cumulative;
  for (int k = 0; k < 20; ++k) {
    drive_segment(s, flat_edge(400.0, k % 2 ? 0.05 : -0.05), 0.0, 0.0, 14.0, p, Environment{}, 1.0);
    CHECK(s.cumulative.consumed_wh >= prev.consumed_wh);
    CHECK(s.cumulative.recuperated_wh >= prev.recuperated_wh);
    CHECK(s.cumulative.range_extended_wh >= prev.range_extended_wh);
    CHECK(s.cumulative.fuel_l >= prev.fuel_l);
    CHECK(s.cumulative.distance_m >= prev.distance_m);
    prev = s.cumulative;
  }
}
