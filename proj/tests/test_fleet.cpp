#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "evfleet/errors.hpp"
#include "evfleet/fleet.hpp"
#include "oracles.hpp"

using namespace evfleet;

namespace {

struct World {
  RoadNetwork net = generate_grid(15, 15, 300.0, 13.9);
  Depot depot = make_depot(net, *net.find_edge("E420"));
  RoutingSettings settings;
};

DemandProfile one_bin_profile() {
  DemandProfile p = synthetic_demand_profile();
  p.airline_min_m = 500.0;
  p.airline_bins = {{500.0, 1.0}};
  p.trips_per_day = {TripsPerDay::Family::Fixed, 2.0};
  return p;
}

bool same_schedule(const std::vector<Trip>& a, const std::vector<Trip>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Trip& x = a[i];
    const Trip& y = b[i];
    if (x.id != y.id || x.depart != y.depart || x.airline_m != y.airline_m ||
        x.destination != y.destination || x.dwell_s != y.dwell_s || x.status != y.status ||
        x.outbound.edges != y.outbound.edges || x.inbound.edges != y.inbound.edges ||
        x.energy_estimate_wh != y.energy_estimate_wh) {
      return false;
    }
  }
  return true;
}

FleetVehicle idle(int id, double soc) {
  FleetVehicle v;
  v.id = id;
  v.state.soc = soc;
  return v;
}

}  // namespace

TEST_CASE("profile validation") {
  CHECK(synthetic_demand_profile().violations().empty());
  DemandProfile p = synthetic_demand_profile();
  p.airline_bins = {{1000.0, 1.0}, {900.0, 1.0}};
  CHECK_FALSE(p.violations().empty());
  p = synthetic_demand_profile();
  p.departure_weights.fill(0.0);
  CHECK_FALSE(p.violations().empty());
}

TEST_CASE("a single-bin histogram always yields that distance") {
  World w;
  auto rng = RandomStreams::from_seed(1);
  const DemandProfile p = one_bin_profile();
  for (int i = 0; i < 200; ++i) {
    const Trip t = draw_trip(rng, p, w.depot);
    CHECK(t.airline_m == 500.0);
    CHECK(airline_distance(t.target_point, w.depot.pos) == doctest::Approx(500.0));
    const int hour = t.depart.hour_of_day();
    CHECK(p.departure_weights[static_cast<std::size_t>(hour)] > 0.0);
  }
}

TEST_CASE("two-bin 1:3 histogram within 3 sigma") {
  World w;
  auto rng = RandomStreams::from_seed(77);
  DemandProfile p = synthetic_demand_profile();
  p.airline_min_m = 0.0;
  p.airline_bins = {{1000.0, 1.0}, {2000.0, 3.0}};
  const int n = 10'000;
  int low = 0;
  for (int i = 0; i < n; ++i) {
    const Trip t = draw_trip(rng, p, w.depot);
    CHECK(t.airline_m >= 0.0);
    CHECK(t.airline_m <= 2000.0);
    if (t.airline_m < 1000.0) ++low;
  }
  CHECK(std::abs(low - 0.25 * n) <= oracle::three_sigma(n, 0.25));
}

TEST_CASE("fixed two trips per vehicle-day") {
  World w;
  auto rng = RandomStreams::from_seed(3);
  const auto trips = generate_day_schedule(rng, one_bin_profile(), 1, w.net, w.depot, w.settings);
  CHECK(trips.size() == 2);
  CHECK_THROWS_AS(generate_day_schedule(rng, one_bin_profile(), 0, w.net, w.depot, w.settings),
                  ConfigError);
}

TEST_CASE("schedules are sorted, deterministic and independent of execution mode") {
  World w;
  const DemandProfile p = synthetic_demand_profile();
  auto r1 = RandomStreams::from_seed(2024);
  auto r2 = RandomStreams::from_seed(2024);
  auto r3 = RandomStreams::from_seed(2024);
  const auto a = generate_day_schedule(r1, p, 100, w.net, w.depot, w.settings, Execution::Parallel);
  const auto b = generate_day_schedule(r2, p, 100, w.net, w.depot, w.settings, Execution::Parallel);
  const auto c = generate_day_schedule(r3, p, 100, w.net, w.depot, w.settings, Execution::Serial);
  REQUIRE(a.size() > 100);
  CHECK(same_schedule(a, b));
  CHECK(same_schedule(a, c));
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].depart <= a[i].depart);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == static_cast<int>(i));
}

TEST_CASE("accepted trips: snapping, route endpoints and driven distance") {
  World w;
  auto rng = RandomStreams::from_seed(8);
  const auto trips =
      generate_day_schedule(rng, synthetic_demand_profile(), 300, w.net, w.depot, w.settings);
  int accepted = 0;
  for (const Trip& t : trips) {
    const auto cands = oracle::nearest_candidates(w.net, t.target_point.x, t.target_point.y);
    CHECK(t.destination.value == cands.front());
    if (t.status == TripStatus::Rejected) {
      CHECK_FALSE(t.reject_reason.empty());
      continue;
    }
    ++accepted;
    CHECK(t.outbound.origin() == w.depot.edge);
    CHECK(t.outbound.destination() == t.destination);
    CHECK(t.inbound.origin() == t.destination);
    CHECK(t.inbound.destination() == w.depot.edge);
    CHECK(t.driven_out_m >= t.airline_m - t.snap_m - 1e-6);
    CHECK(t.energy_estimate_wh > 0.0);
  }
  CHECK(accepted > 0);
}

TEST_CASE("destinations on the depot edge are rejected") {
  World w;
  Trip t;
  t.origin = w.depot.edge;
  const Edge& e = w.net.edge(w.depot.edge);
  const Coord a = w.net.node(e.from).pos, b = w.net.node(e.to).pos;
  t.target_point = {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
  resolve_trip(t, w.net, w.depot, w.settings);
  CHECK(t.status == TripStatus::Rejected);
}

TEST_CASE("dispatch picks the highest sufficient SOC") {
  FleetState fleet;
  fleet.vehicles = {idle(0, 0.6), idle(1, 0.9), idle(2, 0.9)};
  Trip t;
  t.id = 0;
  t.energy_estimate_wh = 1000.0;
  fleet.trips = {t};
  const VehicleParams params;
  const auto r = dispatch(fleet, 0, SimTime{}, params, DispatchPolicy{});
  REQUIRE(r.vehicle.has_value());
  CHECK(*r.vehicle == 1);  // tie with vehicle 2 goes to the lower id
  CHECK(fleet.vehicles[1].lifecycle == Lifecycle::EnRoute);
  CHECK(fleet.vehicles[1].trip == 0);
  CHECK(fleet.trips[0].status == TripStatus::Active);
  CHECK_THROWS_AS(dispatch(fleet, 0, SimTime{}, params, DispatchPolicy{}), ModelError);
}

TEST_CASE("dispatch delays when no vehicle qualifies") {
  FleetState fleet;
  fleet.vehicles = {idle(0, 0.2), idle(1, 1.0)};
  fleet.vehicles[1].lifecycle = Lifecycle::EnRoute;
  Trip t;
  t.id = 0;
  // Vehicle 0 has (0.2 - 0.1) * 18 kWh = 1.8 kWh to spend.
  t.energy_estimate_wh = 2000.0;
  fleet.trips = {t};
  const VehicleParams params;
  CHECK_FALSE(dispatch(fleet, 0, SimTime{}, params, DispatchPolicy{}).vehicle.has_value());
  CHECK_FALSE(dispatch(fleet, 0, SimTime::from_seconds(5), params, DispatchPolicy{}).vehicle);
  CHECK(fleet.trips[0].delayed);
  CHECK(fleet.delayed.size() == 1);
  fleet.vehicles[0].state.soc = 0.5;
  CHECK(dispatch(fleet, 0, SimTime::from_seconds(9), params, DispatchPolicy{}).vehicle == 0);
  CHECK(fleet.delayed.empty());
}

TEST_CASE("lifecycle table") {
  using L = Lifecycle;
  using A = VehicleAction;
  TransitionContext ctx;

  CHECK(advance_vehicle(L::Idle, EventKind::VehicleSpawn, ctx).next == L::EnRoute);

  ctx.target = DriveTarget::TripDestination;
  auto t = advance_vehicle(L::EnRoute, EventKind::ArriveDestination, ctx);
  CHECK(t.next == L::Dwelling);
  CHECK(t.action == A::BeginDwell);

  t = advance_vehicle(L::Dwelling, EventKind::DwellComplete, ctx);
  CHECK(t.next == L::Returning);
  CHECK(t.action == A::StartReturn);

  ctx.target = DriveTarget::Depot;
  ctx.soc = 0.3;
  ctx.station_available = true;
  t = advance_vehicle(L::Returning, EventKind::ArriveDestination, ctx);
  CHECK(t.action == A::EmitChargeRequest);
  ctx.soc = 0.99;
  CHECK(advance_vehicle(L::Returning, EventKind::ArriveDestination, ctx).next == L::Idle);

  ctx.charge = ChargeResolution::Granted;
  CHECK(advance_vehicle(L::Returning, EventKind::ChargeRequest, ctx).next == L::Charging);
  ctx.charge = ChargeResolution::Queued;
  CHECK(advance_vehicle(L::Returning, EventKind::ChargeRequest, ctx).next == L::QueuedAtStation);
  ctx.charge = ChargeResolution::Divert;
  CHECK(advance_vehicle(L::Returning, EventKind::ChargeRequest, ctx).action == A::StartDivert);
  CHECK(advance_vehicle(L::QueuedAtStation, EventKind::SlotGranted, ctx).next == L::Charging);

  ctx.at_depot = true;
  CHECK(advance_vehicle(L::Charging, EventKind::ChargeComplete, ctx).next == L::Idle);
  ctx.at_depot = false;
  CHECK(advance_vehicle(L::Charging, EventKind::ChargeComplete, ctx).next == L::Returning);

  CHECK(advance_vehicle(L::EnRoute, EventKind::Stranded, ctx).next == L::Stranded);
  CHECK(advance_vehicle(L::Returning, EventKind::Stranded, ctx).next == L::Stranded);

  CHECK_THROWS_AS(advance_vehicle(L::Charging, EventKind::DwellComplete, ctx), ModelError);
  CHECK_THROWS_AS(advance_vehicle(L::Idle, EventKind::Stranded, ctx), ModelError);
  for (std::size_t k = 0; k < kEventKindCount; ++k) {
    CHECK_THROWS_AS(advance_vehicle(L::Stranded, static_cast<EventKind>(k), ctx), ModelError);
  }
}
