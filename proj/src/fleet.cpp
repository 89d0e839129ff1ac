#include "evfleet/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "evfleet/errors.hpp"

namespace evfleet {

std::vector<std::string> DemandProfile::violations() const {
  std::vector<std::string> out;
  double dep_total = 0.0;
  for (double w : departure_weights) {
    if (!(w >= 0.0)) out.emplace_back("departure_weights: weights must be non-negative");
    dep_total += w;
  }
  if (!(dep_total > 0.0)) out.emplace_back("departure_weights: total weight must be positive");

  if (airline_bins.empty()) out.emplace_back("airline_distance.bins: at least one bin required");
  if (!(airline_min_m >= 0.0)) out.emplace_back("airline_distance.min_m must be >= 0");
  double prev = airline_min_m;
  double dist_total = 0.0;
  for (std::size_t i = 0; i < airline_bins.size(); ++i) {
    const auto [upper, w] = airline_bins[i];
    // A single zero-width first bin is allowed as a point mass.
    const bool ok = i == 0 ? upper >= prev : upper > prev;
    if (!ok) out.push_back(fmt::format("airline_distance.bins[{}]: bins must be increasing", i));
    if (!(w >= 0.0)) out.push_back(fmt::format("airline_distance.bins[{}]: negative weight", i));
    dist_total += w;
    prev = upper;
  }
  if (!airline_bins.empty() && !(dist_total > 0.0)) {
    out.emplace_back("airline_distance.bins: total weight must be positive");
  }

  if (dwell.family == DwellDistribution::Family::LogNormal && !(dwell.sigma > 0.0)) {
    out.emplace_back("dwell.sigma must be > 0");
  }
  if (dwell.family == DwellDistribution::Family::Fixed && !(dwell.fixed_s >= 0.0)) {
    out.emplace_back("dwell.seconds must be >= 0");
  }
  if (!(trips_per_day.value >= 0.0)) out.emplace_back("trips_per_vehicle: value must be >= 0");
  if (trips_per_day.family == TripsPerDay::Family::Fixed &&
      trips_per_day.value != std::floor(trips_per_day.value)) {
    out.emplace_back("trips_per_vehicle: fixed count must be an integer");
  }
  return out;
}

DemandProfile synthetic_demand_profile() {
  DemandProfile p;
  p.departure_weights = {0, 0, 0, 0, 0, 0, 1, 4, 8, 8, 7, 6, 4, 6, 7, 6, 4, 2, 1, 0, 0, 0, 0, 0};
  p.airline_min_m = 0.0;
  p.airline_bins = {{500, 1}, {1000, 3}, {2000, 4}, {3000, 3}, {4000, 1}};
  p.dwell = {DwellDistribution::Family::LogNormal, 7.9, 0.6, 0.0};
  p.trips_per_day = {TripsPerDay::Family::Poisson, 2.0};
  return p;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStreams RandomStreams::from_seed(std::uint64_t master) {
  std::uint64_t x = master;
  RandomStreams s;
  s.schedule.seed(splitmix64(x));
  s.distance.seed(splitmix64(x));
  s.bearing.seed(splitmix64(x));
  s.dwell.seed(splitmix64(x));
  return s;
}

std::string_view to_string(TripStatus status) {
  switch (status) {
    case TripStatus::Pending: return "pending";
    case TripStatus::Rejected: return "rejected";
    case TripStatus::Active: return "active";
    case TripStatus::Completed: return "completed";
    case TripStatus::Stranded: return "stranded";
  }
  return "unknown";
}

std::string_view to_string(Lifecycle state) {
  switch (state) {
    case Lifecycle::Idle: return "Idle";
    case Lifecycle::EnRoute: return "EnRoute";
    case Lifecycle::Dwelling: return "Dwelling";
    case Lifecycle::Returning: return "Returning";
    case Lifecycle::QueuedAtStation: return "QueuedAtStation";
    case Lifecycle::Charging: return "Charging";
    case Lifecycle::Stranded: return "Stranded";
  }
  return "Unknown";
}

double Trip::driven_length(const RoadNetwork& net, const Route& route) {
  if (route.edges.empty()) return 0.0;
  return route.total_length_m - net.edge(route.edges.front()).length_m;
}

Depot make_depot(const RoadNetwork& net, EdgeId edge) {
  return Depot{edge, net.node(net.edge(edge).to).pos};
}

Trip draw_trip(RandomStreams& rng, const DemandProfile& profile, const Depot& depot) {
  Trip trip;
  trip.origin = depot.edge;

  std::discrete_distribution<int> hour_dist(profile.departure_weights.begin(),
                                            profile.departure_weights.end());
  const int hour = hour_dist(rng.schedule);
  std::uniform_real_distribution<double> within_hour(0.0, 3600.0);
  trip.depart = SimTime::from_seconds(hour * 3600.0 + within_hour(rng.schedule));

  std::vector<double> weights;
  weights.reserve(profile.airline_bins.size());
  for (const auto& b : profile.airline_bins) weights.push_back(b.second);
  std::discrete_distribution<std::size_t> bin_dist(weights.begin(), weights.end());
  const std::size_t bin = bin_dist(rng.distance);
  const double lo = bin == 0 ? profile.airline_min_m : profile.airline_bins[bin - 1].first;
  const double hi = profile.airline_bins[bin].first;
  trip.airline_m = lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng.distance);

  const double bearing =
      std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng.bearing);
  trip.target_point = Coord{depot.pos.x + trip.airline_m * std::cos(bearing),
                            depot.pos.y + trip.airline_m * std::sin(bearing)};

  if (profile.dwell.family == DwellDistribution::Family::Fixed) {
    trip.dwell_s = profile.dwell.fixed_s;
  } else {
    trip.dwell_s =
        std::lognormal_distribution<double>(profile.dwell.mu, profile.dwell.sigma)(rng.dwell);
  }
  return trip;
}

void resolve_trip(Trip& trip, const RoadNetwork& net, const Depot& depot,
                  const RoutingSettings& settings) {
  trip.destination = nearest_edge(net, trip.target_point);
  const Edge& dest = net.edge(trip.destination);
  trip.snap_m = point_segment_distance(trip.target_point, net.node(dest.from).pos,
                                       net.node(dest.to).pos);
  if (trip.destination == depot.edge) {
    trip.status = TripStatus::Rejected;
    trip.reject_reason = "destination on depot edge";
    return;
  }
  const int out_hour = trip.depart.hour_of_day();
  try {
    trip.outbound = shortest_path(net, depot.edge, trip.destination, settings.weight, out_hour);
    const auto out_edges = std::span<const EdgeId>(trip.outbound.edges).subspan(1);
    const DriveEstimate out =
        estimate_drive(net, out_edges, out_hour, settings.vehicle, settings.env, settings.dt_s);
    const int ret_hour =
        (trip.depart + SimTime::from_seconds(out.duration_s + trip.dwell_s)).hour_of_day();
    trip.inbound = shortest_path(net, trip.destination, depot.edge, settings.weight, ret_hour);
    const auto in_edges = std::span<const EdgeId>(trip.inbound.edges).subspan(1);
    const DriveEstimate in =
        estimate_drive(net, in_edges, ret_hour, settings.vehicle, settings.env, settings.dt_s);
    trip.energy_estimate_wh = out.energy_wh + in.energy_wh;
    trip.driven_out_m = Trip::driven_length(net, trip.outbound);
    trip.driven_return_m = Trip::driven_length(net, trip.inbound);
  } catch (const NoRouteError& e) {
    trip.status = TripStatus::Rejected;
    trip.reject_reason = e.what();
  }
}

Trip sample_trip(RandomStreams& rng, const DemandProfile& profile, const Depot& depot,
                 const RoadNetwork& net, const RoutingSettings& settings) {
  Trip trip = draw_trip(rng, profile, depot);
  resolve_trip(trip, net, depot, settings);
  return trip;
}

std::vector<Trip> generate_day_schedule(RandomStreams& rng, const DemandProfile& profile,
                                        int vehicle_days, const RoadNetwork& net,
                                        const Depot& depot, const RoutingSettings& settings,
                                        Execution exec) {
  if (vehicle_days < 1) throw ConfigError("vehicle_days must be >= 1");
  std::vector<Trip> trips;
  for (int v = 0; v < vehicle_days; ++v) {
    int count = 0;
    if (profile.trips_per_day.family == TripsPerDay::Family::Fixed) {
      count = static_cast<int>(profile.trips_per_day.value);
    } else if (profile.trips_per_day.value > 0.0) {
      count = std::poisson_distribution<int>(profile.trips_per_day.value)(rng.schedule);
    }
    for (int k = 0; k < count; ++k) trips.push_back(draw_trip(rng, profile, depot));
  }
  std::stable_sort(trips.begin(), trips.end(),
                   [](const Trip& a, const Trip& b) { return a.depart < b.depart; });
  for (std::size_t i = 0; i < trips.size(); ++i) trips[i].id = static_cast<int>(i);

  const auto n = static_cast<std::int64_t>(trips.size());
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
      resolve_trip(trips[static_cast<std::size_t>(i)], net, depot, settings);
    }
  } else {
    for (auto& t : trips) resolve_trip(t, net, depot, settings);
  }
  return trips;
}

std::optional<int> choose_vehicle(const FleetState& fleet, const Trip& trip,
                                  const VehicleParams& params, const DispatchPolicy& policy) {
  std::optional<int> best;
  double best_soc = -1.0;
  for (const auto& v : fleet.vehicles) {
    if (v.lifecycle != Lifecycle::Idle) continue;
    const double budget = (v.state.soc - policy.reserve_soc) * params.battery_capacity_wh;
    if (budget < trip.energy_estimate_wh) continue;
    if (v.state.soc > best_soc) {
      best_soc = v.state.soc;
      best = v.id;
    }
  }
  return best;
}

DispatchResult dispatch(FleetState& fleet, int trip_id, SimTime at, const VehicleParams& params,
                        const DispatchPolicy& policy) {
  Trip& trip = fleet.trips.at(static_cast<std::size_t>(trip_id));
  if (trip.status != TripStatus::Pending) {
    throw ModelError(fmt::format("trip {} is not pending", trip_id));
  }
  if (at < trip.depart) throw ModelError(fmt::format("trip {} dispatched early", trip_id));
  const auto chosen = choose_vehicle(fleet, trip, params, policy);
  if (!chosen) {
    trip.delayed = true;
    if (std::find(fleet.delayed.begin(), fleet.delayed.end(), trip_id) == fleet.delayed.end()) {
      fleet.delayed.push_back(trip_id);
    }
    return {};
  }
  std::erase(fleet.delayed, trip_id);
  FleetVehicle& v = fleet.vehicles[static_cast<std::size_t>(*chosen)];
  v.lifecycle = advance_vehicle(v.lifecycle, EventKind::VehicleSpawn, {}).next;
  v.target = DriveTarget::TripDestination;
  v.trip = trip_id;
  trip.vehicle = *chosen;
  trip.status = TripStatus::Active;
  trip.dispatched = at;
  return {*chosen};
}

Transition advance_vehicle(Lifecycle current, EventKind event, const TransitionContext& ctx) {
  using L = Lifecycle;
  using A = VehicleAction;
  const bool driving = current == L::EnRoute || current == L::Returning;

  switch (event) {
    case EventKind::VehicleSpawn:
      if (current == L::Idle) return {L::EnRoute, A::StartOutbound};
      break;
    case EventKind::SegmentComplete:
      if (driving) return {current, ctx.more_segments ? A::NextSegment : A::ScheduleArrival};
      break;
    case EventKind::ArriveDestination:
      if (current == L::EnRoute && ctx.target == DriveTarget::TripDestination) {
        return {L::Dwelling, A::BeginDwell};
      }
      if (current == L::Returning && ctx.target == DriveTarget::Depot) {
        if (ctx.soc < ctx.depot_charge_threshold && ctx.station_available) {
          return {L::Returning, A::EmitChargeRequest};
        }
        return {L::Idle, A::BecomeIdle};
      }
      if (current == L::Returning && ctx.target == DriveTarget::Station) {
        return {L::Returning, A::EmitChargeRequest};
      }
      break;
    case EventKind::DwellComplete:
      if (current == L::Dwelling) return {L::Returning, A::StartReturn};
      break;
    case EventKind::ChargeRequest:
      if (current == L::Returning) {
        switch (ctx.charge) {
          case ChargeResolution::Granted: return {L::Charging, A::BeginCharging};
          case ChargeResolution::Queued: return {L::QueuedAtStation, A::WaitInQueue};
          case ChargeResolution::Divert: return {L::Returning, A::StartDivert};
          case ChargeResolution::None: break;
        }
      }
      break;
    case EventKind::SlotGranted:
      if (current == L::QueuedAtStation) return {L::Charging, A::BeginCharging};
      break;
    case EventKind::ChargeComplete:
      if (current == L::Charging) {
        return ctx.at_depot ? Transition{L::Idle, A::BecomeIdle}
                            : Transition{L::Returning, A::StartReturn};
      }
      break;
    case EventKind::RangeExtenderToggle:
      if (driving) return {current, A::None};
      break;
    case EventKind::Stranded:
      if (driving) return {L::Stranded, A::MarkStranded};
      break;
    case EventKind::MetricsTick:
    case EventKind::SimulationEnd:
      break;
  }
  throw ModelError(fmt::format("illegal transition: {} receives {} (target={}, soc={:.6f})",
                               to_string(current), to_string(event), static_cast<int>(ctx.target),
                               ctx.soc));
}

}  // namespace evfleet
