#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "evfleet/dynamics.hpp"
#include "evfleet/engine.hpp"
#include "evfleet/network.hpp"
#include "evfleet/sim_time.hpp"

namespace evfleet {

struct DwellDistribution {
  enum class Family { LogNormal, Fixed };
  Family family = Family::LogNormal;
  double mu = 7.9;     // ln(seconds); e^7.9 is about 45 min
  double sigma = 0.6;
  double fixed_s = 0.0;
};

struct TripsPerDay {
  enum class Family { Fixed, Poisson };
  Family family = Family::Poisson;
  double value = 2.0;  // count for Fixed, mean for Poisson
};

/// Distributions the daily schedule is drawn from.
struct DemandProfile {
  std::array<double, 24> departure_weights{};
  /// Lower edge of the first air-line distance bin.
  double airline_min_m = 0.0;
  /// (bin upper edge in meters, weight), upper edges increasing.
  std::vector<std::pair<double, double>> airline_bins;
  DwellDistribution dwell;
  TripsPerDay trips_per_day;

  std::vector<std::string> violations() const;
};

/// Synthetic, non-empirical profile shipped with the default scenario:
/// business-hours departures and a 0-5 km air-line distance mix.
DemandProfile synthetic_demand_profile();

/// Independent random streams split from one master seed.
struct RandomStreams {
  std::mt19937_64 schedule;
  std::mt19937_64 distance;
  std::mt19937_64 bearing;
  std::mt19937_64 dwell;

  static RandomStreams from_seed(std::uint64_t master);
};

enum class TripStatus { Pending, Rejected, Active, Completed, Stranded };
std::string_view to_string(TripStatus status);

struct Trip {
  int id = -1;
  int vehicle = -1;
  SimTime depart;
  EdgeId origin;
  Coord target_point;
  double airline_m = 0.0;
  double snap_m = 0.0;
  EdgeId destination;
  Route outbound;
  Route inbound;
  double dwell_s = 0.0;
  double energy_estimate_wh = 0.0;
  double driven_out_m = 0.0;     // along the outbound route
  double driven_return_m = 0.0;  // along the return route
  std::string reject_reason;

  // Filled in while the simulation runs.
  TripStatus status = TripStatus::Pending;
  std::optional<SimTime> dispatched;
  bool delayed = false;

  /// Distance actually driven along a route: the vehicle starts at the end
  /// of the route's first edge.
  static double driven_length(const RoadNetwork& net, const Route& route);
};

struct RoutingSettings {
  RouteWeight weight = RouteWeight::TravelTime;
  VehicleParams vehicle;
  Environment env;
  double dt_s = 1.0;
};

struct Depot {
  EdgeId edge;
  Coord pos;  // end node of the depot edge
};

Depot make_depot(const RoadNetwork& net, EdgeId edge);

/// Random part of trip sampling: departure, air-line distance, bearing,
/// target point and dwell.
Trip draw_trip(RandomStreams& rng, const DemandProfile& profile, const Depot& depot);

/// Deterministic part: snaps the target point to the nearest edge, routes
/// both legs and estimates round-trip energy. Unreachable or depot-edge
/// destinations are marked Rejected.
void resolve_trip(Trip& trip, const RoadNetwork& net, const Depot& depot,
                  const RoutingSettings& settings);

Trip sample_trip(RandomStreams& rng, const DemandProfile& profile, const Depot& depot,
                 const RoadNetwork& net, const RoutingSettings& settings);

enum class Execution { Serial, Parallel };

/// Trips for `vehicle_days` vehicle-days, sorted by departure and numbered
/// in that order. Draws are serial; resolution runs per `exec`.
std::vector<Trip> generate_day_schedule(RandomStreams& rng, const DemandProfile& profile,
                                        int vehicle_days, const RoadNetwork& net,
                                        const Depot& depot, const RoutingSettings& settings,
                                        Execution exec = Execution::Parallel);

enum class Lifecycle { Idle, EnRoute, Dwelling, Returning, QueuedAtStation, Charging, Stranded };
inline constexpr std::size_t kLifecycleCount = 7;
std::string_view to_string(Lifecycle state);

enum class DriveTarget { None, TripDestination, Depot, Station };

struct FleetVehicle {
  int id = -1;
  VehicleState state;
  Lifecycle lifecycle = Lifecycle::Idle;
  DriveTarget target = DriveTarget::None;
  int trip = -1;
  int station = -1;   // target or current station
  bool diverted = false;
};

struct FleetState {
  std::vector<FleetVehicle> vehicles;
  Depot depot;
  std::vector<Trip> trips;
  std::deque<int> delayed;  // trip ids waiting for a vehicle
};

struct DispatchPolicy {
  double reserve_soc = 0.10;
};

/// Highest-SOC idle vehicle (lowest id on ties) whose SOC covers the trip's
/// round-trip estimate plus the reserve.
std::optional<int> choose_vehicle(const FleetState& fleet, const Trip& trip,
                                  const VehicleParams& params, const DispatchPolicy& policy);

struct DispatchResult {
  std::optional<int> vehicle;  // unset: delayed
};

/// Assigns the trip or appends it to the delayed queue. The assigned
/// vehicle moves Idle -> EnRoute.
DispatchResult dispatch(FleetState& fleet, int trip_id, SimTime at, const VehicleParams& params,
                        const DispatchPolicy& policy);

enum class VehicleAction {
  None,
  StartOutbound,
  NextSegment,
  ScheduleArrival,
  BeginDwell,
  StartReturn,
  EmitChargeRequest,
  BecomeIdle,
  BeginCharging,
  WaitInQueue,
  StartDivert,
  MarkStranded,
};

enum class ChargeResolution { None, Granted, Queued, Divert };

struct TransitionContext {
  DriveTarget target = DriveTarget::None;
  bool more_segments = false;
  bool at_depot = false;
  bool station_available = false;  // a charging station exists where needed
  double soc = 1.0;
  double depot_charge_threshold = 0.95;
  ChargeResolution charge = ChargeResolution::None;
};

struct Transition {
  Lifecycle next = Lifecycle::Idle;
  VehicleAction action = VehicleAction::None;
};

/// Lifecycle state machine. Throws ModelError on an illegal transition.
Transition advance_vehicle(Lifecycle current, EventKind event, const TransitionContext& ctx);

}  // namespace evfleet
