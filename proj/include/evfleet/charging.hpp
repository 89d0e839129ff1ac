#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "evfleet/engine.hpp"
#include "evfleet/network.hpp"
#include "evfleet/sim_time.hpp"

namespace evfleet {

struct PlugType {
  std::string name;
  double power_w = 0.0;
};

/// Household SchuKo socket.
inline PlugType schuko_plug() { return {"schuko", 2300.0}; }
/// IEC 62196 Type 2, single phase.
inline PlugType iec_type2_plug() { return {"iec_type2", 3600.0}; }

struct ChargingSlot {
  std::string plug;
  double power_w = 0.0;
};

struct Occupancy {
  int vehicle = -1;
  SimTime grant;
  SimTime completion;
  double effective_power_w = 0.0;
  double energy_wh = 0.0;
  std::size_t session = 0;
  EventHandle completion_event;
};

struct QueueEntry {
  int vehicle = -1;
  SimTime enqueued;
  double deficit_wh = 0.0;
  double vehicle_max_w = 0.0;
  std::size_t session = 0;
};

struct ChargingStation {
  std::string name;
  EdgeId location;
  std::vector<ChargingSlot> slots;
  int max_simultaneous = 2;
  std::deque<QueueEntry> queue;
  std::vector<std::optional<Occupancy>> occupancy;  // indexed by slot

  int occupied() const;
  bool has_free_capacity() const;
};

/// One row of the session log. Unset optionals mean the vehicle was still
/// queued (no grant) or still charging (no completion) when the run ended.
struct SessionRecord {
  int station = -1;
  int slot = -1;
  int vehicle = -1;
  SimTime enqueued;
  std::optional<SimTime> granted;
  std::optional<SimTime> completed;
  double energy_wh = 0.0;
  double duration_s = 0.0;
  double effective_power_w = 0.0;
  double deficit_wh = 0.0;
};

struct ChargeGrant {
  int vehicle = -1;
  int station = -1;
  int slot = -1;
  SimTime completion;
  double energy_wh = 0.0;
  double duration_s = 0.0;
};

struct Queued {
  std::size_t position = 0;  // 1-based
};

using ChargeOutcome = std::variant<ChargeGrant, Queued>;

struct ChargeDemand {
  int vehicle = -1;
  double soc = 0.0;
  double target_soc = 1.0;
  double capacity_wh = 0.0;
  double vehicle_max_w = 0.0;
};

/// Seconds to deliver `deficit_wh` at min(slot, vehicle) power, constant rate.
double charge_duration(double deficit_wh, double slot_power_w, double vehicle_max_w,
                       double charging_efficiency);

enum class QueueEstimate { MeanSlot, FastestSlot };

/// Controls all stations: slot grants, FIFO queues, session bookkeeping.
class ChargingManager {
 public:
  explicit ChargingManager(double charging_efficiency = 1.0);

  int add_station(std::string name, EdgeId location, std::vector<ChargingSlot> slots,
                  int max_simultaneous);

  /// Grants the highest-power free slot (lowest slot index on ties) if the
  /// simultaneity limit allows, otherwise appends to the station queue.
  ChargeOutcome request_charge(int station, const ChargeDemand& demand, SimTime at);

  /// Frees a slot; the queue head, if any, takes it over at the same instant.
  std::optional<ChargeGrant> release_slot(int station, int slot, SimTime at);

  void attach_completion_event(int station, int slot, EventHandle handle);

  /// Expected wait before a newly arriving vehicle would be granted a slot.
  double estimated_wait_s(int station, SimTime at, QueueEstimate mode) const;

  /// Records partial energy for sessions still running at `end`. Returns
  /// the energy stored per vehicle so callers can update battery state.
  std::vector<std::pair<int, double>> close_open_sessions(SimTime end);

  std::vector<int> stations_at(EdgeId edge) const;
  const std::vector<ChargingStation>& stations() const { return stations_; }
  const ChargingStation& station(int id) const { return stations_.at(static_cast<std::size_t>(id)); }
  const std::vector<SessionRecord>& sessions() const { return sessions_; }
  double charging_efficiency() const { return efficiency_; }

  /// Throws ModelError if the simultaneity limit or the one-place-per-vehicle
  /// rule is violated anywhere.
  void check_invariants() const;

 private:
  ChargeGrant grant(int station, int slot, const QueueEntry& entry, SimTime at);
  ChargingStation& mutable_station(int id);

  double efficiency_;
  std::vector<ChargingStation> stations_;
  std::vector<SessionRecord> sessions_;
  std::unordered_map<int, int> vehicle_station_;  // vehicle -> station (queued or charging)
};

struct WaitHere {};
struct DivertTo {
  int station = -1;
  Route route;
  double travel_time_s = 0.0;
  double energy_wh = 0.0;
};
using StationChoice = std::variant<WaitHere, DivertTo>;

/// Route plus the drive time and battery energy needed to follow it.
struct ReachEstimate {
  Route route;
  double travel_time_s = 0.0;
  double energy_wh = 0.0;
};
using ReachEstimator = std::function<std::optional<ReachEstimate>(EdgeId from, EdgeId to)>;

enum class StationSelection { MinExpectedTime, AlwaysWait };

struct SelectionPolicy {
  StationSelection mode = StationSelection::MinExpectedTime;
  double safety_margin_soc = 0.05;
  QueueEstimate queue_estimate = QueueEstimate::MeanSlot;
};

struct VehicleChargeView {
  EdgeId edge;
  double soc = 0.0;
  double capacity_wh = 0.0;
};

/// Wait-or-divert decision for a vehicle at a full station. Diverts only
/// when an alternative reachable with SOC to spare is strictly faster than
/// the local wait estimate.
StationChoice select_station(const ChargingManager& mgr, int current_station,
                             const VehicleChargeView& vehicle, const ReachEstimator& reach,
                             SimTime at, const SelectionPolicy& policy);

}  // namespace evfleet
