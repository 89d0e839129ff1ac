#include "evfleet/charging.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "evfleet/errors.hpp"

namespace evfleet {

int ChargingStation::occupied() const {
  return static_cast<int>(
      std::count_if(occupancy.begin(), occupancy.end(), [](const auto& o) { return o.has_value(); }));
}

bool ChargingStation::has_free_capacity() const { return occupied() < max_simultaneous; }

double charge_duration(double deficit_wh, double slot_power_w, double vehicle_max_w,
                       double charging_efficiency) {
  if (deficit_wh <= 0.0) return 0.0;
  return deficit_wh * 3600.0 / (std::min(slot_power_w, vehicle_max_w) * charging_efficiency);
}

ChargingManager::ChargingManager(double charging_efficiency) : efficiency_(charging_efficiency) {
  if (!(efficiency_ > 0.0 && efficiency_ <= 1.0)) {
    throw ConfigError("charging_efficiency must be in (0, 1]");
  }
}

int ChargingManager::add_station(std::string name, EdgeId location,
                                 std::vector<ChargingSlot> slots, int max_simultaneous) {
  if (slots.empty()) throw ConfigError(fmt::format("station {} has no slots", name));
  for (const auto& s : slots) {
    if (!(s.power_w > 0.0)) throw ConfigError(fmt::format("station {}: slot power must be > 0", name));
  }
  if (max_simultaneous < 1 || max_simultaneous > static_cast<int>(slots.size())) {
    throw ConfigError(fmt::format("station {}: max_simultaneous must be in [1, {}]", name,
                                  slots.size()));
  }
  ChargingStation st;
  st.name = std::move(name);
  st.location = location;
  st.occupancy.resize(slots.size());
  st.slots = std::move(slots);
  st.max_simultaneous = max_simultaneous;
  stations_.push_back(std::move(st));
  return static_cast<int>(stations_.size() - 1);
}

ChargingStation& ChargingManager::mutable_station(int id) {
  if (id < 0 || id >= static_cast<int>(stations_.size())) {
    throw ModelError(fmt::format("unknown station {}", id));
  }
  return stations_[static_cast<std::size_t>(id)];
}

ChargeGrant ChargingManager::grant(int station_id, int slot, const QueueEntry& entry, SimTime at) {
  ChargingStation& st = mutable_station(station_id);
  const double slot_power = st.slots[static_cast<std::size_t>(slot)].power_w;
  const double duration = charge_duration(entry.deficit_wh, slot_power, entry.vehicle_max_w, efficiency_);

  Occupancy occ;
  occ.vehicle = entry.vehicle;
  occ.grant = at;
  occ.completion = at + SimTime::from_seconds(duration);
  occ.effective_power_w = std::min(slot_power, entry.vehicle_max_w);
  occ.energy_wh = entry.deficit_wh;
  occ.session = entry.session;
  st.occupancy[static_cast<std::size_t>(slot)] = occ;
  if (st.occupied() > st.max_simultaneous) {
    throw ModelError(fmt::format("station {} exceeds its simultaneity limit", st.name));
  }

  SessionRecord& rec = sessions_[entry.session];
  rec.slot = slot;
  rec.granted = at;
  rec.duration_s = duration;
  rec.effective_power_w = occ.effective_power_w;
  return ChargeGrant{entry.vehicle, station_id, slot, occ.completion, entry.deficit_wh, duration};
}

ChargeOutcome ChargingManager::request_charge(int station_id, const ChargeDemand& demand,
                                              SimTime at) {
  ChargingStation& st = mutable_station(station_id);
  if (vehicle_station_.contains(demand.vehicle)) {
    throw ModelError(fmt::format("vehicle {} is already queued or charging", demand.vehicle));
  }
  if (!(demand.target_soc > demand.soc)) {
    throw ModelError(fmt::format("vehicle {}: target SOC {} not above current {}", demand.vehicle,
                                 demand.target_soc, demand.soc));
  }

  QueueEntry entry;
  entry.vehicle = demand.vehicle;
  entry.enqueued = at;
  entry.deficit_wh = (demand.target_soc - demand.soc) * demand.capacity_wh;
  entry.vehicle_max_w = demand.vehicle_max_w;
  entry.session = sessions_.size();
  sessions_.push_back(SessionRecord{station_id, -1, demand.vehicle, at, std::nullopt,
                                    std::nullopt, 0.0, 0.0, 0.0, entry.deficit_wh});
  vehicle_station_.emplace(demand.vehicle, station_id);

  if (st.has_free_capacity()) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(st.slots.size()); ++i) {
      if (st.occupancy[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || st.slots[static_cast<std::size_t>(i)].power_w >
                          st.slots[static_cast<std::size_t>(best)].power_w) {
        best = i;
      }
    }
    return grant(station_id, best, entry, at);
  }
  st.queue.push_back(entry);
  return Queued{st.queue.size()};
}

std::optional<ChargeGrant> ChargingManager::release_slot(int station_id, int slot, SimTime at) {
  ChargingStation& st = mutable_station(station_id);
  if (slot < 0 || slot >= static_cast<int>(st.slots.size()) ||
      !st.occupancy[static_cast<std::size_t>(slot)]) {
    throw ModelError(fmt::format("station {}: releasing free slot {}", st.name, slot));
  }
  const Occupancy occ = *st.occupancy[static_cast<std::size_t>(slot)];
  st.occupancy[static_cast<std::size_t>(slot)].reset();
  SessionRecord& rec = sessions_[occ.session];
  rec.completed = at;
  rec.energy_wh = occ.energy_wh;
  vehicle_station_.erase(occ.vehicle);

  if (st.queue.empty()) return std::nullopt;
  const QueueEntry head = st.queue.front();
  st.queue.pop_front();
  return grant(station_id, slot, head, at);
}

void ChargingManager::attach_completion_event(int station_id, int slot, EventHandle handle) {
  auto& occ = mutable_station(station_id).occupancy.at(static_cast<std::size_t>(slot));
  if (!occ) throw ModelError("attaching completion event to a free slot");
  occ->completion_event = handle;
}

double ChargingManager::estimated_wait_s(int station_id, SimTime at, QueueEstimate mode) const {
  const ChargingStation& st = station(station_id);
  if (st.has_free_capacity()) return 0.0;
  double total = 0.0;
  for (const auto& occ : st.occupancy) {
    if (occ) total += std::max(0.0, (occ->completion - at).seconds());
  }
  double queue_power = 0.0;
  if (mode == QueueEstimate::FastestSlot) {
    for (const auto& s : st.slots) queue_power = std::max(queue_power, s.power_w);
  } else {
    for (const auto& s : st.slots) queue_power += s.power_w;
    queue_power /= static_cast<double>(st.slots.size());
  }
  for (const auto& q : st.queue) {
    total += charge_duration(q.deficit_wh, queue_power, q.vehicle_max_w, efficiency_);
  }
  return total / st.max_simultaneous;
}

std::vector<std::pair<int, double>> ChargingManager::close_open_sessions(SimTime end) {
  std::vector<std::pair<int, double>> delivered;
  for (auto& st : stations_) {
    for (auto& occ : st.occupancy) {
      if (!occ) continue;
      SessionRecord& rec = sessions_[occ->session];
      const double elapsed = std::max(0.0, (end - occ->grant).seconds());
      rec.energy_wh =
          std::min(occ->energy_wh, occ->effective_power_w * efficiency_ * elapsed / 3600.0);
      delivered.emplace_back(occ->vehicle, rec.energy_wh);
    }
  }
  return delivered;
}

std::vector<int> ChargingManager::stations_at(EdgeId edge) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(stations_.size()); ++i) {
    if (stations_[static_cast<std::size_t>(i)].location == edge) out.push_back(i);
  }
  return out;
}

void ChargingManager::check_invariants() const {
  std::unordered_map<int, int> seen;
  for (const auto& st : stations_) {
    if (st.occupied() > st.max_simultaneous) {
      throw ModelError(fmt::format("station {} exceeds its simultaneity limit", st.name));
    }
    auto note = [&](int vehicle) {
      if (++seen[vehicle] > 1) {
        throw ModelError(fmt::format("vehicle {} appears in more than one place", vehicle));
      }
    };
    for (const auto& occ : st.occupancy) {
      if (occ) note(occ->vehicle);
    }
    for (const auto& q : st.queue) note(q.vehicle);
  }
  if (seen.size() != vehicle_station_.size()) {
    throw ModelError("charging manager membership index out of sync");
  }
}

StationChoice select_station(const ChargingManager& mgr, int current_station,
                             const VehicleChargeView& vehicle, const ReachEstimator& reach,
                             SimTime at, const SelectionPolicy& policy) {
  if (policy.mode == StationSelection::AlwaysWait) return WaitHere{};
  const double wait_here = mgr.estimated_wait_s(current_station, at, policy.queue_estimate);
  const double budget_wh = (vehicle.soc - policy.safety_margin_soc) * vehicle.capacity_wh;

  std::optional<DivertTo> best;
  double best_cost = wait_here;
  for (int s = 0; s < static_cast<int>(mgr.stations().size()); ++s) {
    if (s == current_station) continue;
    auto est = reach(vehicle.edge, mgr.station(s).location);
    if (!est || est->energy_wh > budget_wh) continue;
    const double cost = est->travel_time_s + mgr.estimated_wait_s(s, at, policy.queue_estimate);
    if (cost < best_cost) {
      best_cost = cost;
      best = DivertTo{s, std::move(est->route), est->travel_time_s, est->energy_wh};
    }
  }
  if (best) return *best;
  return WaitHere{};
}

}  // namespace evfleet
