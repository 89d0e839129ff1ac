#include "evfleet/engine.hpp"

#include <chrono>
#include <ostream>

#include <fmt/format.h>

#include "evfleet/errors.hpp"

namespace evfleet {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::VehicleSpawn: return "VehicleSpawn";
    case EventKind::SegmentComplete: return "SegmentComplete";
    case EventKind::ArriveDestination: return "ArriveDestination";
    case EventKind::DwellComplete: return "DwellComplete";
    case EventKind::ChargeRequest: return "ChargeRequest";
    case EventKind::SlotGranted: return "SlotGranted";
    case EventKind::ChargeComplete: return "ChargeComplete";
    case EventKind::RangeExtenderToggle: return "RangeExtenderToggle";
    case EventKind::Stranded: return "Stranded";
    case EventKind::MetricsTick: return "MetricsTick";
    case EventKind::SimulationEnd: return "SimulationEnd";
  }
  return "Unknown";
}

std::string Engine::format_payload(const EventPayload& p) {
  std::string out;
  auto add = [&out](std::string_view name, std::int32_t id) {
    if (id < 0) return;
    if (!out.empty()) out += '|';
    out += fmt::format("{}:{}", name, id);
  };
  add("vehicle", p.vehicle);
  add("station", p.station);
  add("edge", p.edge);
  add("slot", p.slot);
  add("trip", p.trip);
  return out;
}

EventHandle Engine::schedule(EventKind kind, const EventPayload& payload,
                             SimTime at) {
  if (at < clock_) {
    throw PastSchedulingError(fmt::format(
        "past-scheduling: {} at t={:.3f}s while clock is {:.3f}s",
        to_string(kind), at.seconds(), clock_.seconds()));
  }
  const std::uint64_t seq = next_sequence_++;
  queue_.emplace(Key{at.ms(), seq}, Event{at, seq, kind, payload});
  return EventHandle(at, seq);
}

bool Engine::cancel(const EventHandle& handle) {
  if (!handle.valid()) return false;
  return queue_.erase(Key{handle.at_.ms(), handle.sequence_}) > 0;
}

void Engine::set_event_log(std::ostream* out) {
  log_ = out;
  if (log_) *log_ << "time_s,sequence,kind,payload\n";
}

SimulationSummary Engine::run_until(SimTime end, const Handler& handler) {
  if (end < clock_) {
    throw PastSchedulingError(fmt::format(
        "past-scheduling: run_until({:.3f}s) while clock is {:.3f}s",
        end.seconds(), clock_.seconds()));
  }
  const auto wall_start = std::chrono::steady_clock::now();
  SimulationSummary summary;

  while (!queue_.empty()) {
    auto it = queue_.begin();
    if (it->second.at > end) break;
    const Event event = it->second;
    queue_.erase(it);
    clock_ = event.at;

    ++summary.dispatched;
    ++summary.dispatched_by_kind[static_cast<std::size_t>(event.kind)];
    if (log_) {
      *log_ << fmt::format("{:.3f},{},{},{}\n", event.at.seconds(),
                           event.sequence, to_string(event.kind),
                           format_payload(event.payload));
    }
    try {
      handler(event);
    } catch (const PastSchedulingError&) {
      throw;
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      throw ModelError(fmt::format("while dispatching {} #{} at t={:.3f}s ({}): {}",
                                   to_string(event.kind), event.sequence,
                                   event.at.seconds(),
                                   format_payload(event.payload), e.what()));
    }
  }
  clock_ = end;
  summary.clock = clock_;
  summary.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - wall_start)
                             .count();
  return summary;
}

}  // namespace evfleet
