#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "evfleet/sim_time.hpp"

namespace evfleet {

enum class EventKind : std::uint8_t {
  VehicleSpawn,
  SegmentComplete,
  ArriveDestination,
  DwellComplete,
  ChargeRequest,
  SlotGranted,
  ChargeComplete,
  RangeExtenderToggle,
  Stranded,
  MetricsTick,
  SimulationEnd,
};
inline constexpr std::size_t kEventKindCount = 11;

std::string_view to_string(EventKind kind);

/// Entity references carried by an event. -1 means "not set".
struct EventPayload {
  std::int32_t vehicle = -1;
  std::int32_t station = -1;
  std::int32_t edge = -1;
  std::int32_t slot = -1;
  std::int32_t trip = -1;

  friend bool operator==(const EventPayload&, const EventPayload&) = default;
};

struct Event {
  SimTime at;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::SimulationEnd;
  EventPayload payload;
};

/// Identifies a scheduled event until it fires or is cancelled.
class EventHandle {
 public:
  EventHandle() = default;
  bool valid() const { return sequence_ != 0; }

 private:
  friend class Engine;
  EventHandle(SimTime at, std::uint64_t seq) : at_(at), sequence_(seq) {}
  SimTime at_;
  std::uint64_t sequence_ = 0;
};

struct SimulationSummary {
  std::array<std::uint64_t, kEventKindCount> dispatched_by_kind{};
  std::uint64_t dispatched = 0;
  SimTime clock;
  double wall_seconds = 0.0;

  std::uint64_t count(EventKind kind) const {
    return dispatched_by_kind[static_cast<std::size_t>(kind)];
  }
};

/// Single-threaded discrete-event core. Events are dispatched in
/// lexicographic (time, insertion sequence) order.
class Engine {
 public:
  using Handler = std::function<void(const Event&)>;

  SimTime now() const { return clock_; }
  std::size_t pending() const { return queue_.size(); }

  /// Throws PastSchedulingError if `at` precedes the clock.
  EventHandle schedule(EventKind kind, const EventPayload& payload, SimTime at);

  /// Returns false if the event already fired or was cancelled.
  bool cancel(const EventHandle& handle);

  /// Dispatches every event with time <= end, then advances the clock to
  /// `end`. Exceptions escaping the handler abort the run as a ModelError
  /// naming the offending event.
  SimulationSummary run_until(SimTime end, const Handler& handler);

  /// One CSV line per dispatched event: time_s,sequence,kind,payload.
  void set_event_log(std::ostream* out);

  static std::string format_payload(const EventPayload& payload);

 private:
  using Key = std::pair<std::int64_t, std::uint64_t>;

  SimTime clock_;
  std::uint64_t next_sequence_ = 1;
  std::map<Key, Event> queue_;
  std::ostream* log_ = nullptr;
};

}  // namespace evfleet
