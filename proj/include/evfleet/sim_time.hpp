#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>

namespace evfleet {

/// Simulation time with millisecond resolution. Integer storage keeps
/// equal-time comparisons exact across platforms.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime from_ms(std::int64_t ms) { return SimTime(ms); }
  static SimTime from_seconds(double s) {
    return SimTime(static_cast<std::int64_t>(std::llround(s * 1000.0)));
  }
  static constexpr SimTime max() {
    return SimTime(std::numeric_limits<std::int64_t>::max());
  }

  constexpr std::int64_t ms() const { return ms_; }
  constexpr double seconds() const { return static_cast<double>(ms_) / 1000.0; }

  /// Hour of day in [0, 24), assuming t = 0 is midnight.
  constexpr int hour_of_day() const {
    return static_cast<int>((ms_ / 3'600'000) % 24);
  }

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime operator+(SimTime d) const { return SimTime(ms_ + d.ms_); }
  constexpr SimTime operator-(SimTime d) const { return SimTime(ms_ - d.ms_); }
  constexpr SimTime& operator+=(SimTime d) {
    ms_ += d.ms_;
    return *this;
  }

 private:
  constexpr explicit SimTime(std::int64_t ms) : ms_(ms) {}
  std::int64_t ms_ = 0;
};

}  // namespace evfleet
