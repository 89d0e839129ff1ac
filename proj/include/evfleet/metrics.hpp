#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evfleet/charging.hpp"
#include "evfleet/dynamics.hpp"
#include "evfleet/fleet.hpp"
#include "evfleet/sim_time.hpp"

namespace evfleet {

struct TickRecord {
  SimTime t;
  int vehicle = -1;
  Lifecycle state = Lifecycle::Idle;
  double v_mps = 0.0;
  double a_mps2 = 0.0;
  double soc = 0.0;
  double p_traction_w = 0.0;
  double p_battery_w = 0.0;
  double p_recup_w = 0.0;
  double p_re_w = 0.0;
};

struct LifecycleChange {
  SimTime t;
  int vehicle = -1;
  Lifecycle from = Lifecycle::Idle;
  Lifecycle to = Lifecycle::Idle;
  int station = -1;
};

struct Period {
  SimTime start;
  SimTime end;
  Lifecycle state = Lifecycle::Idle;
  int station = -1;  // for charging/queued periods
};

/// Final battery bookkeeping for one vehicle.
struct VehicleLedger {
  double soc_start = 1.0;
  double soc_end = 1.0;
  double capacity_wh = 0.0;
  double specific_fuel_l_per_kwh = 0.0;
  EnergyCounters flows;
  int n_trips = 0;
};

struct PowerFlowSummary {
  int vehicle = -1;
  EnergyCounters flows;
  std::vector<Period> charging_periods;
  std::vector<Period> idle_periods;
  double idle_s = 0.0;
  double charging_s = 0.0;
  double queued_s = 0.0;
  double driving_s = 0.0;
  double dwelling_s = 0.0;
  int n_trips = 0;
};

/// Utilization categories. Busy covers EnRoute, Dwelling and Returning.
enum class UsageCategory { Idle, Busy, Charging, Queued, Stranded };
inline constexpr std::size_t kUsageCategoryCount = 5;
UsageCategory usage_category(Lifecycle state);

struct UtilizationBin {
  SimTime start;
  std::array<int, kUsageCategoryCount> counts{};
};

/// A vehicle counts as idle in a bin only if it was idle for the whole bin;
/// otherwise it is counted under the non-idle category it spent most time in.
struct UtilizationSeries {
  double bin_s = 0.0;
  int fleet_size = 0;
  std::vector<UtilizationBin> bins;

  /// Minimum idle count over all bins: the overdimension margin.
  int min_idle() const;
};

/// Aligned histograms over bins [e0,e1), ..., [e_{n-1}, e_n), [e_n, inf).
struct DistanceHistograms {
  std::vector<double> edges;
  std::vector<int> airline;
  std::vector<int> driven;
};

DistanceHistograms distance_histogram(const std::vector<Trip>& trips,
                                      const std::vector<double>& bin_edges);

UtilizationSeries unused_vehicles_series(const std::vector<LifecycleChange>& transitions,
                                         int fleet_size, SimTime end, double bin_s);

struct ManifestEntry {
  std::string name;
  std::uint64_t rows = 0;
};

struct Manifest {
  std::vector<ManifestEntry> files;
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_clock_s = 0.0;
};

struct RunInfo {
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_clock_s = 0.0;
};

enum class TickMode { Discard, Memory, Stream };

/// Collects per-tick samples, lifecycle transitions and end-of-run records,
/// and writes the CSV outputs.
class MetricsCollector {
 public:
  explicit MetricsCollector(int fleet_size);
  ~MetricsCollector();
  MetricsCollector(MetricsCollector&&) noexcept;
  MetricsCollector& operator=(MetricsCollector&&) noexcept;

  /// Streams tick rows to `path`, flushing every `buffer_rows` rows.
  void open_tick_stream(const std::filesystem::path& path, std::size_t buffer_rows);
  void keep_ticks_in_memory();

  /// Throws ModelError on non-finite fields and IoError on flush failure.
  void record_tick(const TickRecord& rec);
  void flush_ticks();
  std::uint64_t tick_count() const { return tick_rows_; }
  const std::vector<TickRecord>& ticks_in_memory() const { return memory_ticks_; }

  void record_transition(SimTime t, int vehicle, Lifecycle from, Lifecycle to,
                         int station = -1);
  const std::vector<LifecycleChange>& transitions() const { return transitions_; }

  /// Supplies the end-of-run records. Must be called before the analyses.
  void finalize(SimTime end, std::vector<VehicleLedger> ledgers, std::vector<Trip> trips,
                std::vector<SessionRecord> sessions, std::vector<std::string> station_names,
                std::vector<double> histogram_edges, double utilization_bin_s);

  SimTime end() const { return end_; }
  int fleet_size() const { return fleet_size_; }
  const std::vector<Trip>& trips() const { return trips_; }
  const std::vector<SessionRecord>& sessions() const { return sessions_; }
  const std::vector<VehicleLedger>& ledgers() const { return ledgers_; }

  /// Unknown vehicle -> ModelError.
  PowerFlowSummary power_flow_summary(int vehicle) const;
  std::vector<Period> periods(int vehicle) const;
  UtilizationSeries utilization() const;
  DistanceHistograms histograms() const;

  /// Writes ticks, trips, sessions, summary, utilization and histogram CSVs
  /// plus manifest.json. `extra` lists further files already written to
  /// `out_dir`. Throws IoError.
  Manifest export_all(const std::filesystem::path& out_dir, const RunInfo& info,
                      const std::vector<ManifestEntry>& extra = {});

 private:
  int fleet_size_;
  TickMode tick_mode_ = TickMode::Discard;
  std::filesystem::path tick_path_;
  std::unique_ptr<std::ofstream> tick_stream_;
  std::string tick_buffer_;
  std::size_t buffered_rows_ = 0;
  std::size_t buffer_limit_ = 4096;
  std::uint64_t tick_rows_ = 0;
  std::vector<TickRecord> memory_ticks_;

  std::vector<LifecycleChange> transitions_;
  SimTime end_;
  std::vector<VehicleLedger> ledgers_;
  std::vector<Trip> trips_;
  std::vector<SessionRecord> sessions_;
  std::vector<std::string> station_names_;
  std::vector<double> histogram_edges_;
  double utilization_bin_s_ = 300.0;
};

std::string tick_csv_header();
std::string format_tick_row(const TickRecord& rec);

}  // namespace evfleet
