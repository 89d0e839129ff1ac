#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evfleet/charging.hpp"
#include "evfleet/engine.hpp"
#include "evfleet/fleet.hpp"
#include "evfleet/metrics.hpp"
#include "evfleet/network.hpp"
#include "evfleet/scenario.hpp"

namespace evfleet {

struct SimulationOptions {
  TickMode ticks = TickMode::Discard;
  std::filesystem::path tick_path;  // for TickMode::Stream
  std::ostream* event_log = nullptr;
  std::ostream* traces = nullptr;   // per-step drive samples
  Execution schedule_exec = Execution::Parallel;
};

struct RunResult {
  int min_idle = 0;
  double mean_wait_s = 0.0;
  int n_stranded = 0;
  int n_delayed = 0;
  double total_grid_wh = 0.0;
  double total_fuel_l = 0.0;

  int n_trips = 0;
  int n_rejected = 0;
  int n_completed = 0;
  int n_dispatched = 0;
  SimulationSummary engine;
};

/// One scenario wired end to end: network, stations, fleet, schedule and
/// the event handlers driving them.
class Simulation {
 public:
  /// Throws ConfigError when cross-references do not resolve.
  explicit Simulation(ScenarioConfig cfg, SimulationOptions opts = {});
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Runs to the horizon and finalizes the metrics. Call once.
  RunResult run();

  const ScenarioConfig& config() const;
  const RoadNetwork& network() const;
  const FleetState& fleet() const;
  const ChargingManager& charging() const;
  MetricsCollector& metrics();
  const MetricsCollector& metrics() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RunOutputs {
  bool event_log = false;
  bool traces = false;
};

struct ScenarioRun {
  RunResult result;
  Manifest manifest;
};

/// Full pipeline into `out_dir`: ticks are streamed, everything else is
/// written by MetricsCollector::export_all. Optional events.csv and
/// traces.csv are added to the manifest when requested.
ScenarioRun run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                         RunOutputs outputs = {});

}  // namespace evfleet
