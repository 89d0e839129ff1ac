#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evfleet/charging.hpp"
#include "evfleet/dynamics.hpp"
#include "evfleet/fleet.hpp"
#include "evfleet/network.hpp"

namespace evfleet {

inline constexpr int kConfigSchema = 1;

struct GridSpec {
  int rows = 21;
  int cols = 21;
  double edge_length_m = 300.0;
  double speed_limit_mps = 13.9;
};

struct NetworkSpec {
  std::optional<GridSpec> grid;
  std::filesystem::path nodes_csv;  // used when grid is unset
  std::filesystem::path edges_csv;
  CongestionProfile congestion;
};

struct StationSpec {
  std::string id;
  std::string edge_id;
  std::vector<ChargingSlot> slots;
  int max_simultaneous = 2;
};

struct PolicySpec {
  RouteWeight routing = RouteWeight::TravelTime;
  DispatchPolicy dispatch;
  double depot_charge_threshold = 0.95;
  double target_soc = 1.0;
  SelectionPolicy selection;
  double charging_efficiency = 1.0;
};

struct NumericsSpec {
  double dt_s = 1.0;
  double metrics_tick_s = 10.0;
  double utilization_bin_s = 300.0;
  std::size_t tick_buffer_rows = 8192;
  std::vector<double> histogram_edges_m;
};

struct ScenarioConfig {
  int schema = kConfigSchema;
  std::uint64_t seed = 1;
  double horizon_s = 86'400.0;
  NetworkSpec network;
  std::string depot_edge;
  int fleet_size = 100;
  std::string vehicle_preset = "reference_compact";
  VehicleParams vehicle;
  double initial_soc = 1.0;
  std::vector<StationSpec> stations;
  DemandProfile demand;
  std::optional<int> vehicle_days;  // defaults to fleet_size
  PolicySpec policies;
  NumericsSpec numerics;
  Environment environment;

  int effective_vehicle_days() const { return vehicle_days.value_or(fleet_size); }
};

/// Parses a config tree. Relative paths resolve against `base_dir`.
/// Every problem is reported with the key path it belongs to; throws
/// ConfigError listing all of them.
ScenarioConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Reads and parses a config file. Unreadable or malformed files throw
/// IoError / ConfigError.
ScenarioConfig load_config(const std::filesystem::path& path);

/// Fully resolved tree with every default filled in. Feeding it back to
/// parse_config yields an equivalent config.
nlohmann::ordered_json to_json(const ScenarioConfig& cfg);

/// Builds the network described by the config.
RoadNetwork build_network(const ScenarioConfig& cfg);

/// Checks cross-references against a built network (depot and station
/// edges). Returns messages prefixed by the offending key path.
std::vector<std::string> cross_reference_errors(const ScenarioConfig& cfg,
                                                const RoadNetwork& net);

struct ValidationReport {
  bool ok = false;
  std::vector<std::string> errors;
  nlohmann::ordered_json effective;
};

/// Loads, builds the network and checks cross-references. Only an
/// unreadable file throws; everything else ends up in `errors`.
ValidationReport validate_config(const std::filesystem::path& path);

/// Keys accepted by `apply_override`.
const std::vector<std::string>& sweepable_keys();

/// Sets one sweepable key. `stations.count` keeps the first N stations.
/// Unknown keys or out-of-range values throw ConfigError.
void apply_override(ScenarioConfig& cfg, const std::string& key, double value);

/// FNV-1a over the compact effective config, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace evfleet
