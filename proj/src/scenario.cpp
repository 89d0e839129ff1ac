#include "evfleet/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "csv_util.hpp"
#include "evfleet/errors.hpp"

namespace evfleet {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string join_key(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : fmt::format("{}.{}", base, key);
}

/// Walks a config tree, collecting errors tagged with key paths.
class Reader {
 public:
  std::vector<std::string> errors;

  void error(const std::string& path, const std::string& msg) {
    errors.push_back(fmt::format("{}: {}", path, msg));
  }

  void allow_keys(const json& obj, const std::string& path,
                  std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, _] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        error(join_key(path, key), "unknown key");
      }
    }
  }

  /// nullptr if absent or of the wrong type (the latter is reported).
  const json* object(const json& parent, std::string_view key, const std::string& base) {
    const auto it = parent.find(key);
    if (it == parent.end()) return nullptr;
    if (!it->is_object()) {
      error(join_key(base, key), "expected an object");
      return nullptr;
    }
    return &*it;
  }

  const json* array(const json& parent, std::string_view key, const std::string& base) {
    const auto it = parent.find(key);
    if (it == parent.end()) return nullptr;
    if (!it->is_array()) {
      error(join_key(base, key), "expected an array");
      return nullptr;
    }
    return &*it;
  }

  bool number(const json& parent, std::string_view key, const std::string& base, double& out) {
    const auto it = parent.find(key);
    if (it == parent.end()) return false;
    if (!it->is_number()) {
      error(join_key(base, key), "expected a number");
      return false;
    }
    out = it->get<double>();
    return true;
  }

  template <typename Int>
  bool integer(const json& parent, std::string_view key, const std::string& base, Int& out) {
    const auto it = parent.find(key);
    if (it == parent.end()) return false;
    if (!(it->is_number_integer() || it->is_number_unsigned())) {
      error(join_key(base, key), "expected an integer");
      return false;
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (it->is_number_integer() && it->get<std::int64_t>() < 0) {
        error(join_key(base, key), "must be >= 0");
        return false;
      }
    }
    out = it->get<Int>();
    return true;
  }

  bool boolean(const json& parent, std::string_view key, const std::string& base, bool& out) {
    const auto it = parent.find(key);
    if (it == parent.end()) return false;
    if (!it->is_boolean()) {
      error(join_key(base, key), "expected true or false");
      return false;
    }
    out = it->get<bool>();
    return true;
  }

  bool string(const json& parent, std::string_view key, const std::string& base, std::string& out) {
    const auto it = parent.find(key);
    if (it == parent.end()) return false;
    if (!it->is_string()) {
      error(join_key(base, key), "expected a string");
      return false;
    }
    out = it->get<std::string>();
    return true;
  }

  bool hours(const json& parent, std::string_view key, const std::string& base,
             std::array<double, 24>& out) {
    const json* arr = array(parent, key, base);
    if (!arr) return false;
    if (arr->size() != 24) {
      error(join_key(base, key), "expected 24 values");
      return false;
    }
    for (std::size_t h = 0; h < 24; ++h) {
      if (!(*arr)[h].is_number()) {
        error(fmt::format("{}[{}]", join_key(base, key), h), "expected a number");
        return false;
      }
      out[h] = (*arr)[h].get<double>();
    }
    return true;
  }
};

std::string_view to_string(RouteWeight w) {
  return w == RouteWeight::Distance ? "distance" : "travel_time";
}

void read_vehicle(Reader& r, const json& j, const std::string& path, VehicleParams& v) {
  r.allow_keys(j, path,
               {"mass_kg", "drag_coefficient", "frontal_area_m2", "rolling_coefficient",
                "drivetrain_efficiency", "recuperation_enabled", "recuperation_efficiency",
                "max_recuperation_power_w", "auxiliary_power_w", "battery_capacity_wh",
                "max_charging_power_w", "max_acceleration_mps2", "max_deceleration_mps2",
                "range_extender"});
  r.number(j, "mass_kg", path, v.mass_kg);
  r.number(j, "drag_coefficient", path, v.drag_coefficient);
  r.number(j, "frontal_area_m2", path, v.frontal_area_m2);
  r.number(j, "rolling_coefficient", path, v.rolling_coefficient);
  r.number(j, "drivetrain_efficiency", path, v.drivetrain_efficiency);
  r.boolean(j, "recuperation_enabled", path, v.recuperation_enabled);
  r.number(j, "recuperation_efficiency", path, v.recuperation_efficiency);
  r.number(j, "max_recuperation_power_w", path, v.max_recuperation_power_w);
  r.number(j, "auxiliary_power_w", path, v.auxiliary_power_w);
  r.number(j, "battery_capacity_wh", path, v.battery_capacity_wh);
  r.number(j, "max_charging_power_w", path, v.max_charging_power_w);
  r.number(j, "max_acceleration_mps2", path, v.max_acceleration_mps2);
  r.number(j, "max_deceleration_mps2", path, v.max_deceleration_mps2);
  if (const json* re = r.object(j, "range_extender", path)) {
    const std::string rp = join_key(path, "range_extender");
    r.allow_keys(*re, rp, {"enabled", "power_w", "soc_on", "soc_off", "specific_fuel_l_per_kwh"});
    r.boolean(*re, "enabled", rp, v.range_extender.enabled);
    r.number(*re, "power_w", rp, v.range_extender.power_w);
    r.number(*re, "soc_on", rp, v.range_extender.soc_on);
    r.number(*re, "soc_off", rp, v.range_extender.soc_off);
    r.number(*re, "specific_fuel_l_per_kwh", rp, v.range_extender.specific_fuel_l_per_kwh);
  }
}

std::optional<ChargingSlot> plug_preset(std::string_view name) {
  for (const PlugType& p : {schuko_plug(), iec_type2_plug()}) {
    if (p.name == name) return ChargingSlot{p.name, p.power_w};
  }
  return std::nullopt;
}

void read_station(Reader& r, const json& j, const std::string& path, StationSpec& st) {
  if (!j.is_object()) {
    r.error(path, "expected an object");
    return;
  }
  r.allow_keys(j, path, {"id", "edge_id", "slots", "max_simultaneous"});
  if (!r.string(j, "id", path, st.id)) r.error(join_key(path, "id"), "required");
  if (!r.string(j, "edge_id", path, st.edge_id)) r.error(join_key(path, "edge_id"), "required");
  r.integer(j, "max_simultaneous", path, st.max_simultaneous);
  const json* slots = r.array(j, "slots", path);
  if (!slots) {
    r.error(join_key(path, "slots"), "required");
    return;
  }
  for (std::size_t i = 0; i < slots->size(); ++i) {
    const json& s = (*slots)[i];
    const std::string sp = fmt::format("{}.slots[{}]", path, i);
    if (s.is_string()) {
      if (auto preset = plug_preset(s.get<std::string>())) {
        st.slots.push_back(*preset);
      } else {
        r.error(sp, fmt::format("unknown plug \"{}\"", s.get<std::string>()));
      }
    } else if (s.is_object()) {
      r.allow_keys(s, sp, {"plug", "power_w"});
      ChargingSlot slot{"custom", 0.0};
      r.string(s, "plug", sp, slot.plug);
      const auto preset = plug_preset(slot.plug);
      if (preset) slot.power_w = preset->power_w;
      if (!r.number(s, "power_w", sp, slot.power_w) && !preset) {
        r.error(join_key(sp, "power_w"), "required for a custom plug");
      }
      if (!(slot.power_w > 0.0)) r.error(join_key(sp, "power_w"), "must be > 0");
      st.slots.push_back(slot);
    } else {
      r.error(sp, "expected a plug name or an object");
    }
  }
  if (st.slots.empty()) r.error(join_key(path, "slots"), "at least one slot required");
  if (st.max_simultaneous < 1 || st.max_simultaneous > static_cast<int>(st.slots.size())) {
    r.error(join_key(path, "max_simultaneous"),
            fmt::format("must be in [1, {}]", std::max<std::size_t>(1, st.slots.size())));
  }
}

std::optional<std::pair<double, double>> parse_bin(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const auto upper = detail::parse_double(detail::trim(text.substr(0, colon)));
  const auto weight = detail::parse_double(detail::trim(text.substr(colon + 1)));
  if (!upper || !weight) return std::nullopt;
  return std::pair{*upper, *weight};
}

void read_demand(Reader& r, const json& j, const std::string& path, ScenarioConfig& cfg) {
  DemandProfile& d = cfg.demand;
  r.allow_keys(j, path, {"vehicle_days", "departure_weights", "airline_distance", "dwell",
                         "trips_per_vehicle"});
  int days = 0;
  if (r.integer(j, "vehicle_days", path, days)) cfg.vehicle_days = days;
  r.hours(j, "departure_weights", path, d.departure_weights);
  if (const json* a = r.object(j, "airline_distance", path)) {
    const std::string ap = join_key(path, "airline_distance");
    r.allow_keys(*a, ap, {"min_m", "bins"});
    r.number(*a, "min_m", ap, d.airline_min_m);
    if (const json* bins = r.array(*a, "bins", ap)) {
      d.airline_bins.clear();
      for (std::size_t i = 0; i < bins->size(); ++i) {
        const std::string bp = fmt::format("{}.bins[{}]", ap, i);
        const json& b = (*bins)[i];
        auto parsed = b.is_string() ? parse_bin(b.get<std::string>()) : std::nullopt;
        if (!parsed) {
          r.error(bp, "expected \"upper_m:weight\"");
          continue;
        }
        d.airline_bins.push_back(*parsed);
      }
    }
  }
  if (const json* dw = r.object(j, "dwell", path)) {
    const std::string dp = join_key(path, "dwell");
    r.allow_keys(*dw, dp, {"family", "mu", "sigma", "seconds"});
    std::string family = "lognormal";
    r.string(*dw, "family", dp, family);
    if (family == "lognormal") {
      d.dwell.family = DwellDistribution::Family::LogNormal;
      r.number(*dw, "mu", dp, d.dwell.mu);
      r.number(*dw, "sigma", dp, d.dwell.sigma);
    } else if (family == "fixed") {
      d.dwell.family = DwellDistribution::Family::Fixed;
      if (!r.number(*dw, "seconds", dp, d.dwell.fixed_s)) {
        r.error(join_key(dp, "seconds"), "required for a fixed dwell");
      }
    } else {
      r.error(join_key(dp, "family"), "expected \"lognormal\" or \"fixed\"");
    }
  }
  if (const json* tp = r.object(j, "trips_per_vehicle", path)) {
    const std::string tpp = join_key(path, "trips_per_vehicle");
    r.allow_keys(*tp, tpp, {"family", "value"});
    std::string family = "poisson";
    r.string(*tp, "family", tpp, family);
    if (family == "poisson") {
      d.trips_per_day.family = TripsPerDay::Family::Poisson;
    } else if (family == "fixed") {
      d.trips_per_day.family = TripsPerDay::Family::Fixed;
    } else {
      r.error(join_key(tpp, "family"), "expected \"poisson\" or \"fixed\"");
    }
    r.number(*tp, "value", tpp, d.trips_per_day.value);
  }
  for (const auto& v : d.violations()) r.error(path, v);
}

void read_policies(Reader& r, const json& j, const std::string& path, PolicySpec& p) {
  r.allow_keys(j, path,
               {"routing_weight", "dispatch_reserve_soc", "depot_charge_threshold", "target_soc",
                "station_selection", "divert_safety_margin_soc", "queue_estimate",
                "charging_efficiency"});
  std::string s;
  if (r.string(j, "routing_weight", path, s)) {
    if (s == "travel_time") {
      p.routing = RouteWeight::TravelTime;
    } else if (s == "distance") {
      p.routing = RouteWeight::Distance;
    } else {
      r.error(join_key(path, "routing_weight"), "expected \"travel_time\" or \"distance\"");
    }
  }
  if (r.string(j, "station_selection", path, s)) {
    if (s == "min_expected_time") {
      p.selection.mode = StationSelection::MinExpectedTime;
    } else if (s == "always_wait") {
      p.selection.mode = StationSelection::AlwaysWait;
    } else {
      r.error(join_key(path, "station_selection"),
              "expected \"min_expected_time\" or \"always_wait\"");
    }
  }
  if (r.string(j, "queue_estimate", path, s)) {
    if (s == "mean_slot") {
      p.selection.queue_estimate = QueueEstimate::MeanSlot;
    } else if (s == "fastest_slot") {
      p.selection.queue_estimate = QueueEstimate::FastestSlot;
    } else {
      r.error(join_key(path, "queue_estimate"), "expected \"mean_slot\" or \"fastest_slot\"");
    }
  }
  r.number(j, "dispatch_reserve_soc", path, p.dispatch.reserve_soc);
  r.number(j, "depot_charge_threshold", path, p.depot_charge_threshold);
  r.number(j, "target_soc", path, p.target_soc);
  r.number(j, "divert_safety_margin_soc", path, p.selection.safety_margin_soc);
  r.number(j, "charging_efficiency", path, p.charging_efficiency);

  auto unit = [&](double v, std::string_view key) {
    if (!(v >= 0.0 && v <= 1.0)) r.error(join_key(path, key), "must be in [0, 1]");
  };
  unit(p.dispatch.reserve_soc, "dispatch_reserve_soc");
  unit(p.depot_charge_threshold, "depot_charge_threshold");
  unit(p.selection.safety_margin_soc, "divert_safety_margin_soc");
  if (!(p.target_soc > 0.0 && p.target_soc <= 1.0)) {
    r.error(join_key(path, "target_soc"), "must be in (0, 1]");
  }
  if (p.depot_charge_threshold > p.target_soc) {
    r.error(join_key(path, "depot_charge_threshold"), "must not exceed target_soc");
  }
  if (!(p.charging_efficiency > 0.0 && p.charging_efficiency <= 1.0)) {
    r.error(join_key(path, "charging_efficiency"), "must be in (0, 1]");
  }
}

std::vector<double> default_histogram_edges(const DemandProfile& d) {
  double top = d.airline_min_m;
  for (const auto& b : d.airline_bins) top = std::max(top, b.first);
  const double step = 500.0;
  const double limit = std::max(step, 2.0 * top);
  std::vector<double> edges;
  for (double e = 0.0; e <= limit + 1e-9; e += step) edges.push_back(e);
  return edges;
}

ScenarioConfig parse_collect(const json& j, const std::filesystem::path& base_dir, Reader& r) {
  ScenarioConfig cfg;
  cfg.demand = synthetic_demand_profile();
  if (!j.is_object()) {
    r.error("<root>", "expected an object");
    return cfg;
  }
  r.allow_keys(j, "", {"schema", "seed", "horizon_s", "network", "depot_edge", "fleet", "stations",
                       "demand", "policies", "numerics", "environment"});
  if (!r.integer(j, "schema", "", cfg.schema)) {
    r.error("schema", "required");
  } else if (cfg.schema != kConfigSchema) {
    r.error("schema", fmt::format("unsupported version {} (expected {})", cfg.schema, kConfigSchema));
  }
  r.integer(j, "seed", "", cfg.seed);
  r.number(j, "horizon_s", "", cfg.horizon_s);
  if (!(cfg.horizon_s >= 0.0 && std::isfinite(cfg.horizon_s))) r.error("horizon_s", "must be >= 0");

  if (const json* n = r.object(j, "network", "")) {
    r.allow_keys(*n, "network", {"grid", "nodes_csv", "edges_csv", "congestion"});
    if (const json* g = r.object(*n, "grid", "network")) {
      GridSpec grid;
      r.allow_keys(*g, "network.grid", {"rows", "cols", "edge_length_m", "speed_limit_mps"});
      r.integer(*g, "rows", "network.grid", grid.rows);
      r.integer(*g, "cols", "network.grid", grid.cols);
      r.number(*g, "edge_length_m", "network.grid", grid.edge_length_m);
      r.number(*g, "speed_limit_mps", "network.grid", grid.speed_limit_mps);
      cfg.network.grid = grid;
    }
    std::string nodes;
    std::string edges;
    const bool has_nodes = r.string(*n, "nodes_csv", "network", nodes);
    const bool has_edges = r.string(*n, "edges_csv", "network", edges);
    if (cfg.network.grid && (has_nodes || has_edges)) {
      r.error("network", "give either grid or nodes_csv/edges_csv, not both");
    } else if (!cfg.network.grid) {
      if (!has_nodes) r.error("network.nodes_csv", "required without a grid");
      if (!has_edges) r.error("network.edges_csv", "required without a grid");
      cfg.network.nodes_csv = std::filesystem::absolute(base_dir / nodes).lexically_normal();
      cfg.network.edges_csv = std::filesystem::absolute(base_dir / edges).lexically_normal();
    }
    if (const json* c = r.object(*n, "congestion", "network")) {
      r.allow_keys(*c, "network.congestion", {"default", "classes"});
      CongestionProfile::Hours row{};
      try {
        if (r.hours(*c, "default", "network.congestion", row)) cfg.network.congestion.set_default(row);
      } catch (const ConfigError& e) {
        r.error("network.congestion.default", e.what());
      }
      if (const json* classes = r.object(*c, "classes", "network.congestion")) {
        for (const auto& [key, _] : classes->items()) {
          const std::string cp = fmt::format("network.congestion.classes.{}", key);
          const auto cls = detail::parse_int(key);
          if (!cls) {
            r.error(cp, "class keys must be integers");
            continue;
          }
          try {
            if (r.hours(*classes, key, "network.congestion.classes", row)) {
              cfg.network.congestion.set_class(static_cast<int>(*cls), row);
            }
          } catch (const ConfigError& e) {
            r.error(cp, e.what());
          }
        }
      }
    }
  } else {
    cfg.network.grid = GridSpec{};
  }

  if (!r.string(j, "depot_edge", "", cfg.depot_edge)) r.error("depot_edge", "required");

  if (const json* f = r.object(j, "fleet", "")) {
    r.allow_keys(*f, "fleet", {"size", "preset", "vehicle", "initial_soc"});
    r.integer(*f, "size", "fleet", cfg.fleet_size);
    if (cfg.fleet_size < 0) r.error("fleet.size", "must be >= 0");
    r.string(*f, "preset", "fleet", cfg.vehicle_preset);
    if (cfg.vehicle_preset == "reference_compact") {
      cfg.vehicle = reference_compact_preset();
    } else if (cfg.vehicle_preset == "infinite_battery") {
      cfg.vehicle = infinite_battery_preset();
    } else {
      r.error("fleet.preset", "expected \"reference_compact\" or \"infinite_battery\"");
    }
    if (const json* v = r.object(*f, "vehicle", "fleet")) read_vehicle(r, *v, "fleet.vehicle", cfg.vehicle);
    r.number(*f, "initial_soc", "fleet", cfg.initial_soc);
    if (!(cfg.initial_soc >= 0.0 && cfg.initial_soc <= 1.0)) {
      r.error("fleet.initial_soc", "must be in [0, 1]");
    }
  }
  for (const auto& v : cfg.vehicle.violations()) r.error("fleet.vehicle", v);

  if (const json* s = r.array(j, "stations", "")) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < s->size(); ++i) {
      const std::string sp = fmt::format("stations[{}]", i);
      StationSpec st;
      read_station(r, (*s)[i], sp, st);
      if (!st.id.empty() && !ids.insert(st.id).second) {
        r.error(join_key(sp, "id"), fmt::format("duplicate station id \"{}\"", st.id));
      }
      cfg.stations.push_back(std::move(st));
    }
  }

  if (const json* d = r.object(j, "demand", "")) read_demand(r, *d, "demand", cfg);
  if (cfg.vehicle_days && *cfg.vehicle_days < 0) r.error("demand.vehicle_days", "must be >= 0");

  if (const json* p = r.object(j, "policies", "")) read_policies(r, *p, "policies", cfg.policies);

  if (const json* n = r.object(j, "numerics", "")) {
    auto& num = cfg.numerics;
    r.allow_keys(*n, "numerics",
                 {"dt_s", "metrics_tick_s", "utilization_bin_s", "tick_buffer_rows",
                  "histogram_edges_m"});
    r.number(*n, "dt_s", "numerics", num.dt_s);
    r.number(*n, "metrics_tick_s", "numerics", num.metrics_tick_s);
    r.number(*n, "utilization_bin_s", "numerics", num.utilization_bin_s);
    r.integer(*n, "tick_buffer_rows", "numerics", num.tick_buffer_rows);
    if (const json* h = r.array(*n, "histogram_edges_m", "numerics")) {
      for (std::size_t i = 0; i < h->size(); ++i) {
        if (!(*h)[i].is_number()) {
          r.error(fmt::format("numerics.histogram_edges_m[{}]", i), "expected a number");
          continue;
        }
        num.histogram_edges_m.push_back((*h)[i].get<double>());
      }
      if (num.histogram_edges_m.empty()) r.error("numerics.histogram_edges_m", "must not be empty");
      for (std::size_t i = 1; i < num.histogram_edges_m.size(); ++i) {
        if (!(num.histogram_edges_m[i] > num.histogram_edges_m[i - 1])) {
          r.error("numerics.histogram_edges_m", "must be strictly increasing");
          break;
        }
      }
    }
  }
  {
    const auto& num = cfg.numerics;
    if (!(num.dt_s > 0.0)) r.error("numerics.dt_s", "must be > 0");
    if (!(num.metrics_tick_s > 0.0)) r.error("numerics.metrics_tick_s", "must be > 0");
    if (!(num.utilization_bin_s > 0.0)) r.error("numerics.utilization_bin_s", "must be > 0");
    if (num.tick_buffer_rows < 1) r.error("numerics.tick_buffer_rows", "must be >= 1");
  }
  if (cfg.numerics.histogram_edges_m.empty()) {
    cfg.numerics.histogram_edges_m = default_histogram_edges(cfg.demand);
  }

  if (const json* e = r.object(j, "environment", "")) {
    r.allow_keys(*e, "environment", {"gravity_mps2", "air_density_kgpm3"});
    r.number(*e, "gravity_mps2", "environment", cfg.environment.gravity_mps2);
    r.number(*e, "air_density_kgpm3", "environment", cfg.environment.air_density_kgpm3);
    if (!(cfg.environment.gravity_mps2 > 0.0)) r.error("environment.gravity_mps2", "must be > 0");
    if (!(cfg.environment.air_density_kgpm3 > 0.0)) {
      r.error("environment.air_density_kgpm3", "must be > 0");
    }
  }
  return cfg;
}

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += '\n';
    out += e;
  }
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

ojson hours_json(const CongestionProfile::Hours& h) {
  ojson a = ojson::array();
  for (double x : h) a.push_back(x);
  return a;
}

}  // namespace

ScenarioConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  Reader r;
  ScenarioConfig cfg = parse_collect(j, base_dir, r);
  if (!r.errors.empty()) throw ConfigError(join_errors(r.errors));
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path), path.parent_path());
}

ojson to_json(const ScenarioConfig& cfg) {
  ojson j;
  j["schema"] = cfg.schema;
  j["seed"] = cfg.seed;
  j["horizon_s"] = cfg.horizon_s;

  ojson net;
  if (cfg.network.grid) {
    const GridSpec& g = *cfg.network.grid;
    net["grid"] = {{"rows", g.rows},
                   {"cols", g.cols},
                   {"edge_length_m", g.edge_length_m},
                   {"speed_limit_mps", g.speed_limit_mps}};
  } else {
    net["nodes_csv"] = cfg.network.nodes_csv.string();
    net["edges_csv"] = cfg.network.edges_csv.string();
  }
  ojson classes = ojson::object();
  for (const auto& [cls, row] : cfg.network.congestion.class_rows()) {
    classes[std::to_string(cls)] = hours_json(row);
  }
  net["congestion"] = {{"default", hours_json(cfg.network.congestion.default_row())},
                       {"classes", classes}};
  j["network"] = net;
  j["depot_edge"] = cfg.depot_edge;

  const VehicleParams& v = cfg.vehicle;
  const auto& re = v.range_extender;
  j["fleet"] = {
      {"size", cfg.fleet_size},
      {"preset", cfg.vehicle_preset},
      {"initial_soc", cfg.initial_soc},
      {"vehicle",
       {{"mass_kg", v.mass_kg},
        {"drag_coefficient", v.drag_coefficient},
        {"frontal_area_m2", v.frontal_area_m2},
        {"rolling_coefficient", v.rolling_coefficient},
        {"drivetrain_efficiency", v.drivetrain_efficiency},
        {"recuperation_enabled", v.recuperation_enabled},
        {"recuperation_efficiency", v.recuperation_efficiency},
        {"max_recuperation_power_w", v.max_recuperation_power_w},
        {"auxiliary_power_w", v.auxiliary_power_w},
        {"battery_capacity_wh", v.battery_capacity_wh},
        {"max_charging_power_w", v.max_charging_power_w},
        {"max_acceleration_mps2", v.max_acceleration_mps2},
        {"max_deceleration_mps2", v.max_deceleration_mps2},
        {"range_extender",
         {{"enabled", re.enabled},
          {"power_w", re.power_w},
          {"soc_on", re.soc_on},
          {"soc_off", re.soc_off},
          {"specific_fuel_l_per_kwh", re.specific_fuel_l_per_kwh}}}}}};

  ojson stations = ojson::array();
  for (const StationSpec& st : cfg.stations) {
    ojson slots = ojson::array();
    for (const ChargingSlot& s : st.slots) slots.push_back({{"plug", s.plug}, {"power_w", s.power_w}});
    stations.push_back({{"id", st.id},
                        {"edge_id", st.edge_id},
                        {"slots", slots},
                        {"max_simultaneous", st.max_simultaneous}});
  }
  j["stations"] = stations;

  const DemandProfile& d = cfg.demand;
  ojson bins = ojson::array();
  for (const auto& [upper, w] : d.airline_bins) bins.push_back(fmt::format("{}:{}", upper, w));
  ojson dwell;
  if (d.dwell.family == DwellDistribution::Family::Fixed) {
    dwell = {{"family", "fixed"}, {"seconds", d.dwell.fixed_s}};
  } else {
    dwell = {{"family", "lognormal"}, {"mu", d.dwell.mu}, {"sigma", d.dwell.sigma}};
  }
  j["demand"] = {
      {"vehicle_days", cfg.effective_vehicle_days()},
      {"departure_weights", hours_json(d.departure_weights)},
      {"airline_distance", {{"min_m", d.airline_min_m}, {"bins", bins}}},
      {"dwell", dwell},
      {"trips_per_vehicle",
       {{"family", d.trips_per_day.family == TripsPerDay::Family::Fixed ? "fixed" : "poisson"},
        {"value", d.trips_per_day.value}}}};

  const PolicySpec& p = cfg.policies;
  j["policies"] = {
      {"routing_weight", to_string(p.routing)},
      {"dispatch_reserve_soc", p.dispatch.reserve_soc},
      {"depot_charge_threshold", p.depot_charge_threshold},
      {"target_soc", p.target_soc},
      {"station_selection",
       p.selection.mode == StationSelection::AlwaysWait ? "always_wait" : "min_expected_time"},
      {"divert_safety_margin_soc", p.selection.safety_margin_soc},
      {"queue_estimate",
       p.selection.queue_estimate == QueueEstimate::FastestSlot ? "fastest_slot" : "mean_slot"},
      {"charging_efficiency", p.charging_efficiency}};

  const NumericsSpec& n = cfg.numerics;
  j["numerics"] = {{"dt_s", n.dt_s},
                   {"metrics_tick_s", n.metrics_tick_s},
                   {"utilization_bin_s", n.utilization_bin_s},
                   {"tick_buffer_rows", n.tick_buffer_rows},
                   {"histogram_edges_m", n.histogram_edges_m}};
  j["environment"] = {{"gravity_mps2", cfg.environment.gravity_mps2},
                      {"air_density_kgpm3", cfg.environment.air_density_kgpm3}};
  return j;
}

RoadNetwork build_network(const ScenarioConfig& cfg) {
  RoadNetwork net;
  if (cfg.network.grid) {
    const GridSpec& g = *cfg.network.grid;
    net = generate_grid(g.rows, g.cols, g.edge_length_m, g.speed_limit_mps);
  } else {
    net = load_network(cfg.network.nodes_csv, cfg.network.edges_csv);
  }
  net.set_congestion(cfg.network.congestion);
  return net;
}

std::vector<std::string> cross_reference_errors(const ScenarioConfig& cfg, const RoadNetwork& net) {
  std::vector<std::string> out;
  if (!net.find_edge(cfg.depot_edge)) {
    out.push_back(fmt::format("depot_edge: unknown edge \"{}\"", cfg.depot_edge));
  }
  for (std::size_t i = 0; i < cfg.stations.size(); ++i) {
    if (!net.find_edge(cfg.stations[i].edge_id)) {
      out.push_back(fmt::format("stations[{}].edge_id: unknown edge \"{}\"", i,
                                cfg.stations[i].edge_id));
    }
  }
  return out;
}

ValidationReport validate_config(const std::filesystem::path& path) {
  ValidationReport report;
  const json j = read_json_file(path);
  Reader r;
  ScenarioConfig cfg = parse_collect(j, path.parent_path(), r);
  report.errors = std::move(r.errors);
  if (report.errors.empty()) {
    try {
      const RoadNetwork net = build_network(cfg);
      for (auto& e : cross_reference_errors(cfg, net)) report.errors.push_back(std::move(e));
    } catch (const ConfigError& e) {
      report.errors.push_back(fmt::format("network: {}", e.what()));
    } catch (const IoError& e) {
      report.errors.push_back(fmt::format("network: {}", e.what()));
    }
  }
  report.ok = report.errors.empty();
  if (report.ok) report.effective = to_json(cfg);
  return report;
}

const std::vector<std::string>& sweepable_keys() {
  static const std::vector<std::string> keys = {"fleet.size", "stations.count",
                                                "stations.slot_power_w",
                                                "stations.max_simultaneous"};
  return keys;
}

void apply_override(ScenarioConfig& cfg, const std::string& key, double value) {
  auto as_count = [&](double lo, double hi) {
    if (value != std::floor(value) || value < lo || value > hi) {
      throw ConfigError(fmt::format("{}: value {} must be an integer in [{}, {}]", key, value, lo, hi));
    }
    return static_cast<int>(value);
  };
  if (key == "fleet.size") {
    // Demand stays tied to the original fleet so sweeps compare like with like.
    if (!cfg.vehicle_days) cfg.vehicle_days = cfg.fleet_size;
    cfg.fleet_size = as_count(0, 1e6);
  } else if (key == "stations.count") {
    cfg.stations.resize(static_cast<std::size_t>(
        as_count(0, static_cast<double>(cfg.stations.size()))));
  } else if (key == "stations.slot_power_w") {
    if (!(value > 0.0)) throw ConfigError(fmt::format("{}: must be > 0", key));
    for (auto& st : cfg.stations) {
      for (auto& s : st.slots) s.power_w = value;
    }
  } else if (key == "stations.max_simultaneous") {
    const int n = as_count(1, 1e6);
    for (std::size_t i = 0; i < cfg.stations.size(); ++i) {
      if (n > static_cast<int>(cfg.stations[i].slots.size())) {
        throw ConfigError(fmt::format("stations[{}].max_simultaneous: {} exceeds slot count {}", i, n,
                                      cfg.stations[i].slots.size()));
      }
      cfg.stations[i].max_simultaneous = n;
    }
  } else {
    throw ConfigError(fmt::format("\"{}\" is not sweepable (expected one of: {})", key,
                                  fmt::join(sweepable_keys(), ", ")));
  }
}

std::string config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(cfg).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace evfleet
