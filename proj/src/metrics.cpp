#include "evfleet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "evfleet/errors.hpp"

namespace evfleet {

UsageCategory usage_category(Lifecycle state) {
  switch (state) {
    case Lifecycle::Idle: return UsageCategory::Idle;
    case Lifecycle::EnRoute:
    case Lifecycle::Dwelling:
    case Lifecycle::Returning: return UsageCategory::Busy;
    case Lifecycle::Charging: return UsageCategory::Charging;
    case Lifecycle::QueuedAtStation: return UsageCategory::Queued;
    case Lifecycle::Stranded: return UsageCategory::Stranded;
  }
  return UsageCategory::Busy;
}

int UtilizationSeries::min_idle() const {
  if (bins.empty()) return fleet_size;
  int m = std::numeric_limits<int>::max();
  for (const auto& b : bins) m = std::min(m, b.counts[0]);
  return m;
}

std::string tick_csv_header() {
  return "time_s,vehicle_id,state,v_mps,a_mps2,soc,p_traction_w,p_battery_w,p_recup_w,p_re_w\n";
}

std::string format_tick_row(const TickRecord& r) {
  return fmt::format("{:.3f},{},{},{:.4f},{:.4f},{:.9f},{:.3f},{:.3f},{:.3f},{:.3f}\n",
                     r.t.seconds(), r.vehicle, to_string(r.state), r.v_mps, r.a_mps2, r.soc,
                     r.p_traction_w, r.p_battery_w, r.p_recup_w, r.p_re_w);
}

// ---------------------------------------------------------------------------

DistanceHistograms distance_histogram(const std::vector<Trip>& trips,
                                      const std::vector<double>& bin_edges) {
  DistanceHistograms h;
  h.edges = bin_edges;
  if (h.edges.empty()) h.edges = {0.0};
  if (!std::is_sorted(h.edges.begin(), h.edges.end())) {
    throw ConfigError("histogram bin edges must be increasing");
  }
  const std::size_t n = h.edges.size();
  h.airline.assign(n, 0);
  h.driven.assign(n, 0);
  auto bin_of = [&h, n](double x) {
    const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), x);
    // Values below the first edge land in the first bin.
    const auto idx = static_cast<std::size_t>(std::distance(h.edges.begin(), it));
    return std::min(n - 1, idx == 0 ? 0 : idx - 1);
  };
  for (const Trip& t : trips) {
    if (t.status == TripStatus::Rejected) continue;
    ++h.airline[bin_of(t.airline_m)];
    ++h.driven[bin_of(t.driven_out_m)];
  }
  return h;
}

UtilizationSeries unused_vehicles_series(const std::vector<LifecycleChange>& transitions,
                                         int fleet_size, SimTime end, double bin_s) {
  if (!(bin_s > 0.0)) throw ConfigError("utilization bin width must be positive");
  UtilizationSeries series;
  series.bin_s = bin_s;
  series.fleet_size = fleet_size;
  const std::int64_t bin_ms = SimTime::from_seconds(bin_s).ms();
  const std::int64_t end_ms = end.ms();
  const std::size_t n_bins =
      end_ms <= 0 ? 0 : static_cast<std::size_t>((end_ms + bin_ms - 1) / bin_ms);
  series.bins.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    series.bins[b].start = SimTime::from_ms(static_cast<std::int64_t>(b) * bin_ms);
  }
  if (n_bins == 0) return series;

  // time spent per (vehicle, bin, category)
  std::vector<std::array<std::int64_t, kUsageCategoryCount>> occupancy(
      n_bins * static_cast<std::size_t>(fleet_size));
  std::vector<std::int64_t> last_t(static_cast<std::size_t>(fleet_size), 0);
  std::vector<Lifecycle> state(static_cast<std::size_t>(fleet_size), Lifecycle::Idle);

  auto credit = [&](int vehicle, std::int64_t from, std::int64_t to, Lifecycle s) {
    from = std::max<std::int64_t>(from, 0);
    to = std::min(to, end_ms);
    const auto cat = static_cast<std::size_t>(usage_category(s));
    while (from < to) {
      const auto b = static_cast<std::size_t>(from / bin_ms);
      const std::int64_t bin_end = std::min(to, static_cast<std::int64_t>(b + 1) * bin_ms);
      occupancy[b * static_cast<std::size_t>(fleet_size) + static_cast<std::size_t>(vehicle)][cat] +=
          bin_end - from;
      from = bin_end;
    }
  };
  for (const auto& tr : transitions) {
    if (tr.vehicle < 0 || tr.vehicle >= fleet_size) continue;
    const auto v = static_cast<std::size_t>(tr.vehicle);
    credit(tr.vehicle, last_t[v], tr.t.ms(), state[v]);
    last_t[v] = tr.t.ms();
    state[v] = tr.to;
  }
  for (int v = 0; v < fleet_size; ++v) {
    credit(v, last_t[static_cast<std::size_t>(v)], end_ms, state[static_cast<std::size_t>(v)]);
  }

  for (std::size_t b = 0; b < n_bins; ++b) {
    for (int v = 0; v < fleet_size; ++v) {
      const auto& occ = occupancy[b * static_cast<std::size_t>(fleet_size) + static_cast<std::size_t>(v)];
      std::size_t cat = 0;
      std::int64_t best = 0;
      for (std::size_t c = 1; c < kUsageCategoryCount; ++c) {
        if (occ[c] > best) {
          best = occ[c];
          cat = c;
        }
      }
      ++series.bins[b].counts[cat];
    }
  }
  return series;
}

// ---------------------------------------------------------------------------

MetricsCollector::MetricsCollector(int fleet_size) : fleet_size_(fleet_size) {}
MetricsCollector::~MetricsCollector() = default;
MetricsCollector::MetricsCollector(MetricsCollector&&) noexcept = default;
MetricsCollector& MetricsCollector::operator=(MetricsCollector&&) noexcept = default;

void MetricsCollector::open_tick_stream(const std::filesystem::path& path, std::size_t buffer_rows) {
  tick_stream_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
  if (!*tick_stream_) throw IoError(fmt::format("cannot open {}", path.string()));
  tick_path_ = path;
  tick_mode_ = TickMode::Stream;
  buffer_limit_ = std::max<std::size_t>(1, buffer_rows);
  *tick_stream_ << tick_csv_header();
}

void MetricsCollector::keep_ticks_in_memory() { tick_mode_ = TickMode::Memory; }

void MetricsCollector::record_tick(const TickRecord& r) {
  for (double x : {r.v_mps, r.a_mps2, r.soc, r.p_traction_w, r.p_battery_w, r.p_recup_w, r.p_re_w}) {
    if (!std::isfinite(x)) {
      throw ModelError(fmt::format("non-finite tick record for vehicle {} at t={:.3f}s", r.vehicle,
                                   r.t.seconds()));
    }
  }
  ++tick_rows_;
  switch (tick_mode_) {
    case TickMode::Discard: break;
    case TickMode::Memory: memory_ticks_.push_back(r); break;
    case TickMode::Stream:
      tick_buffer_ += format_tick_row(r);
      if (++buffered_rows_ >= buffer_limit_) flush_ticks();
      break;
  }
}

void MetricsCollector::flush_ticks() {
  if (tick_mode_ != TickMode::Stream || !tick_stream_) return;
  *tick_stream_ << tick_buffer_;
  tick_stream_->flush();
  if (!*tick_stream_) throw IoError(fmt::format("write failed: {}", tick_path_.string()));
  tick_buffer_.clear();
  buffered_rows_ = 0;
}

void MetricsCollector::record_transition(SimTime t, int vehicle, Lifecycle from, Lifecycle to,
                                         int station) {
  transitions_.push_back(LifecycleChange{t, vehicle, from, to, station});
}

void MetricsCollector::finalize(SimTime end, std::vector<VehicleLedger> ledgers,
                                std::vector<Trip> trips, std::vector<SessionRecord> sessions,
                                std::vector<std::string> station_names,
                                std::vector<double> histogram_edges, double utilization_bin_s) {
  end_ = end;
  ledgers_ = std::move(ledgers);
  trips_ = std::move(trips);
  sessions_ = std::move(sessions);
  station_names_ = std::move(station_names);
  histogram_edges_ = std::move(histogram_edges);
  utilization_bin_s_ = utilization_bin_s;
}

std::vector<Period> MetricsCollector::periods(int vehicle) const {
  if (vehicle < 0 || vehicle >= fleet_size_) {
    throw ModelError(fmt::format("unknown vehicle {}", vehicle));
  }
  std::vector<Period> out;
  Period current{SimTime{}, SimTime{}, Lifecycle::Idle, -1};
  for (const auto& tr : transitions_) {
    if (tr.vehicle != vehicle) continue;
    current.end = tr.t;
    if (current.end > current.start) out.push_back(current);
    current = Period{tr.t, tr.t, tr.to, tr.station};
  }
  current.end = end_;
  if (current.end > current.start || out.empty()) out.push_back(current);
  return out;
}

PowerFlowSummary MetricsCollector::power_flow_summary(int vehicle) const {
  if (vehicle < 0 || vehicle >= fleet_size_ ||
      static_cast<std::size_t>(vehicle) >= ledgers_.size()) {
    throw ModelError(fmt::format("unknown vehicle {}", vehicle));
  }
  PowerFlowSummary s;
  s.vehicle = vehicle;
  s.flows = ledgers_[static_cast<std::size_t>(vehicle)].flows;
  s.n_trips = ledgers_[static_cast<std::size_t>(vehicle)].n_trips;
  for (const Period& p : periods(vehicle)) {
    const double d = (p.end - p.start).seconds();
    switch (p.state) {
      case Lifecycle::Idle:
        s.idle_s += d;
        s.idle_periods.push_back(p);
        break;
      case Lifecycle::Charging:
        s.charging_s += d;
        s.charging_periods.push_back(p);
        break;
      case Lifecycle::QueuedAtStation: s.queued_s += d; break;
      case Lifecycle::EnRoute:
      case Lifecycle::Returning: s.driving_s += d; break;
      case Lifecycle::Dwelling: s.dwelling_s += d; break;
      case Lifecycle::Stranded: break;
    }
  }
  return s;
}

UtilizationSeries MetricsCollector::utilization() const {
  return unused_vehicles_series(transitions_, fleet_size_, end_, utilization_bin_s_);
}

DistanceHistograms MetricsCollector::histograms() const {
  return distance_histogram(trips_, histogram_edges_);
}

namespace {

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, std::string_view header)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError(fmt::format("cannot open {}", path.string()));
    out_ << header;
  }
  void row(const std::string& line) {
    out_ << line;
    ++rows_;
  }
  std::uint64_t close() {
    out_.close();
    if (!out_) throw IoError(fmt::format("write failed: {}", path_.string()));
    return rows_;
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint64_t rows_ = 0;
};

std::string opt_time(const std::optional<SimTime>& t) {
  return t ? fmt::format("{:.3f}", t->seconds()) : std::string();
}

}  // namespace

Manifest MetricsCollector::export_all(const std::filesystem::path& out_dir, const RunInfo& info,
                                      const std::vector<ManifestEntry>& extra) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  Manifest manifest;
  manifest.seed = info.seed;
  manifest.config_hash = info.config_hash;
  manifest.wall_clock_s = info.wall_clock_s;

  // ticks
  const auto tick_file = out_dir / "ticks.csv";
  if (tick_mode_ == TickMode::Stream && std::filesystem::equivalent(tick_path_, tick_file, ec)) {
    flush_ticks();
    tick_stream_->close();
    if (!*tick_stream_) throw IoError(fmt::format("write failed: {}", tick_path_.string()));
    tick_stream_.reset();
    tick_mode_ = TickMode::Discard;
    manifest.files.push_back({"ticks.csv", tick_rows_});
  } else {
    CsvFile f(tick_file, tick_csv_header());
    for (const auto& r : memory_ticks_) f.row(format_tick_row(r));
    manifest.files.push_back({"ticks.csv", f.close()});
  }

  {
    CsvFile f(out_dir / "trips.csv",
              "trip_id,vehicle_id,depart_t,airline_m,driven_out_m,driven_return_m,dwell_s,delay_s,"
              "status\n");
    for (const Trip& t : trips_) {
      const bool accepted = t.status != TripStatus::Rejected;
      const std::string vehicle = t.vehicle >= 0 ? std::to_string(t.vehicle) : std::string();
      const std::string delay =
          t.dispatched ? fmt::format("{:.3f}", (*t.dispatched - t.depart).seconds())
                       : std::string();
      f.row(fmt::format("{},{},{:.3f},{:.3f},{},{},{:.3f},{},{}\n", t.id, vehicle,
                        t.depart.seconds(), t.airline_m,
                        accepted ? fmt::format("{:.3f}", t.driven_out_m) : std::string(),
                        accepted ? fmt::format("{:.3f}", t.driven_return_m) : std::string(),
                        t.dwell_s, delay, to_string(t.status)));
    }
    manifest.files.push_back({"trips.csv", f.close()});
  }

  {
    CsvFile f(out_dir / "sessions.csv",
              "station_id,slot_id,vehicle_id,enqueue_t,grant_t,complete_t,energy_wh\n");
    for (const auto& s : sessions_) {
      const std::string station = s.station >= 0 && static_cast<std::size_t>(s.station) < station_names_.size()
                                      ? station_names_[static_cast<std::size_t>(s.station)]
                                      : std::to_string(s.station);
      const std::string slot = s.slot >= 0 ? std::to_string(s.slot) : std::string();
      f.row(fmt::format("{},{},{},{:.3f},{},{},{:.6f}\n", station, slot, s.vehicle,
                        s.enqueued.seconds(), opt_time(s.granted), opt_time(s.completed),
                        s.energy_wh));
    }
    manifest.files.push_back({"sessions.csv", f.close()});
  }

  {
    CsvFile f(out_dir / "summary.csv",
              "vehicle_id,consumed_wh,recuperated_wh,range_extended_wh,grid_charged_wh,fuel_l,"
              "distance_m,n_trips,idle_s,charging_s,queued_s,driving_s\n");
    for (int v = 0; v < fleet_size_ && static_cast<std::size_t>(v) < ledgers_.size(); ++v) {
      const PowerFlowSummary s = power_flow_summary(v);
      f.row(fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.9f},{:.3f},{},{:.3f},{:.3f},{:.3f},{:.3f}\n",
                        v, s.flows.consumed_wh, s.flows.recuperated_wh,
                        s.flows.range_extended_wh, s.flows.grid_charged_wh, s.flows.fuel_l,
                        s.flows.distance_m, s.n_trips, s.idle_s, s.charging_s, s.queued_s,
                        s.driving_s));
    }
    manifest.files.push_back({"summary.csv", f.close()});
  }

  {
    CsvFile f(out_dir / "utilization.csv", "bin_start_s,idle,busy,charging,queued,stranded\n");
    for (const auto& b : utilization().bins) {
      f.row(fmt::format("{:.3f},{},{},{},{},{}\n", b.start.seconds(), b.counts[0], b.counts[1],
                        b.counts[2], b.counts[3], b.counts[4]));
    }
    manifest.files.push_back({"utilization.csv", f.close()});
  }

  {
    CsvFile f(out_dir / "histogram.csv", "bin_lo_m,bin_hi_m,airline_count,driven_count\n");
    const DistanceHistograms h = histograms();
    for (std::size_t i = 0; i < h.edges.size(); ++i) {
      const std::string hi = i + 1 < h.edges.size() ? fmt::format("{:.3f}", h.edges[i + 1]) : "inf";
      f.row(fmt::format("{:.3f},{},{},{}\n", h.edges[i], hi, h.airline[i], h.driven[i]));
    }
    manifest.files.push_back({"histogram.csv", f.close()});
  }

  manifest.files.insert(manifest.files.end(), extra.begin(), extra.end());

  nlohmann::ordered_json j;
  j["generator"] = "evfleet";
  j["version"] = EVFLEET_VERSION;
  j["seed"] = manifest.seed;
  j["config_hash"] = manifest.config_hash;
  j["wall_clock_s"] = manifest.wall_clock_s;
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.files) j["files"].push_back({{"name", e.name}, {"rows", e.rows}});
  std::ofstream mf(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  mf << j.dump(2) << "\n";
  mf.close();
  if (!mf) throw IoError("write failed: manifest.json");
  return manifest;
}

}  // namespace evfleet
