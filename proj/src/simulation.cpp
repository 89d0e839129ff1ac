#include "evfleet/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "evfleet/errors.hpp"

namespace evfleet {

namespace {

struct DriveSession {
  std::vector<SegmentPlan> plan;
  std::size_t next = 0;
  double v_in = 0.0;
  bool active = false;  // a segment is in flight
  SimTime start;
  VehicleState after;
  SegmentResult result;
};

struct ChargeSession {
  bool active = false;
  int station = -1;
  int slot = -1;
  SimTime grant;
  double soc0 = 0.0;
  double rate_w = 0.0;  // power stored in the battery
  double energy_wh = 0.0;
};

struct Runtime {
  DriveSession drive;
  ChargeSession charge;
  std::optional<ChargeGrant> pending_grant;
  int n_trips = 0;
};

EventPayload vehicle_payload(int vehicle) {
  EventPayload p;
  p.vehicle = vehicle;
  return p;
}

}  // namespace

struct Simulation::Impl {
  ScenarioConfig cfg;
  SimulationOptions opts;
  RoadNetwork net;
  Depot depot;
  ChargingManager mgr;
  FleetState fleet;
  MetricsCollector metrics;
  Engine engine;
  std::vector<Runtime> rt;
  std::vector<std::string> station_names;
  SimTime horizon;
  SimTime tick_step;
  bool ran = false;

  Impl(ScenarioConfig c, SimulationOptions o)
      : cfg(std::move(c)),
        opts(o),
        net(build_network(cfg)),
        mgr(cfg.policies.charging_efficiency),
        metrics(cfg.fleet_size) {
    auto errors = cross_reference_errors(cfg, net);
    if (!errors.empty()) throw ConfigError(fmt::format("{}", fmt::join(errors, "\n")));
    depot = make_depot(net, *net.find_edge(cfg.depot_edge));
    for (const StationSpec& st : cfg.stations) {
      mgr.add_station(st.id, *net.find_edge(st.edge_id), st.slots, st.max_simultaneous);
      station_names.push_back(st.id);
    }
    fleet.depot = depot;
    for (int i = 0; i < cfg.fleet_size; ++i) {
      FleetVehicle v;
      v.id = i;
      v.state.soc = cfg.initial_soc;
      v.state.position = {depot.edge, net.edge(depot.edge).length_m};
      fleet.vehicles.push_back(v);
    }
    rt.resize(static_cast<std::size_t>(cfg.fleet_size));

    if (cfg.effective_vehicle_days() > 0) {
      RandomStreams rng = RandomStreams::from_seed(cfg.seed);
      const RoutingSettings settings{cfg.policies.routing, cfg.vehicle, cfg.environment,
                                     cfg.numerics.dt_s};
      fleet.trips = generate_day_schedule(rng, cfg.demand, cfg.effective_vehicle_days(), net,
                                          depot, settings, opts.schedule_exec);
    }

    horizon = SimTime::from_seconds(cfg.horizon_s);
    tick_step = SimTime::from_seconds(cfg.numerics.metrics_tick_s);
    if (tick_step.ms() <= 0) throw ConfigError("numerics.metrics_tick_s: below 1 ms");

    switch (opts.ticks) {
      case TickMode::Stream:
        metrics.open_tick_stream(opts.tick_path, cfg.numerics.tick_buffer_rows);
        break;
      case TickMode::Memory: metrics.keep_ticks_in_memory(); break;
      case TickMode::Discard: break;
    }
    if (opts.traces) {
      *opts.traces << "vehicle_id,edge_id,segment_start_s,t_s,dt_s,v_mps,a_mps2,gradient,"
                      "p_traction_w,p_battery_w,p_recup_w,p_re_w,soc,range_extender_on\n";
    }
    engine.set_event_log(opts.event_log);
  }

  FleetVehicle& vehicle(int id) {
    if (id < 0 || id >= static_cast<int>(fleet.vehicles.size())) {
      throw ModelError(fmt::format("event for unknown vehicle {}", id));
    }
    return fleet.vehicles[static_cast<std::size_t>(id)];
  }
  Runtime& runtime(int id) { return rt[static_cast<std::size_t>(id)]; }

  void set_lifecycle(FleetVehicle& v, Lifecycle next, int station = -1) {
    if (v.lifecycle == next) return;
    metrics.record_transition(engine.now(), v.id, v.lifecycle, next, station);
    v.lifecycle = next;
  }

  // --- driving -------------------------------------------------------------

  void start_drive(FleetVehicle& v, const Route& route, DriveTarget target) {
    DriveSession& d = runtime(v.id).drive;
    const auto edges = std::span<const EdgeId>(route.edges).subspan(1);
    d.plan = plan_route_speeds(net, edges, engine.now().hour_of_day(), cfg.vehicle);
    d.next = 0;
    d.v_in = 0.0;
    d.active = false;
    v.target = target;
    if (d.plan.empty()) {
      engine.schedule(EventKind::ArriveDestination, vehicle_payload(v.id), engine.now());
      return;
    }
    drive_next(v);
  }

  void drive_next(FleetVehicle& v) {
    DriveSession& d = runtime(v.id).drive;
    const SegmentPlan& seg = d.plan[d.next];
    d.after = v.state;
    d.after.position = {seg.edge, 0.0};
    d.result = drive_segment(d.after, net.edge(seg.edge), d.v_in, seg.v_exit, seg.v_cruise,
                             cfg.vehicle, cfg.environment, cfg.numerics.dt_s);
    d.start = engine.now();
    d.active = true;

    EventPayload p = vehicle_payload(v.id);
    p.edge = static_cast<std::int32_t>(seg.edge.value);
    bool re_on = v.state.range_extender_on;
    for (const TraceSample& s : d.result.trace) {
      if (s.range_extender_on != re_on) {
        engine.schedule(EventKind::RangeExtenderToggle, p, d.start + SimTime::from_seconds(s.t_s));
        re_on = s.range_extender_on;
      }
    }
    engine.schedule(d.result.stranded ? EventKind::Stranded : EventKind::SegmentComplete, p,
                    d.start + SimTime::from_seconds(d.result.duration_s));
  }

  void commit_segment(FleetVehicle& v) {
    DriveSession& d = runtime(v.id).drive;
    if (!d.active) throw ModelError(fmt::format("vehicle {} has no segment in flight", v.id));
    v.state = d.after;
    d.active = false;
    d.v_in = d.result.exit_velocity_mps;
    if (opts.traces) {
      const Edge& e = net.edge(d.after.position.edge);
      for (const TraceSample& s : d.result.trace) {
        *opts.traces << fmt::format(
            "{},{},{:.3f},{:.3f},{:.6f},{:.6f},{:.6f},{:.6f},{:.3f},{:.3f},{:.3f},{:.3f},{:.9f},{}\n",
            v.id, e.name, d.start.seconds(), s.t_s, s.dt_s, s.v_mps, s.a_mps2, s.gradient,
            s.p_traction_w, s.p_battery_w, s.p_recup_w, s.p_re_w, s.soc,
            s.range_extender_on ? 1 : 0);
      }
    }
  }

  // --- dispatch ------------------------------------------------------------

  void try_dispatch(int trip_id) {
    const auto res = dispatch(fleet, trip_id, engine.now(), cfg.vehicle, cfg.policies.dispatch);
    if (!res.vehicle) return;
    FleetVehicle& v = vehicle(*res.vehicle);
    metrics.record_transition(engine.now(), v.id, Lifecycle::Idle, v.lifecycle);
    start_drive(v, fleet.trips[static_cast<std::size_t>(trip_id)].outbound,
                DriveTarget::TripDestination);
  }

  void retry_delayed() {
    const std::vector<int> waiting(fleet.delayed.begin(), fleet.delayed.end());
    for (int trip_id : waiting) {
      const bool any_idle = std::any_of(fleet.vehicles.begin(), fleet.vehicles.end(),
                                        [](const auto& v) { return v.lifecycle == Lifecycle::Idle; });
      if (!any_idle) break;
      try_dispatch(trip_id);
    }
  }

  void finish_trip(FleetVehicle& v) {
    if (v.trip < 0) return;
    fleet.trips[static_cast<std::size_t>(v.trip)].status = TripStatus::Completed;
    ++runtime(v.id).n_trips;
    v.trip = -1;
  }

  void become_idle(FleetVehicle& v) {
    set_lifecycle(v, Lifecycle::Idle);
    v.target = DriveTarget::None;
    v.station = -1;
    v.diverted = false;
    retry_delayed();
  }

  // --- charging ------------------------------------------------------------

  std::optional<ReachEstimate> reach(EdgeId from, EdgeId to) const {
    const int hour = engine.now().hour_of_day();
    try {
      Route r = shortest_path(net, from, to, cfg.policies.routing, hour);
      const auto edges = std::span<const EdgeId>(r.edges).subspan(1);
      const DriveEstimate est =
          estimate_drive(net, edges, hour, cfg.vehicle, cfg.environment, cfg.numerics.dt_s);
      return ReachEstimate{std::move(r), est.duration_s, est.energy_wh};
    } catch (const NoRouteError&) {
      return std::nullopt;
    }
  }

  int station_here(const FleetVehicle& v) const {
    const EdgeId edge = v.state.position.edge;
    if (v.station >= 0 && mgr.station(v.station).location == edge) return v.station;
    const auto here = mgr.stations_at(edge);
    if (here.empty()) {
      throw ModelError(fmt::format("vehicle {} requests charging where no station exists", v.id));
    }
    for (int s : here) {
      if (mgr.station(s).has_free_capacity()) return s;
    }
    return here.front();
  }

  void begin_charging(FleetVehicle& v, const ChargeGrant& g) {
    ChargeSession& c = runtime(v.id).charge;
    c.active = true;
    c.station = g.station;
    c.slot = g.slot;
    c.grant = engine.now();
    c.soc0 = v.state.soc;
    c.energy_wh = g.energy_wh;
    c.rate_w = g.duration_s > 0.0 ? g.energy_wh * 3600.0 / g.duration_s : 0.0;
    v.station = g.station;
    EventPayload p = vehicle_payload(v.id);
    p.station = g.station;
    p.slot = g.slot;
    const EventHandle h = engine.schedule(EventKind::ChargeComplete, p, g.completion);
    mgr.attach_completion_event(g.station, g.slot, h);
  }

  void on_charge_request(FleetVehicle& v) {
    const int station = station_here(v);
    TransitionContext ctx;
    ctx.soc = v.state.soc;

    const bool may_divert = !v.diverted && !mgr.station(station).has_free_capacity() &&
                            cfg.policies.selection.mode != StationSelection::AlwaysWait;
    if (may_divert) {
      const VehicleChargeView view{v.state.position.edge, v.state.soc,
                                   cfg.vehicle.battery_capacity_wh};
      StationChoice choice = select_station(
          mgr, station, view, [this](EdgeId a, EdgeId b) { return reach(a, b); }, engine.now(),
          cfg.policies.selection);
      if (auto* d = std::get_if<DivertTo>(&choice)) {
        ctx.charge = ChargeResolution::Divert;
        const Transition tr = advance_vehicle(v.lifecycle, EventKind::ChargeRequest, ctx);
        set_lifecycle(v, tr.next);
        v.diverted = true;
        v.station = d->station;
        start_drive(v, d->route, DriveTarget::Station);
        return;
      }
    }

    const ChargeDemand demand{v.id, v.state.soc, cfg.policies.target_soc,
                              cfg.vehicle.battery_capacity_wh, cfg.vehicle.max_charging_power_w};
    const ChargeOutcome outcome = mgr.request_charge(station, demand, engine.now());
    if (const auto* g = std::get_if<ChargeGrant>(&outcome)) {
      ctx.charge = ChargeResolution::Granted;
      const Transition tr = advance_vehicle(v.lifecycle, EventKind::ChargeRequest, ctx);
      set_lifecycle(v, tr.next, station);
      begin_charging(v, *g);
    } else {
      ctx.charge = ChargeResolution::Queued;
      const Transition tr = advance_vehicle(v.lifecycle, EventKind::ChargeRequest, ctx);
      set_lifecycle(v, tr.next, station);
      v.station = station;
    }
  }

  void on_charge_complete(FleetVehicle& v, const Event& e) {
    ChargeSession& c = runtime(v.id).charge;
    if (!c.active || c.station != e.payload.station || c.slot != e.payload.slot) {
      throw ModelError(fmt::format("vehicle {}: completion for a session it does not hold", v.id));
    }
    const auto next = mgr.release_slot(c.station, c.slot, engine.now());
    v.state.soc = std::min(1.0, c.soc0 + c.energy_wh / cfg.vehicle.battery_capacity_wh);
    v.state.cumulative.grid_charged_wh += c.energy_wh;
    c.active = false;
    const EdgeId station_edge = mgr.station(c.station).location;

    if (next) {
      runtime(next->vehicle).pending_grant = *next;
      EventPayload p = vehicle_payload(next->vehicle);
      p.station = next->station;
      p.slot = next->slot;
      engine.schedule(EventKind::SlotGranted, p, engine.now());
    }

    TransitionContext ctx;
    ctx.at_depot = station_edge == depot.edge;
    ctx.soc = v.state.soc;
    const Transition tr = advance_vehicle(v.lifecycle, EventKind::ChargeComplete, ctx);
    v.diverted = false;
    if (tr.action == VehicleAction::BecomeIdle) {
      become_idle(v);
    } else {
      set_lifecycle(v, tr.next);
      v.station = -1;
      start_drive(v, shortest_path(net, station_edge, depot.edge, cfg.policies.routing,
                                   engine.now().hour_of_day()),
                  DriveTarget::Depot);
    }
  }

  // --- ticks ---------------------------------------------------------------

  TickRecord tick_for(const FleetVehicle& v, const Runtime& r) const {
    TickRecord rec;
    rec.t = engine.now();
    rec.vehicle = v.id;
    rec.state = v.lifecycle;
    rec.soc = v.state.soc;
    if (r.drive.active) {
      const auto& trace = r.drive.result.trace;
      const double elapsed = (engine.now() - r.drive.start).seconds();
      auto it = std::upper_bound(trace.begin(), trace.end(), elapsed,
                                 [](double t, const TraceSample& s) { return t < s.t_s; });
      const TraceSample& s = it == trace.begin() ? trace.front() : *std::prev(it);
      rec.v_mps = s.v_mps;
      rec.a_mps2 = s.a_mps2;
      rec.soc = s.soc;
      rec.p_traction_w = s.p_traction_w;
      rec.p_battery_w = s.p_battery_w;
      rec.p_recup_w = s.p_recup_w;
      rec.p_re_w = s.p_re_w;
    } else if (r.charge.active) {
      const double elapsed = (engine.now() - r.charge.grant).seconds();
      const double stored = std::min(r.charge.energy_wh, r.charge.rate_w * elapsed / 3600.0);
      rec.soc = std::min(1.0, r.charge.soc0 + stored / cfg.vehicle.battery_capacity_wh);
      rec.p_battery_w = -r.charge.rate_w;
    }
    return rec;
  }

  void on_tick() {
    for (const FleetVehicle& v : fleet.vehicles) {
      if (v.lifecycle == Lifecycle::Stranded) continue;
      metrics.record_tick(tick_for(v, runtime(v.id)));
    }
    const SimTime next = engine.now() + tick_step;
    if (next <= horizon) engine.schedule(EventKind::MetricsTick, {}, next);
  }

  const Runtime& runtime(int id) const { return rt[static_cast<std::size_t>(id)]; }

  // --- dispatcher ----------------------------------------------------------

  void handle(const Event& e) {
    switch (e.kind) {
      case EventKind::MetricsTick: on_tick(); return;
      case EventKind::SimulationEnd: return;
      case EventKind::VehicleSpawn: try_dispatch(e.payload.trip); return;
      default: break;
    }
    FleetVehicle& v = vehicle(e.payload.vehicle);
    TransitionContext ctx;
    ctx.soc = v.state.soc;
    ctx.target = v.target;

    switch (e.kind) {
      case EventKind::SegmentComplete: {
        commit_segment(v);
        DriveSession& d = runtime(v.id).drive;
        ctx.more_segments = d.next + 1 < d.plan.size();
        const Transition tr = advance_vehicle(v.lifecycle, e.kind, ctx);
        if (tr.action == VehicleAction::NextSegment) {
          ++d.next;
          drive_next(v);
        } else {
          engine.schedule(EventKind::ArriveDestination, vehicle_payload(v.id), engine.now());
        }
        break;
      }
      case EventKind::Stranded: {
        commit_segment(v);
        const Transition tr = advance_vehicle(v.lifecycle, e.kind, ctx);
        set_lifecycle(v, tr.next);
        if (v.trip >= 0) fleet.trips[static_cast<std::size_t>(v.trip)].status = TripStatus::Stranded;
        break;
      }
      case EventKind::RangeExtenderToggle:
        advance_vehicle(v.lifecycle, e.kind, ctx);
        break;
      case EventKind::ArriveDestination: {
        ctx.depot_charge_threshold = cfg.policies.depot_charge_threshold;
        ctx.station_available = !mgr.stations_at(depot.edge).empty();
        const Transition tr = advance_vehicle(v.lifecycle, e.kind, ctx);
        switch (tr.action) {
          case VehicleAction::BeginDwell: {
            set_lifecycle(v, tr.next);
            EventPayload p = vehicle_payload(v.id);
            p.trip = v.trip;
            const double dwell = fleet.trips[static_cast<std::size_t>(v.trip)].dwell_s;
            engine.schedule(EventKind::DwellComplete, p, engine.now() + SimTime::from_seconds(dwell));
            break;
          }
          case VehicleAction::EmitChargeRequest: {
            finish_trip(v);
            EventPayload p = vehicle_payload(v.id);
            p.edge = static_cast<std::int32_t>(v.state.position.edge.value);
            engine.schedule(EventKind::ChargeRequest, p, engine.now());
            break;
          }
          default:
            finish_trip(v);
            become_idle(v);
            break;
        }
        break;
      }
      case EventKind::DwellComplete: {
        const Transition tr = advance_vehicle(v.lifecycle, e.kind, ctx);
        set_lifecycle(v, tr.next);
        start_drive(v, fleet.trips[static_cast<std::size_t>(v.trip)].inbound, DriveTarget::Depot);
        break;
      }
      case EventKind::ChargeRequest: on_charge_request(v); break;
      case EventKind::SlotGranted: {
        Runtime& r = runtime(v.id);
        if (!r.pending_grant) throw ModelError(fmt::format("vehicle {}: no pending grant", v.id));
        const Transition tr = advance_vehicle(v.lifecycle, e.kind, ctx);
        set_lifecycle(v, tr.next, r.pending_grant->station);
        const ChargeGrant g = *r.pending_grant;
        r.pending_grant.reset();
        begin_charging(v, g);
        break;
      }
      case EventKind::ChargeComplete: on_charge_complete(v, e); break;
      default: throw ModelError(fmt::format("unhandled event {}", to_string(e.kind)));
    }
  }

  RunResult run() {
    if (ran) throw ModelError("simulation already ran");
    ran = true;
    for (const Trip& t : fleet.trips) {
      if (t.status == TripStatus::Rejected) continue;
      EventPayload p;
      p.trip = t.id;
      engine.schedule(EventKind::VehicleSpawn, p, t.depart);
    }
    engine.schedule(EventKind::MetricsTick, {}, SimTime{});
    engine.schedule(EventKind::SimulationEnd, {}, horizon);

    RunResult res;
    res.engine = engine.run_until(horizon, [this](const Event& e) { handle(e); });
    metrics.flush_ticks();

    // Sessions still charging at the horizon keep what they stored so far.
    for (const auto& [vid, wh] : mgr.close_open_sessions(horizon)) {
      FleetVehicle& v = vehicle(vid);
      v.state.soc = std::min(1.0, v.state.soc + wh / cfg.vehicle.battery_capacity_wh);
      v.state.cumulative.grid_charged_wh += wh;
    }

    std::vector<VehicleLedger> ledgers;
    for (const FleetVehicle& v : fleet.vehicles) {
      VehicleLedger l;
      l.soc_start = cfg.initial_soc;
      l.soc_end = v.state.soc;
      l.capacity_wh = cfg.vehicle.battery_capacity_wh;
      l.specific_fuel_l_per_kwh = cfg.vehicle.range_extender.specific_fuel_l_per_kwh;
      l.flows = v.state.cumulative;
      l.n_trips = runtime(v.id).n_trips;
      ledgers.push_back(l);
      res.total_grid_wh += l.flows.grid_charged_wh;
      res.total_fuel_l += l.flows.fuel_l;
      if (v.lifecycle == Lifecycle::Stranded) ++res.n_stranded;
    }

    double wait = 0.0;
    for (const SessionRecord& s : mgr.sessions()) {
      wait += ((s.granted ? *s.granted : horizon) - s.enqueued).seconds();
    }
    res.mean_wait_s = mgr.sessions().empty() ? 0.0 : wait / static_cast<double>(mgr.sessions().size());

    for (const Trip& t : fleet.trips) {
      ++res.n_trips;
      if (t.status == TripStatus::Rejected) ++res.n_rejected;
      if (t.status == TripStatus::Completed) ++res.n_completed;
      if (t.dispatched) ++res.n_dispatched;
      if (t.delayed) ++res.n_delayed;
    }

    metrics.finalize(horizon, std::move(ledgers), fleet.trips, mgr.sessions(), station_names,
                     cfg.numerics.histogram_edges_m, cfg.numerics.utilization_bin_s);
    res.min_idle = metrics.utilization().min_idle();
    return res;
  }
};

Simulation::Simulation(ScenarioConfig cfg, SimulationOptions opts)
    : impl_(std::make_unique<Impl>(std::move(cfg), opts)) {}
Simulation::~Simulation() = default;

RunResult Simulation::run() { return impl_->run(); }
const ScenarioConfig& Simulation::config() const { return impl_->cfg; }
const RoadNetwork& Simulation::network() const { return impl_->net; }
const FleetState& Simulation::fleet() const { return impl_->fleet; }
const ChargingManager& Simulation::charging() const { return impl_->mgr; }
MetricsCollector& Simulation::metrics() { return impl_->metrics; }
const MetricsCollector& Simulation::metrics() const { return impl_->metrics; }

ScenarioRun run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                         RunOutputs outputs) {
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  auto open = [&](const char* name) {
    auto f = std::make_unique<std::ofstream>(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!*f) throw IoError(fmt::format("cannot open {}", (out_dir / name).string()));
    return f;
  };
  std::unique_ptr<std::ofstream> events;
  std::unique_ptr<std::ofstream> traces;
  if (outputs.event_log) events = open("events.csv");
  if (outputs.traces) traces = open("traces.csv");

  SimulationOptions opts;
  opts.ticks = TickMode::Stream;
  opts.tick_path = out_dir / "ticks.csv";
  opts.event_log = events.get();
  opts.traces = traces.get();

  Simulation sim(cfg, opts);
  ScenarioRun out;
  out.result = sim.run();

  auto count_close = [](std::unique_ptr<std::ofstream>& f, const std::filesystem::path& p) {
    f->close();
    if (!*f) throw IoError(fmt::format("write failed: {}", p.string()));
    std::ifstream in(p, std::ios::binary);
    std::uint64_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    return lines == 0 ? 0 : lines - 1;
  };
  std::vector<ManifestEntry> extra;
  if (events) extra.push_back({"events.csv", count_close(events, out_dir / "events.csv")});
  if (traces) extra.push_back({"traces.csv", count_close(traces, out_dir / "traces.csv")});

  RunInfo info;
  info.seed = cfg.seed;
  info.config_hash = config_hash(cfg);
  info.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.manifest = sim.metrics().export_all(out_dir, info, extra);
  return out;
}

}  // namespace evfleet
