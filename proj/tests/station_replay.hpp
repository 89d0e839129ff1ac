#pragma once

// Random arrival schedule at one two-slot station, driven through the
// engine, plus an independent FIFO replay of the resulting event log.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "evfleet/charging.hpp"
#include "evfleet/engine.hpp"

namespace replay {

struct CaseResult {
  int max_concurrent = 0;
  std::vector<int> arrivals;        // vehicle ids, in dispatch order
  std::vector<int> grants;          // as issued by the manager
  std::vector<int> replay_grants;   // from the event log alone
  bool invariants_held = true;
};

inline int field(const std::string& payload, const std::string& key) {
  const auto pos = payload.find(key + ":");
  if (pos == std::string::npos) return -1;
  return std::stoi(payload.substr(pos + key.size() + 1));
}

/// FIFO multi-server replay: arrivals take a free server or join the
/// queue; each completion hands its server to the queue head.
inline std::vector<int> fifo_replay(const std::string& log, int servers) {
  std::istringstream in(log);
  std::string line;
  std::getline(in, line);  // header
  std::deque<int> queue;
  int busy = 0;
  std::vector<int> out;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() < 4) continue;
    const int v = field(cols[3], "vehicle");
    if (cols[2] == "ChargeRequest") {
      if (busy < servers) {
        ++busy;
        out.push_back(v);
      } else {
        queue.push_back(v);
      }
    } else if (cols[2] == "ChargeComplete") {
      if (queue.empty()) {
        --busy;
      } else {
        out.push_back(queue.front());
        queue.pop_front();
      }
    }
  }
  return out;
}

inline CaseResult run_case(std::uint64_t seed) {
  using namespace evfleet;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(2, 40);
  std::uniform_real_distribution<double> t_dist(0.0, 7200.0);
  std::uniform_real_distribution<double> deficit(50.0, 9000.0);
  std::uniform_real_distribution<double> vmax(2000.0, 11000.0);

  ChargingManager mgr;
  const int st = mgr.add_station("s", EdgeId{0},
                                 {{"schuko", 2300.0}, {"iec_type2", 3600.0}}, 2);
  Engine eng;
  std::ostringstream log;
  eng.set_event_log(&log);

  const int n = n_dist(rng);
  std::vector<double> deficits(static_cast<std::size_t>(n));
  std::vector<double> caps(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    // Arrival times are rounded to whole seconds so ties occur.
    EventPayload p;
    p.vehicle = v;
    p.station = st;
    eng.schedule(EventKind::ChargeRequest, p, SimTime::from_seconds(std::round(t_dist(rng))));
    deficits[static_cast<std::size_t>(v)] = deficit(rng);
    caps[static_cast<std::size_t>(v)] = vmax(rng);
  }

  CaseResult res;
  auto on_grant = [&](const ChargeGrant& g) {
    res.grants.push_back(g.vehicle);
    EventPayload p;
    p.vehicle = g.vehicle;
    p.station = g.station;
    p.slot = g.slot;
    eng.schedule(EventKind::ChargeComplete, p, g.completion);
  };
  eng.run_until(SimTime::from_seconds(1e6), [&](const Event& e) {
    if (e.kind == EventKind::ChargeRequest) {
      res.arrivals.push_back(e.payload.vehicle);
      const auto i = static_cast<std::size_t>(e.payload.vehicle);
      ChargeDemand d{e.payload.vehicle, 0.0, 1.0, deficits[i], caps[i]};
      const auto out = mgr.request_charge(st, d, e.at);
      if (const auto* g = std::get_if<ChargeGrant>(&out)) on_grant(*g);
    } else if (e.kind == EventKind::ChargeComplete) {
      if (auto next = mgr.release_slot(st, e.payload.slot, e.at)) on_grant(*next);
    }
    const int occ = mgr.station(st).occupied();
    res.max_concurrent = std::max(res.max_concurrent, occ);
    try {
      mgr.check_invariants();
    } catch (...) {
      res.invariants_held = false;
    }
  });
  res.replay_grants = fifo_replay(log.str(), 2);
  return res;
}

}  // namespace replay
