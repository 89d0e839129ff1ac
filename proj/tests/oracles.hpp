#pragma once

// Reference computations written without the library's own helpers, used
// to cross-check routing, snapping and sampling.

#include <cmath>
#include <limits>
#include <vector>

#include "evfleet/network.hpp"

namespace oracle {

struct ArcList {
  int n_nodes = 0;
  std::vector<int> from, to;
  std::vector<double> w;
};

/// Plain Bellman-Ford; returns +inf for unreachable nodes.
inline std::vector<double> bellman_ford(const ArcList& g, int source) {
  std::vector<double> d(static_cast<std::size_t>(g.n_nodes),
                        std::numeric_limits<double>::infinity());
  d[static_cast<std::size_t>(source)] = 0.0;
  for (int round = 0; round + 1 < g.n_nodes; ++round) {
    bool changed = false;
    for (std::size_t k = 0; k < g.w.size(); ++k) {
      const double cand = d[static_cast<std::size_t>(g.from[k])] + g.w[k];
      if (cand < d[static_cast<std::size_t>(g.to[k])]) {
        d[static_cast<std::size_t>(g.to[k])] = cand;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

/// Distance from p to segment ab by parametric projection.
inline double seg_dist(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double wx = px - ax, wy = py - ay;
  const double c1 = vx * wx + vy * wy;
  if (c1 <= 0) return std::sqrt(wx * wx + wy * wy);
  const double c2 = vx * vx + vy * vy;
  if (c2 <= c1) return std::sqrt((px - bx) * (px - bx) + (py - by) * (py - by));
  const double t = c1 / c2;
  const double qx = ax + t * vx - px, qy = ay + t * vy - py;
  return std::sqrt(qx * qx + qy * qy);
}

/// Every edge within 1e-9 of the minimum distance.
inline std::vector<std::uint32_t> nearest_candidates(const evfleet::RoadNetwork& net, double px,
                                                     double py, double* best_out = nullptr) {
  std::vector<double> d;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : net.edges()) {
    const auto& a = net.node(e.from).pos;
    const auto& b = net.node(e.to).pos;
    d.push_back(seg_dist(px, py, a.x, a.y, b.x, b.y));
    best = std::min(best, d.back());
  }
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < d.size(); ++i) {
    if (d[i] <= best + 1e-9) out.push_back(i);
  }
  if (best_out) *best_out = best;
  return out;
}

/// Half-width of a 3-sigma binomial band for n draws with probability p.
inline double three_sigma(double n, double p) { return 3.0 * std::sqrt(n * p * (1.0 - p)); }

}  // namespace oracle
