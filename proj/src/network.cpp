#include "evfleet/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "evfleet/errors.hpp"

namespace evfleet {

CongestionProfile::CongestionProfile() { default_.fill(1.0); }

namespace {

void check_factors(const CongestionProfile::Hours& factors) {
  for (double f : factors) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw ConfigError(fmt::format("congestion factor {} outside (0, 1]", f));
    }
  }
}

}  // namespace

void CongestionProfile::set_default(const Hours& factors) {
  check_factors(factors);
  default_ = factors;
}

void CongestionProfile::set_class(int road_class, const Hours& factors) {
  check_factors(factors);
  classes_[road_class] = factors;
}

double CongestionProfile::factor(int road_class, int hour) const {
  const auto h = static_cast<std::size_t>(((hour % 24) + 24) % 24);
  if (auto it = classes_.find(road_class); it != classes_.end()) return it->second[h];
  return default_[h];
}

NodeId RoadNetwork::add_node(std::string name, Coord pos) {
  if (!std::isfinite(pos.x) || !std::isfinite(pos.y)) {
    throw ConfigError(fmt::format("node {} has non-finite coordinates", name));
  }
  if (node_index_.contains(name)) {
    throw ConfigError(fmt::format("duplicate node id {}", name));
  }
  const NodeId id{static_cast<std::uint32_t>(nodes_.size())};
  node_index_.emplace(name, id);
  nodes_.push_back(Node{std::move(name), pos});
  out_.emplace_back();
  return id;
}

EdgeId RoadNetwork::add_edge(Edge e) {
  if (e.from.value >= nodes_.size() || e.to.value >= nodes_.size()) {
    throw ConfigError(fmt::format("edge {} references an unknown node", e.name));
  }
  if (edge_index_.contains(e.name)) {
    throw ConfigError(fmt::format("duplicate edge id {}", e.name));
  }
  if (!(e.length_m > 0.0) || !std::isfinite(e.length_m)) {
    throw ConfigError(fmt::format("edge {} has non-positive length", e.name));
  }
  if (!(e.speed_limit_mps > 0.0) || !std::isfinite(e.speed_limit_mps)) {
    throw ConfigError(fmt::format("edge {} has non-positive speed limit", e.name));
  }
  if (!(std::abs(e.gradient) < 1.0)) {
    throw ConfigError(fmt::format("edge {} has |gradient| >= 1", e.name));
  }
  const double span = airline_distance(node(e.from).pos, node(e.to).pos);
  if (e.length_m < span * (1.0 - 1e-6)) {
    throw ConfigError(fmt::format(
        "edge {}: length shorter than endpoint distance ({} < {})", e.name,
        e.length_m, span));
  }
  const EdgeId id{static_cast<std::uint32_t>(edges_.size())};
  edge_index_.emplace(e.name, id);
  out_[e.from.value].push_back(id);
  edges_.push_back(std::move(e));
  return id;
}

std::optional<NodeId> RoadNetwork::find_node(std::string_view name) const {
  if (auto it = node_index_.find(std::string(name)); it != node_index_.end()) return it->second;
  return std::nullopt;
}

std::optional<EdgeId> RoadNetwork::find_edge(std::string_view name) const {
  if (auto it = edge_index_.find(std::string(name)); it != edge_index_.end()) return it->second;
  return std::nullopt;
}

double RoadNetwork::cruise_speed(EdgeId id, int hour) const {
  const Edge& e = edge(id);
  return e.speed_limit_mps * congestion_.factor(e.road_class, hour);
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::vector<std::string_view> read_row(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return {};
  return detail::split(line);
}

double field_double(std::string_view s, std::string_view column, int row) {
  auto v = detail::parse_double(s);
  if (!v) {
    throw ConfigError(fmt::format("invalid {} '{}' at row {}", column, s, row));
  }
  return *v;
}

}  // namespace

RoadNetwork load_network(std::istream& nodes_csv, std::istream& edges_csv) {
  RoadNetwork net;
  std::string line;

  auto header = read_row(nodes_csv, line);
  if (header.size() < 3 || header[0] != "node_id" || header[1] != "x_m" || header[2] != "y_m") {
    throw ConfigError("nodes.csv: expected header node_id,x_m,y_m");
  }
  int row = 1;
  while (std::getline(nodes_csv, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split(line);
    if (f.size() < 3) throw ConfigError(fmt::format("nodes.csv: too few columns at row {}", row));
    const Coord c{field_double(f[1], "x_m", row), field_double(f[2], "y_m", row)};
    if (net.find_node(f[0])) {
      throw ConfigError(fmt::format("nodes.csv: duplicate node id {} at row {}", f[0], row));
    }
    try {
      net.add_node(std::string(f[0]), c);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("nodes.csv: {} at row {}", e.what(), row));
    }
  }

  header = read_row(edges_csv, line);
  static constexpr std::array<std::string_view, 6> kRequired = {
      "edge_id", "from_node", "to_node", "length_m", "speed_limit_mps", "gradient"};
  if (header.size() < kRequired.size() ||
      !std::equal(kRequired.begin(), kRequired.end(), header.begin())) {
    throw ConfigError(
        "edges.csv: expected header edge_id,from_node,to_node,length_m,speed_limit_mps,gradient");
  }
  std::optional<std::size_t> class_col;
  std::optional<std::size_t> bidi_col;
  for (std::size_t i = kRequired.size(); i < header.size(); ++i) {
    if (header[i] == "road_class") class_col = i;
    if (header[i] == "bidirectional") bidi_col = i;
  }

  row = 1;
  while (std::getline(edges_csv, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split(line);
    if (f.size() < header.size()) {
      throw ConfigError(fmt::format("edges.csv: too few columns at row {}", row));
    }
    auto from = net.find_node(f[1]);
    if (!from) throw ConfigError(fmt::format("edges.csv: unknown node {} at row {}", f[1], row));
    auto to = net.find_node(f[2]);
    if (!to) throw ConfigError(fmt::format("edges.csv: unknown node {} at row {}", f[2], row));

    Edge e;
    e.name = std::string(f[0]);
    e.from = *from;
    e.to = *to;
    e.length_m = field_double(f[3], "length_m", row);
    e.speed_limit_mps = field_double(f[4], "speed_limit_mps", row);
    e.gradient = field_double(f[5], "gradient", row);
    if (class_col) {
      auto c = detail::parse_int(f[*class_col]);
      if (!c) throw ConfigError(fmt::format("edges.csv: invalid road_class at row {}", row));
      e.road_class = static_cast<int>(*c);
    }
    bool bidirectional = false;
    if (bidi_col) bidirectional = f[*bidi_col] == "1" || f[*bidi_col] == "true";

    try {
      Edge reverse = e;
      net.add_edge(std::move(e));
      if (bidirectional) {
        reverse.name += "_rev";
        std::swap(reverse.from, reverse.to);
        reverse.gradient = -reverse.gradient;
        net.add_edge(std::move(reverse));
      }
    } catch (const ConfigError& err) {
      throw ConfigError(fmt::format("edges.csv: {} at row {}", err.what(), row));
    }
  }
  return net;
}

RoadNetwork load_network(const std::filesystem::path& nodes_csv,
                         const std::filesystem::path& edges_csv) {
  std::ifstream nodes(nodes_csv);
  if (!nodes) throw ConfigError(fmt::format("cannot open {}", nodes_csv.string()));
  std::ifstream edges(edges_csv);
  if (!edges) throw ConfigError(fmt::format("cannot open {}", edges_csv.string()));
  return load_network(nodes, edges);
}

RoadNetwork generate_grid(int rows, int cols, double edge_length_m, double speed_limit_mps) {
  if (rows < 2 || cols < 2) {
    throw ConfigError(fmt::format("grid needs at least 2x2 nodes, got {}x{}", rows, cols));
  }
  if (!(edge_length_m > 0.0) || !(speed_limit_mps > 0.0)) {
    throw ConfigError("grid edge length and speed limit must be positive");
  }
  RoadNetwork net;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      net.add_node(fmt::format("N{}_{}", r, c), Coord{c * edge_length_m, r * edge_length_m});
    }
  }
  auto id = [cols](int r, int c) { return NodeId{static_cast<std::uint32_t>(r * cols + c)}; };
  int k = 0;
  auto add_pair = [&](NodeId a, NodeId b) {
    net.add_edge(Edge{fmt::format("E{}", k++), a, b, edge_length_m, speed_limit_mps, 0.0, 0});
    net.add_edge(Edge{fmt::format("E{}", k++), b, a, edge_length_m, speed_limit_mps, 0.0, 0});
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) add_pair(id(r, c), id(r, c + 1));
      if (r + 1 < rows) add_pair(id(r, c), id(r + 1, c));
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Geometry

double airline_distance(Coord a, Coord b) { return std::hypot(b.x - a.x, b.y - a.y); }

double point_segment_distance(Coord p, Coord a, Coord b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return airline_distance(p, a);
  const double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  // Endpoints exactly, so a point on a shared node is at 0 from every edge.
  if (t <= 0.0) return airline_distance(p, a);
  if (t >= 1.0) return airline_distance(p, b);
  return airline_distance(p, Coord{a.x + t * dx, a.y + t * dy});
}

namespace {
// Distances this close count as a tie; the lower edge index wins.
constexpr double kSnapTieM = 1e-9;
}  // namespace

EdgeId nearest_edge(const RoadNetwork& net, Coord p) {
  if (net.empty()) throw ConfigError("nearest_edge on an empty network");
  const auto& edges = net.edges();
  EdgeId best{0};
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < edges.size(); ++i) {
    const double d = point_segment_distance(p, net.node(edges[i].from).pos,
                                            net.node(edges[i].to).pos);
    if (d < best_d - kSnapTieM) {
      best_d = d;
      best = EdgeId{i};
    }
  }
  return best;
}

std::vector<EdgeId> nearest_edges_serial(const RoadNetwork& net, std::span<const Coord> points) {
  std::vector<EdgeId> out;
  out.reserve(points.size());
  for (const Coord& p : points) out.push_back(nearest_edge(net, p));
  return out;
}

std::vector<EdgeId> nearest_edges(const RoadNetwork& net, std::span<const Coord> points) {
  if (net.empty()) throw ConfigError("nearest_edge on an empty network");
  std::vector<EdgeId> out(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = nearest_edge(net, points[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Routing

double edge_weight(const RoadNetwork& net, EdgeId e, RouteWeight weight, int hour) {
  const Edge& edge = net.edge(e);
  if (weight == RouteWeight::Distance) return edge.length_m;
  return edge.length_m / net.cruise_speed(e, hour);
}

Route shortest_path(const RoadNetwork& net, EdgeId from, EdgeId to, RouteWeight weight,
                    int hour) {
  if (from.value >= net.edge_count() || to.value >= net.edge_count()) {
    throw ModelError("shortest_path: unknown edge");
  }
  Route route;
  if (from == to) {
    route.edges = {from};
    route.total_length_m = net.edge(from).length_m;
    route.weight = edge_weight(net, from, weight, hour);
    return route;
  }

  const NodeId source = net.edge(from).to;
  const NodeId target = net.edge(to).from;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::uint32_t kNoEdge = std::numeric_limits<std::uint32_t>::max();
  std::vector<double> dist(net.node_count(), kInf);
  std::vector<std::uint32_t> via(net.node_count(), kNoEdge);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;

  dist[source.value] = 0.0;
  heap.emplace(0.0, source.value);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    if (u == target.value) break;
    for (EdgeId e : net.out_edges(NodeId{u})) {
      const std::uint32_t v = net.edge(e).to.value;
      const double nd = d + edge_weight(net, e, weight, hour);
      if (nd < dist[v]) {
        dist[v] = nd;
        via[v] = e.value;
        heap.emplace(nd, v);
      }
    }
  }
  if (dist[target.value] == kInf) {
    throw NoRouteError(fmt::format("no route from {} to {}", net.edge(from).name,
                                   net.edge(to).name));
  }

  std::vector<EdgeId> middle;
  for (std::uint32_t n = target.value; n != source.value;) {
    const EdgeId e{via[n]};
    middle.push_back(e);
    n = net.edge(e).from.value;
  }
  route.edges.reserve(middle.size() + 2);
  route.edges.push_back(from);
  route.edges.insert(route.edges.end(), middle.rbegin(), middle.rend());
  route.edges.push_back(to);
  for (EdgeId e : route.edges) route.total_length_m += net.edge(e).length_m;
  route.weight = edge_weight(net, from, weight, hour) + dist[target.value] +
                 edge_weight(net, to, weight, hour);
  return route;
}

}  // namespace evfleet
