#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace evfleet {

/// Planar coordinates in meters.
struct Coord {
  double x = 0.0;
  double y = 0.0;
};

template <typename Tag>
struct StrongIndex {
  std::uint32_t value = 0;
  constexpr auto operator<=>(const StrongIndex&) const = default;
};
using NodeId = StrongIndex<struct NodeTag>;
using EdgeId = StrongIndex<struct EdgeTag>;

struct Node {
  std::string name;
  Coord pos;
};

struct Edge {
  std::string name;
  NodeId from;
  NodeId to;
  double length_m = 0.0;
  double speed_limit_mps = 0.0;
  double gradient = 0.0;  // rise over run, signed
  int road_class = 0;
};

/// Hour-of-day speed factors in (0, 1], per road class. Classes without an
/// explicit entry use the default row.
class CongestionProfile {
 public:
  using Hours = std::array<double, 24>;

  CongestionProfile();
  void set_default(const Hours& factors);
  void set_class(int road_class, const Hours& factors);

  double factor(int road_class, int hour) const;
  const Hours& default_row() const { return default_; }
  const std::map<int, Hours>& class_rows() const { return classes_; }

 private:
  Hours default_;
  std::map<int, Hours> classes_;
};

/// Directed road graph. Ids index into the node/edge arrays in insertion
/// order; names are the external identifiers used in files and configs.
class RoadNetwork {
 public:
  NodeId add_node(std::string name, Coord pos);
  /// Validates the edge against the network invariants; throws ConfigError.
  EdgeId add_edge(Edge edge);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }

  const Node& node(NodeId id) const { return nodes_[id.value]; }
  const Edge& edge(EdgeId id) const { return edges_[id.value]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const EdgeId> out_edges(NodeId id) const { return out_[id.value]; }

  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<EdgeId> find_edge(std::string_view name) const;

  const CongestionProfile& congestion() const { return congestion_; }
  void set_congestion(CongestionProfile profile) { congestion_ = std::move(profile); }

  /// Speed limit scaled by the congestion factor for the given hour.
  double cruise_speed(EdgeId id, int hour) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> out_;
  std::unordered_map<std::string, NodeId> node_index_;
  std::unordered_map<std::string, EdgeId> edge_index_;
  CongestionProfile congestion_;
};

enum class RouteWeight { Distance, TravelTime };

struct Route {
  std::vector<EdgeId> edges;
  double total_length_m = 0.0;
  double weight = 0.0;  // meters or seconds, per the weight used

  EdgeId origin() const { return edges.front(); }
  EdgeId destination() const { return edges.back(); }
};

/// Reads `node_id,x_m,y_m` and `edge_id,from_node,to_node,length_m,
/// speed_limit_mps,gradient` CSVs. Optional trailing columns `road_class`
/// and `bidirectional` (0/1) are recognised by header name.
RoadNetwork load_network(std::istream& nodes_csv, std::istream& edges_csv);
RoadNetwork load_network(const std::filesystem::path& nodes_csv,
                         const std::filesystem::path& edges_csv);

/// Manhattan grid with two directed edges per segment and zero gradient.
/// Node (r, c) sits at (c * edge_length, r * edge_length) and is named
/// "N<r>_<c>". Edges are named "E<k>" in creation order: for each node in
/// row-major order, the eastward pair then the northward pair.
RoadNetwork generate_grid(int rows, int cols, double edge_length_m,
                          double speed_limit_mps);

double airline_distance(Coord a, Coord b);
double point_segment_distance(Coord p, Coord a, Coord b);

/// Edge closest to `p`; ties go to the lower edge index.
EdgeId nearest_edge(const RoadNetwork& net, Coord p);

/// Batch snapping. The parallel kernel and the serial reference return
/// identical results.
std::vector<EdgeId> nearest_edges(const RoadNetwork& net, std::span<const Coord> points);
std::vector<EdgeId> nearest_edges_serial(const RoadNetwork& net,
                                         std::span<const Coord> points);

double edge_weight(const RoadNetwork& net, EdgeId e, RouteWeight weight, int hour);

/// Minimal-weight route from the end of `from` to the start of `to`,
/// including both edges. Throws NoRouteError when `to` is unreachable.
Route shortest_path(const RoadNetwork& net, EdgeId from, EdgeId to,
                    RouteWeight weight, int hour = 0);

}  // namespace evfleet
