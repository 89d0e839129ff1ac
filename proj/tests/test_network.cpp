#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "evfleet/errors.hpp"
#include "evfleet/network.hpp"
#include "oracles.hpp"

using namespace evfleet;

namespace {

// Random planar graph: n nodes in a 2 km square, ~3n directed arcs whose
// length is the endpoint distance stretched by up to 50 %.
RoadNetwork random_network(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> coord(0.0, 2000.0);
  std::uniform_real_distribution<double> stretch(1.0, 1.5);
  std::uniform_real_distribution<double> speed(5.0, 30.0);
  std::uniform_int_distribution<int> pick(0, n - 1);
  RoadNetwork net;
  for (int i = 0; i < n; ++i) net.add_node("n" + std::to_string(i), {coord(rng), coord(rng)});
  const int arcs = 3 * n;
  for (int k = 0; k < arcs; ++k) {
    const int a = pick(rng);
    int b = pick(rng);
    if (a == b) b = (b + 1) % n;
    Edge e;
    e.name = "e" + std::to_string(k);
    e.from = NodeId{static_cast<std::uint32_t>(a)};
    e.to = NodeId{static_cast<std::uint32_t>(b)};
    const double d = airline_distance(net.node(e.from).pos, net.node(e.to).pos);
    e.length_m = std::max(1.0, d * stretch(rng));
    e.speed_limit_mps = speed(rng);
    net.add_edge(e);
  }
  return net;
}

oracle::ArcList arcs(const RoadNetwork& net, RouteWeight w) {
  oracle::ArcList g;
  g.n_nodes = static_cast<int>(net.node_count());
  for (std::uint32_t i = 0; i < net.edge_count(); ++i) {
    g.from.push_back(static_cast<int>(net.edges()[i].from.value));
    g.to.push_back(static_cast<int>(net.edges()[i].to.value));
    g.w.push_back(edge_weight(net, EdgeId{i}, w, 0));
  }
  return g;
}

}  // namespace

TEST_CASE("grid generator counts and naming") {
  const RoadNetwork net = generate_grid(3, 3, 100.0, 10.0);
  CHECK(net.node_count() == 9);
  CHECK(net.edge_count() == 24);
  CHECK(net.find_node("N2_1").has_value());
  const Node& n = net.node(*net.find_node("N2_1"));
  CHECK(n.pos.x == 100.0);
  CHECK(n.pos.y == 200.0);
  // E0 is the eastward edge out of N0_0.
  const Edge& e0 = net.edge(*net.find_edge("E0"));
  CHECK(net.node(e0.from).name == "N0_0");
  CHECK(net.node(e0.to).name == "N0_1");
  for (const Edge& e : net.edges()) {
    CHECK(e.length_m == 100.0);
    CHECK(e.gradient == 0.0);
  }
}

TEST_CASE("grid output passes load-time validation") {
  const RoadNetwork g = generate_grid(4, 5, 250.0, 13.9);
  std::ostringstream nodes, edges;
  nodes << "node_id,x_m,y_m\n";
  for (const Node& n : g.nodes()) nodes << n.name << "," << n.pos.x << "," << n.pos.y << "\n";
  edges << "edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\n";
  for (const Edge& e : g.edges()) {
    edges << e.name << "," << g.node(e.from).name << "," << g.node(e.to).name << ","
          << e.length_m << "," << e.speed_limit_mps << "," << e.gradient << "\n";
  }
  std::istringstream ni(nodes.str()), ei(edges.str());
  const RoadNetwork back = load_network(ni, ei);
  CHECK(back.node_count() == g.node_count());
  CHECK(back.edge_count() == g.edge_count());
}

TEST_CASE("airline and segment distance") {
  CHECK(airline_distance({0, 0}, {3, 4}) == doctest::Approx(5.0));
  CHECK(point_segment_distance({5, 5}, {0, 0}, {10, 0}) == doctest::Approx(5.0));
  CHECK(point_segment_distance({-3, 4}, {0, 0}, {10, 0}) == doctest::Approx(5.0));
  CHECK(point_segment_distance({13, 4}, {0, 0}, {10, 0}) == doctest::Approx(5.0));
}

TEST_CASE("load_network reads optional columns and rejects bad rows") {
  SUBCASE("bidirectional rows add a reverse edge") {
    std::istringstream nodes("node_id,x_m,y_m\na,0,0\nb,100,0\n");
    std::istringstream edges(
        "edge_id,from_node,to_node,length_m,speed_limit_mps,gradient,road_class,bidirectional\n"
        "ab,a,b,100,10,0.02,3,1\n");
    const RoadNetwork net = load_network(nodes, edges);
    REQUIRE(net.edge_count() == 2);
    const Edge& rev = net.edge(*net.find_edge("ab_rev"));
    CHECK(net.node(rev.from).name == "b");
    CHECK(rev.gradient == doctest::Approx(-0.02));
    CHECK(rev.road_class == 3);
  }
  SUBCASE("unknown node") {
    std::istringstream nodes("node_id,x_m,y_m\na,0,0\n");
    std::istringstream edges("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\n"
                             "ab,a,zz,100,10,0\n");
    CHECK_THROWS_AS(load_network(nodes, edges), ConfigError);
  }
  SUBCASE("length shorter than the endpoint distance") {
    std::istringstream nodes("node_id,x_m,y_m\na,0,0\nb,100,0\n");
    std::istringstream edges("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\n"
                             "ab,a,b,50,10,0\n");
    CHECK_THROWS_AS(load_network(nodes, edges), ConfigError);
  }
  SUBCASE("duplicate edge id") {
    std::istringstream nodes("node_id,x_m,y_m\na,0,0\nb,100,0\n");
    std::istringstream edges("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\n"
                             "ab,a,b,100,10,0\nab,b,a,100,10,0\n");
    CHECK_THROWS_AS(load_network(nodes, edges), ConfigError);
  }
  SUBCASE("non-numeric length") {
    std::istringstream nodes("node_id,x_m,y_m\na,0,0\nb,100,0\n");
    std::istringstream edges("edge_id,from_node,to_node,length_m,speed_limit_mps,gradient\n"
                             "ab,a,b,long,10,0\n");
    CHECK_THROWS_AS(load_network(nodes, edges), ConfigError);
  }
}

TEST_CASE("congestion scales cruise speed by hour and class") {
  RoadNetwork net = generate_grid(2, 2, 100.0, 20.0);
  CongestionProfile prof;
  CongestionProfile::Hours rush{};
  rush.fill(1.0);
  rush[8] = 0.5;
  prof.set_default(rush);
  net.set_congestion(prof);
  CHECK(net.cruise_speed(EdgeId{0}, 8) == doctest::Approx(10.0));
  CHECK(net.cruise_speed(EdgeId{0}, 9) == doctest::Approx(20.0));
  CongestionProfile::Hours bad{};
  bad.fill(1.0);
  bad[3] = 0.0;
  CHECK_THROWS_AS(prof.set_default(bad), ConfigError);
}

TEST_CASE("nearest_edge matches an exhaustive scan") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 100; ++round) {
    const RoadNetwork net = random_network(rng, 5 + round % 40);
    REQUIRE(net.edge_count() <= 200);
    std::uniform_real_distribution<double> coord(-200.0, 2200.0);
    std::vector<Coord> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({coord(rng), coord(rng)});
    // Grid points too, where ties are common.
    for (int i = 0; i < 5; ++i) pts.push_back({net.nodes()[i].pos.x, net.nodes()[i].pos.y});
    for (const Coord& p : pts) {
      const auto cands = oracle::nearest_candidates(net, p.x, p.y);
      const EdgeId got = nearest_edge(net, p);
      CHECK(got.value == cands.front());
    }
  }
}

TEST_CASE("grid ties resolve to the lowest edge index") {
  const RoadNetwork net = generate_grid(5, 5, 100.0, 10.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-50.0, 450.0);
  for (int i = 0; i < 2000; ++i) {
    const Coord p{std::round(coord(rng)), std::round(coord(rng))};
    const auto cands = oracle::nearest_candidates(net, p.x, p.y);
    CHECK(nearest_edge(net, p).value == cands.front());
  }
}

TEST_CASE("parallel snapping equals the serial reference") {
  const RoadNetwork net = generate_grid(15, 15, 200.0, 13.9);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coord(-100.0, 3000.0);
  std::vector<Coord> pts(5000);
  for (Coord& p : pts) p = {coord(rng), coord(rng)};
  CHECK(nearest_edges(net, pts) == nearest_edges_serial(net, pts));
}

TEST_CASE("shortest_path matches Bellman-Ford on random networks") {
  std::mt19937_64 rng(42);
  int checked = 0;
  for (int round = 0; round < 100; ++round) {
    const int n = 4 + static_cast<int>(rng() % 47);  // up to 50 nodes
    const RoadNetwork net = random_network(rng, n);
    const RouteWeight w = round % 2 ? RouteWeight::Distance : RouteWeight::TravelTime;
    const auto g = arcs(net, w);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(net.edge_count() - 1));
    for (int q = 0; q < 10; ++q) {
      const EdgeId from{pick(rng)}, to{pick(rng)};
      if (from == to) continue;
      const auto d = oracle::bellman_ford(g, static_cast<int>(net.edge(from).to.value));
      const double mid = d[net.edge(to).from.value];
      if (std::isinf(mid)) {
        CHECK_THROWS_AS(shortest_path(net, from, to, w), NoRouteError);
        continue;
      }
      const Route r = shortest_path(net, from, to, w);
      const double expect = edge_weight(net, from, w, 0) + mid + edge_weight(net, to, w, 0);
      CHECK(r.weight == doctest::Approx(expect).epsilon(1e-12));
      // Contiguous, and the stored weight is the sum over its edges.
      double sum = 0.0, len = 0.0;
      for (std::size_t i = 0; i < r.edges.size(); ++i) {
        sum += edge_weight(net, r.edges[i], w, 0);
        len += net.edge(r.edges[i]).length_m;
        if (i > 0) CHECK(net.edge(r.edges[i - 1]).to == net.edge(r.edges[i]).from);
      }
      CHECK(sum == doctest::Approx(r.weight).epsilon(1e-12));
      CHECK(len == doctest::Approx(r.total_length_m));
      const Coord a = net.node(net.edge(r.origin()).from).pos;
      const Coord b = net.node(net.edge(r.destination()).to).pos;
      CHECK(r.total_length_m >= airline_distance(a, b) - 1e-9);
      ++checked;
    }
  }
  CHECK(checked > 300);
}

TEST_CASE("unreachable destination throws NoRouteError") {
  RoadNetwork net;
  net.add_node("a", {0, 0});
  net.add_node("b", {100, 0});
  net.add_node("c", {200, 0});
  Edge ab{"ab", NodeId{0}, NodeId{1}, 100, 10, 0, 0};
  Edge cb{"cb", NodeId{2}, NodeId{1}, 100, 10, 0, 0};
  net.add_edge(ab);
  net.add_edge(cb);
  CHECK_THROWS_AS(shortest_path(net, EdgeId{0}, EdgeId{1}, RouteWeight::Distance), NoRouteError);
  const Route self = shortest_path(net, EdgeId{0}, EdgeId{0}, RouteWeight::Distance);
  CHECK(self.edges.size() == 1);
}
