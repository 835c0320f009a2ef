#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "netmo/network.hpp"
#include "test_support.hpp"

namespace {

using namespace netmo;
using netmo::testing::line;
using netmo::testing::t1_network;
using netmo::testing::t1_network_with;
using netmo::testing::TempDir;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Intent: endpoints sharing a coordinate merge into one node; ids follow
// first appearance.
TEST(Topology, SharedEndpoint) {
  NetworkBuilder b;
  b.create_topology({{line({{0, 0}, {600, 0}}), "A", 2},
                     {line({{600, 0}, {1000, 0}}), "A", 2}});
  EXPECT_EQ(b.node_count(), 3);
  EXPECT_EQ(b.section_count(), 2);
}

// Intent: a single edge yields two nodes and one section.
TEST(Topology, SingleEdge) {
  NetworkBuilder b;
  b.create_topology({{line({{0, 0}, {500, 0}}), "", 2}});
  EXPECT_EQ(b.node_count(), 2);
  EXPECT_EQ(b.section_count(), 1);
}

// Intent: endpoints within the snap tolerance (0.01 m) merge.
TEST(Topology, NearbyEndpointsMerge) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {100, 0}}), "", 2);
  b.add_edge(line({{100, 0.005}, {200, 0}}), "", 2);
  EXPECT_EQ(b.node_count(), 3);
}

// Intent: an edge between two existing nodes creates no nodes.
TEST(Topology, AddEdgeJoinsExistingNodes) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {100, 0}}), "", 2);
  b.add_edge(line({{100, 0}, {200, 0}}), "", 2);
  EXPECT_EQ(b.node_count(), 3);
  b.add_edge(line({{0, 0}, {200, 0}}), "", 2);
  EXPECT_EQ(b.node_count(), 3);
  EXPECT_EQ(b.section_count(), 3);
}

// Intent: one fresh endpoint creates exactly one node.
TEST(Topology, AddEdgeFreshEndpoint) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {100, 0}}), "", 2);
  b.add_edge(line({{100, 0}, {100, 100}}), "", 2);
  EXPECT_EQ(b.node_count(), 3);
}

// Intent: duplicate geometry is a parallel edge, not an error.
TEST(Topology, ParallelEdgesAllowed) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {100, 0}}), "", 2);
  b.add_edge(line({{0, 0}, {100, 0}}), "", 2);
  EXPECT_EQ(b.node_count(), 2);
  EXPECT_EQ(b.section_count(), 2);
  b.build_routes(RouteKey::kPerSection);
  const Network net = b.freeze();
  EXPECT_EQ(net.routes().size(), 2u);
}

// Intent: a point on a section interior splits it; the halves sum to the
// original length.
TEST(Topology, AddNodeSplitsSection) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {1000, 0}}), "", 2);
  const int id = b.add_node({300, 0.004});
  EXPECT_EQ(id, 3);
  EXPECT_EQ(b.section_count(), 2);
  b.build_routes(RouteKey::kPerSection);
  const Network net = b.freeze();
  double total = 0;
  for (const auto& s : net.sections()) total += s.length;
  EXPECT_NEAR(total, 1000.0, 1e-9);
}

// Intent: add_node at an existing node is idempotent.
TEST(Topology, AddNodeIdempotent) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {1000, 0}}), "", 2);
  EXPECT_EQ(b.add_node({0, 0}), 1);
  EXPECT_EQ(b.add_node({1000.003, 0}), 2);
  EXPECT_EQ(b.section_count(), 1);
}

// Intent: a far-away point becomes an isolated node.
TEST(Topology, AddNodeIsolated) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {1000, 0}}), "", 2);
  EXPECT_EQ(b.add_node({5000, 5000}), 3);
  EXPECT_EQ(b.section_count(), 1);
}

// Intent: same-name sections chain into one route with cumulative measures.
TEST(Routes, ByNameChain) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {200, 0}}), "A", 2);
  b.add_edge(line({{200, 0}, {500, 0}}), "A", 2);
  b.add_edge(line({{500, 0}, {1000, 0}}), "A", 2);
  b.build_routes(RouteKey::kByName);
  const Network net = b.freeze();
  ASSERT_EQ(net.routes().size(), 1u);
  const Route& r = net.routes()[0];
  EXPECT_DOUBLE_EQ(r.length, 1000.0);
  ASSERT_EQ(r.section_ids.size(), 3u);
  const Section& s1 = net.section(r.section_ids[0]);
  const Section& s2 = net.section(r.section_ids[1]);
  const Section& s3 = net.section(r.section_ids[2]);
  EXPECT_DOUBLE_EQ(s1.pos1, 0.0);
  EXPECT_DOUBLE_EQ(s1.pos2, 200.0);
  EXPECT_DOUBLE_EQ(s2.pos1, 200.0);
  EXPECT_DOUBLE_EQ(s2.pos2, 500.0);
  EXPECT_DOUBLE_EQ(s3.pos1, 500.0);
  EXPECT_DOUBLE_EQ(s3.pos2, 1000.0);
}

// Intent: an unnamed section is its own route spanning [0, length].
TEST(Routes, UnnamedSection) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {321, 0}}), "", 2);
  b.build_routes(RouteKey::kByName);
  const Network net = b.freeze();
  ASSERT_EQ(net.routes().size(), 1u);
  EXPECT_DOUBLE_EQ(net.routes()[0].length, 321.0);
  const Section& s = net.sections()[0];
  EXPECT_DOUBLE_EQ(s.pos1, 0.0);
  EXPECT_DOUBLE_EQ(s.pos2, 321.0);
}

// Intent: a branching name group falls apart into simple chains; the chain
// holding the smallest section id becomes the first route.
TEST(Routes, YBranchSplits) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {100, 0}}), "A", 2);
  b.add_edge(line({{100, 0}, {200, 0}}), "A", 2);
  b.add_edge(line({{100, 0}, {100, 100}}), "A", 2);
  b.build_routes(RouteKey::kByName);
  const Network net = b.freeze();
  ASSERT_EQ(net.routes().size(), 2u);
  EXPECT_EQ(net.section(1).rid, 1);
  EXPECT_EQ(net.section(2).rid, 2);
  EXPECT_EQ(net.section(3).rid, 2);
  EXPECT_DOUBLE_EQ(net.routes()[0].length, 100.0);
  EXPECT_DOUBLE_EQ(net.routes()[1].length, 200.0);
}

// Intent: route kind is 1 only when every member section is one-way.
TEST(Routes, KindAggregation) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {100, 0}}), "A", 1);
  b.add_edge(line({{100, 0}, {200, 0}}), "A", 2);
  b.add_edge(line({{0, 100}, {100, 100}}), "B", 1);
  b.build_routes(RouteKey::kByName);
  const Network net = b.freeze();
  EXPECT_EQ(net.dual(1), 2);
  EXPECT_EQ(net.dual(2), 1);
}

// Intent: the default junction policy allows everything but the four
// U-turn cells.
TEST(Junctions, DefaultPolicy) {
  const Network net = t1_network();
  ASSERT_EQ(net.junctions().size(), 1u);
  const Junction& j = net.junctions()[0];
  EXPECT_EQ(j.node_id, netmo::testing::kT1NodeJ1);
  EXPECT_EQ(j.r1id, 1);
  EXPECT_EQ(j.r2id, 2);
  EXPECT_DOUBLE_EQ(j.r1meas, 600.0);
  EXPECT_DOUBLE_EQ(j.r2meas, 0.0);
  int trues = 0;
  for (bool c : j.cc) trues += c ? 1 : 0;
  EXPECT_EQ(trues, 12);
  EXPECT_EQ(cc_to_bits(j.cc), "1011011111101101");
}

// Intent: a full explicit permission list produces exactly the requested
// cells; here only four transitions stay open.
TEST(Junctions, ExplicitMatrix) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {600, 0}}), "A", 2);
  b.add_edge(line({{600, 0}, {1000, 0}}), "A", 2);
  b.add_edge(line({{600, -500}, {600, 0}}), "B", 2);
  b.add_edge(line({{600, 0}, {600, 500}}), "B", 2);
  b.build_routes(RouteKey::kByName);

  struct Cell { int fr; Dir fd; int tr; Dir td; };
  const std::vector<Cell> allowed{{2, Dir::kUp, 1, Dir::kDown},
                                  {2, Dir::kUp, 1, Dir::kUp},
                                  {2, Dir::kDown, 1, Dir::kDown},
                                  {2, Dir::kUp, 2, Dir::kDown}};
  std::vector<TurnRestriction> rs;
  for (const int fr : {1, 2}) {
    for (const Dir fd : {Dir::kUp, Dir::kDown}) {
      for (const int tr : {1, 2}) {
        for (const Dir td : {Dir::kUp, Dir::kDown}) {
          bool allow = false;
          for (const auto& c : allowed) {
            if (c.fr == fr && c.fd == fd && c.tr == tr && c.td == td) allow = true;
          }
          rs.push_back(make_restriction(2, fr, fd, tr, td, allow));
        }
      }
    }
  }
  b.build_junctions(rs);
  const Network net = b.freeze();
  ASSERT_EQ(net.junctions().size(), 1u);
  EXPECT_EQ(cc_to_bits(net.junctions()[0].cc), "0000000011010100");
}

// Intent: on a one-way route no adjacency entry departs or arrives in the
// down direction.
TEST(Junctions, OneWayAdjacency) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {600, 0}}), "A", 1);
  b.add_edge(line({{600, 0}, {1000, 0}}), "A", 1);
  b.add_edge(line({{600, 0}, {600, 500}}), "B", 2);
  b.build_routes(RouteKey::kByName);
  const Network net = b.freeze();
  for (const auto& n : net.nodes()) {
    for (const auto& d : net.departures(n.node_id)) {
      if (d.rid == 1) EXPECT_EQ(d.dir, Dir::kUp);
    }
  }
}

// Intent: route attribute accessors return the stored values.
TEST(Attributes, T1RouteAccessors) {
  const Network net = t1_network();
  EXPECT_DOUBLE_EQ(net.length(1), 1000.0);
  EXPECT_EQ(net.dual(1), 2);
  const MeasuredPolyline& cb = net.curve(2);
  EXPECT_DOUBLE_EQ(cb.front().x, 600.0);
  EXPECT_DOUBLE_EQ(cb.front().y, 0.0);
  EXPECT_DOUBLE_EQ(cb.back().y, 500.0);
  EXPECT_THROW(net.length(99), EngineError);
}

// Intent: on_route checks both the route id and the measure range.
TEST(Attributes, OnRoute) {
  const Network net = t1_network();
  EXPECT_TRUE(net.on_route(GPoint{1, 1, 600, 0}, 1));
  EXPECT_FALSE(net.on_route(GPoint{1, 1, 600, 0}, 2));
  EXPECT_FALSE(net.on_route(GPoint{1, 1, 1000.0 + 2e-9, 0}, 1));
}

// Intent: gline/route predicates: overlap, cover, reciprocal phrasing.
TEST(Attributes, GLinePredicates) {
  const Network net = t1_network();
  GLine g;
  g.netid = 1;
  g.intervals.push_back(RouteInterval{1, 100, 600, 0});
  EXPECT_TRUE(net.intersects(g, 1));
  EXPECT_FALSE(net.contains(g, 1));
  GLine full;
  full.intervals.push_back(RouteInterval{1, 0, 1000, 0});
  EXPECT_TRUE(net.contains(full, 1));
  GLine two;
  two.intervals.push_back(RouteInterval{1, 0, 500, 0});
  two.intervals.push_back(RouteInterval{1, 500, 1000, 0});
  EXPECT_TRUE(net.contains(two, 1));
  EXPECT_TRUE(net.is_contained(1, two));
}

// Intent: sections of every route tile [0, length] without gaps.
TEST(Invariants, SectionTiling) {
  const Network net = netmo::testing::grid_network(4, 4);
  for (const auto& r : net.routes()) {
    double expect = 0.0;
    for (int sid : r.section_ids) {
      const Section& s = net.section(sid);
      EXPECT_NEAR(s.pos1, expect, 1e-9);
      expect = s.pos2;
    }
    EXPECT_NEAR(expect, r.length, 1e-9);
  }
}

// Intent: a departure is permitted exactly when the cc cell (or same-route
// policy) says so and no one-way rule blocks it.
TEST(Invariants, AdjacencyMatchesCc) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = netmo::testing::random_network(rng);
    for (const auto& n : net.nodes()) {
      const auto& deps = net.departures(n.node_id);
      for (const auto& arr : net.routes_at(n.node_id)) {
        for (const Dir ad : {Dir::kUp, Dir::kDown}) {
          const auto got = net.permitted(n.node_id, std::make_pair(arr.first, ad));
          for (const auto& d : deps) {
            const bool allowed =
                net.transition_allowed(n.node_id, arr.first, ad, d.rid, d.dir);
            int hits = 0;
            for (const auto& g : got) {
              if (g.sid == d.sid && g.dir == d.dir) ++hits;
            }
            EXPECT_EQ(hits, allowed ? 1 : 0);
          }
        }
      }
    }
  }
}

// Intent: identical input bytes give identical network dumps.
TEST(Invariants, DeterministicBuild) {
  TempDir d1, d2;
  t1_network().dump(d1.path());
  t1_network().dump(d2.path());
  for (const char* f : {"nodes.csv", "sections.csv", "routes.csv", "junctions.csv"}) {
    EXPECT_EQ(slurp(d1.path() + "/" + f), slurp(d2.path() + "/" + f)) << f;
  }
}

// Intent: dump -> load -> dump is byte-stable and junction nodes are
// recovered from geometry.
TEST(Persistence, DumpLoadRoundTrip) {
  TempDir d1, d2;
  const Network net = t1_network();
  net.dump(d1.path());
  const Network back = Network::load(d1.path());
  back.dump(d2.path());
  for (const char* f : {"nodes.csv", "sections.csv", "routes.csv", "junctions.csv"}) {
    EXPECT_EQ(slurp(d1.path() + "/" + f), slurp(d2.path() + "/" + f)) << f;
  }
  ASSERT_EQ(back.junctions().size(), 1u);
  EXPECT_EQ(back.junctions()[0].node_id, netmo::testing::kT1NodeJ1);
  EXPECT_TRUE(back.transition_allowed(2, 1, Dir::kUp, 2, Dir::kUp));
  EXPECT_FALSE(back.transition_allowed(2, 1, Dir::kUp, 1, Dir::kDown));
}

// Intent: the expected dump headers form the on-disk contract.
TEST(Persistence, FileHeaders) {
  TempDir d;
  t1_network().dump(d.path());
  EXPECT_EQ(slurp(d.path() + "/nodes.csv").substr(0, 14), "node_id,point\n");
  EXPECT_EQ(slurp(d.path() + "/sections.csv").substr(0, 62),
            "sid,rid,start_node_id,end_node_id,pos1,pos2,kind,length,curve\n");
  EXPECT_EQ(slurp(d.path() + "/routes.csv").substr(0, 38),
            "rid,kind,length,curve,start_flag,name\n");
  EXPECT_EQ(slurp(d.path() + "/junctions.csv").substr(0, 41),
            "jid,r1id,r2id,r1meas,r2meas,point,cc\n1,1,");
}

// Intent: restrictions referencing a node or route that is not there fail
// loudly.
TEST(Restrictions, BadReferences) {
  try {
    t1_network_with({make_restriction(99, 1, Dir::kUp, 2, Dir::kUp, false)});
    FAIL() << "expected UnknownNode";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.code(), Err::kUnknownNode);
  }
  try {
    t1_network_with({make_restriction(2, 1, Dir::kUp, 7, Dir::kUp, false)});
    FAIL() << "expected UnknownRoute";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.code(), Err::kUnknownRoute);
  }
  try {
    // Route 2 exists but does not touch node 1.
    t1_network_with({make_restriction(1, 1, Dir::kUp, 2, Dir::kUp, false)});
    FAIL() << "expected UnknownRouteAtNode";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.code(), Err::kUnknownRouteAtNode);
  }
}

// Intent: route names resolve when unique at the node.
TEST(Restrictions, NameResolution) {
  const Network net = t1_network_with(
      {TurnRestriction{2, "A", Dir::kUp, "B", Dir::kUp, false}});
  EXPECT_FALSE(net.transition_allowed(2, 1, Dir::kUp, 2, Dir::kUp));
  EXPECT_TRUE(net.transition_allowed(2, 1, Dir::kDown, 2, Dir::kUp));
}

// Intent: allowing a U-turn on one route at a junction node takes effect and
// survives persistence.
TEST(Restrictions, UTurnOverride) {
  const Network net =
      t1_network_with({make_restriction(2, 1, Dir::kUp, 1, Dir::kDown, true)});
  EXPECT_TRUE(net.transition_allowed(2, 1, Dir::kUp, 1, Dir::kDown));
  EXPECT_FALSE(net.transition_allowed(2, 1, Dir::kDown, 1, Dir::kUp));

  TempDir d;
  net.dump(d.path());
  const Network back = Network::load(d.path());
  EXPECT_TRUE(back.transition_allowed(2, 1, Dir::kUp, 1, Dir::kDown));
  EXPECT_FALSE(back.transition_allowed(2, 1, Dir::kDown, 1, Dir::kUp));
}

// Intent: a same-route override at a node with no junction record cannot be
// stored anywhere, so it is rejected instead of silently dropped.
TEST(Restrictions, UTurnWithoutJunctionRejected) {
  NetworkBuilder b;
  b.add_edge(line({{0, 0}, {600, 0}}), "A", 2);
  b.add_edge(line({{600, 0}, {1000, 0}}), "A", 2);
  b.build_routes(RouteKey::kByName);
  b.build_junctions({make_restriction(2, 1, Dir::kUp, 1, Dir::kDown, true)});
  try {
    b.freeze();
    FAIL() << "expected BadArgument";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.code(), Err::kBadArgument);
  }
}

// Intent: total length is unchanged by an interior split.
TEST(Invariants, AddNodePreservesLength) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    NetworkBuilder b;
    b.add_edge(line({{0, 0}, {777, 0}}), "", 2);
    b.add_edge(line({{0, 50}, {500, 50}}), "", 2);
    const double m = 10.0 + static_cast<double>(rng() % 700);
    b.add_node({m, 0});
    b.build_routes(RouteKey::kPerSection);
    const Network net = b.freeze();
    double total = 0;
    for (const auto& s : net.sections()) total += s.length;
    EXPECT_NEAR(total, 777.0 + 500.0, 1e-9);
  }
}

}  // namespace
