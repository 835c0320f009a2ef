#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "netmo/common.hpp"
#include "netmo/csv.hpp"
#include "netmo/geometry.hpp"
#include "netmo/gtypes.hpp"
#include "netmo/wkt.hpp"

namespace netmo {

/// Travel direction relative to route measure: up = increasing measure.
enum class Dir { kUp = 0, kDown = 1 };

inline Dir opposite(Dir d) { return d == Dir::kUp ? Dir::kDown : Dir::kUp; }

inline const char* dir_name(Dir d) { return d == Dir::kUp ? "up" : "down"; }

inline Dir parse_dir(const std::string& s) {
  if (s == "up") return Dir::kUp;
  if (s == "down") return Dir::kDown;
  fail(Err::kMalformedRow, "direction must be 'up' or 'down', got '" + s + "'");
}

struct Node {
  int node_id = 0;
  PlanarPoint point;
};

/// One piece of a route between two nodes. The stored curve always runs in
/// the direction of increasing route measure, so pos1 < pos2.
struct Section {
  int sid = 0;
  int rid = 0;
  int start_node_id = 0;
  int end_node_id = 0;
  double pos1 = 0.0;
  double pos2 = 0.0;
  int kind = 2;  ///< 1 = one-way (up only), 2 = two-way
  double length = 0.0;
  MeasuredPolyline curve;
};

struct Route {
  int rid = 0;
  int kind = 2;
  double length = 0.0;
  MeasuredPolyline curve;
  std::string start_flag = "start";  ///< curves are normalized at build time
  std::string name;
  std::vector<int> section_ids;  ///< ascending by pos1
};

/// cc cell index: from_slot * 4 + to_slot, slots ordered
/// (r1_up, r1_down, r2_up, r2_down).
using ConnectivityCode = std::array<bool, 16>;

inline int cc_slot(bool is_r1, Dir d) {
  return (is_r1 ? 0 : 2) + (d == Dir::kDown ? 1 : 0);
}

/// Default policy: every transition allowed except the two U-turns per route.
inline ConnectivityCode cc_default() {
  ConnectivityCode cc;
  cc.fill(true);
  cc[0 * 4 + 1] = false;  // r1_up -> r1_down
  cc[1 * 4 + 0] = false;  // r1_down -> r1_up
  cc[2 * 4 + 3] = false;  // r2_up -> r2_down
  cc[3 * 4 + 2] = false;  // r2_down -> r2_up
  return cc;
}

inline std::string cc_to_bits(const ConnectivityCode& cc) {
  std::string s(16, '0');
  for (int i = 0; i < 16; ++i) s[i] = cc[i] ? '1' : '0';
  return s;
}

inline ConnectivityCode cc_from_bits(const std::string& bits) {
  if (bits.size() != 16) fail(Err::kMalformedRow, "cc must be 16 bits, got '" + bits + "'");
  ConnectivityCode cc;
  for (int i = 0; i < 16; ++i) {
    if (bits[i] != '0' && bits[i] != '1') fail(Err::kMalformedRow, "cc bit must be 0 or 1");
    cc[i] = bits[i] == '1';
  }
  return cc;
}

/// Crossing of two distinct routes at one node; one record per unordered
/// pair per node, with r1id < r2id.
struct Junction {
  int jid = 0;
  int node_id = 0;  ///< kept in memory, not part of the file format
  int r1id = 0;
  int r2id = 0;
  double r1meas = 0.0;
  double r2meas = 0.0;
  PlanarPoint point;
  ConnectivityCode cc = cc_default();
};

/// One legal way of leaving a node along a section.
struct Departure {
  int rid = 0;
  Dir dir = Dir::kUp;
  int sid = 0;
  int to_node = 0;
  double from_meas = 0.0;  ///< route measure at this node
  double to_meas = 0.0;    ///< route measure at to_node
  double length = 0.0;     ///< section length
};

/// A turn-restriction override of one cc cell. Route references may be an
/// integer route id or a route name that is unique among routes incident to
/// the node.
struct TurnRestriction {
  int node_id = 0;
  std::string from_route;
  Dir from_dir = Dir::kUp;
  std::string to_route;
  Dir to_dir = Dir::kUp;
  bool allow = false;
};

inline TurnRestriction make_restriction(int node_id, int from_rid, Dir from_dir, int to_rid,
                                        Dir to_dir, bool allow) {
  return TurnRestriction{node_id, std::to_string(from_rid), from_dir, std::to_string(to_rid),
                         to_dir, allow};
}

enum class RouteKey { kByName, kPerSection };

inline RouteKey parse_route_key(const std::string& s) {
  if (s == "by_name") return RouteKey::kByName;
  if (s == "per_section") return RouteKey::kPerSection;
  fail(Err::kBadArgument, "route key must be by_name or per_section, got '" + s + "'");
}

/// Immutable network snapshot: topology, routes, junctions and the derived
/// adjacency used by routing. Produced by NetworkBuilder::freeze or load().
class Network {
 public:
  int net_id() const { return net_id_; }
  const Tolerances& tol() const { return tol_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Section>& sections() const { return sections_; }
  const std::vector<Route>& routes() const { return routes_; }
  const std::vector<Junction>& junctions() const { return junctions_; }

  bool has_node(int id) const { return node_index_.count(id) != 0; }
  bool has_route(int rid) const { return route_index_.count(rid) != 0; }

  const Node& node(int id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) fail(Err::kUnknownNode, "unknown node " + std::to_string(id));
    return nodes_[it->second];
  }

  const Section& section(int sid) const {
    auto it = section_index_.find(sid);
    if (it == section_index_.end()) {
      fail(Err::kBadArgument, "unknown section " + std::to_string(sid));
    }
    return sections_[it->second];
  }

  const Route& route(int rid) const {
    auto it = route_index_.find(rid);
    if (it == route_index_.end()) fail(Err::kUnknownRoute, "unknown route " + std::to_string(rid));
    return routes_[it->second];
  }

  double length(int rid) const { return route(rid).length; }
  const MeasuredPolyline& curve(int rid) const { return route(rid).curve; }
  int dual(int rid) const { return route(rid).kind; }

  bool on_route(const GPoint& p, int rid) const {
    if (p.rid != rid || !has_route(rid)) return false;
    return p.measure >= -tol_.eps_measure && p.measure <= route(rid).length + tol_.eps_measure;
  }

  /// True when some interval of g lies on rid with positive length.
  bool intersects(const GLine& g, int rid) const {
    for (const auto& iv : g.intervals) {
      if (iv.rid == rid && iv.span() > tol_.eps_measure) return true;
    }
    return false;
  }

  /// True when the union of g's intervals on rid covers [0, route length]
  /// (gaps up to eps_measure tolerated).
  bool contains(const GLine& g, int rid) const {
    const double len = route(rid).length;
    std::vector<std::pair<double, double>> spans;
    for (const auto& iv : g.intervals) {
      if (iv.rid == rid) spans.emplace_back(iv.lo(), iv.hi());
    }
    if (spans.empty()) return false;
    std::sort(spans.begin(), spans.end());
    double reach = 0.0;
    for (const auto& [lo, hi] : spans) {
      if (lo > reach + tol_.eps_measure) return false;
      reach = std::max(reach, hi);
      if (reach >= len - tol_.eps_measure) return true;
    }
    return reach >= len - tol_.eps_measure;
  }

  bool is_contained(int rid, const GLine& g) const { return contains(g, rid); }

  /// Planar embedding of a network position.
  PlanarPoint to_planar(const GPoint& p) const {
    return route(p.rid).curve.locate(p.measure, tol_.snap);
  }

  /// The section of rid covering the given measure; boundary measures
  /// resolve to the section starting there (last section for measure = length).
  const Section& section_at(int rid, double measure) const {
    const Route& r = route(rid);
    if (measure < -tol_.eps_measure || measure > r.length + tol_.eps_measure) {
      fail(Err::kMeasureOutOfRange, "measure " + std::to_string(measure) + " outside route " +
                                        std::to_string(rid) + " of length " +
                                        std::to_string(r.length));
    }
    int lo = 0;
    int hi = static_cast<int>(r.section_ids.size()) - 1;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (section(r.section_ids[mid]).pos1 <= measure) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    return section(r.section_ids[lo]);
  }

  const std::vector<Departure>& departures(int node_id) const {
    static const std::vector<Departure> kNone;
    auto it = departures_.find(node_id);
    return it == departures_.end() ? kNone : it->second;
  }

  /// All (rid, measure) occurrences of routes at a node, sorted by (rid, measure).
  const std::vector<std::pair<int, double>>& routes_at(int node_id) const {
    static const std::vector<std::pair<int, double>> kNone;
    auto it = node_routes_.find(node_id);
    return it == node_routes_.end() ? kNone : it->second;
  }

  const Junction* junction_between(int node_id, int ra, int rb) const {
    if (ra > rb) std::swap(ra, rb);
    auto it = junction_index_.find(std::make_tuple(node_id, ra, rb));
    return it == junction_index_.end() ? nullptr : &junctions_[it->second];
  }

  bool has_junction_at(int node_id) const { return junction_nodes_.count(node_id) != 0; }

  /// Whether a vehicle arriving at the node on (from_rid, from_dir) may leave
  /// on (to_rid, to_dir). Same-route transitions use the per-node route
  /// policy (continuation allowed, U-turn forbidden unless overridden);
  /// cross-route transitions consult the pair's junction cc.
  bool transition_allowed(int node_id, int from_rid, Dir from_dir, int to_rid, Dir to_dir) const {
    if (from_rid == to_rid) {
      return same_route_cell(node_id, from_rid)[static_cast<int>(from_dir)]
                                               [static_cast<int>(to_dir)];
    }
    const Junction* j = junction_between(node_id, from_rid, to_rid);
    if (j == nullptr) return false;
    const int fs = cc_slot(from_rid == j->r1id, from_dir);
    const int ts = cc_slot(to_rid == j->r1id, to_dir);
    return j->cc[fs * 4 + ts];
  }

  /// Departures permitted from a node given the arrival; nullopt arrival
  /// means the trip origin (everything permitted).
  std::vector<Departure> permitted(int node_id,
                                   std::optional<std::pair<int, Dir>> arrival) const {
    std::vector<Departure> out;
    for (const auto& d : departures(node_id)) {
      if (!arrival || transition_allowed(node_id, arrival->first, arrival->second, d.rid, d.dir)) {
        out.push_back(d);
      }
    }
    return out;
  }

  void dump(const std::string& dir) const {
    std::vector<std::string> lines;
    lines.push_back("node_id,point");
    for (const auto& n : nodes_) {
      lines.push_back(csv_join({std::to_string(n.node_id), format_wkt_point(n.point)}));
    }
    write_lines(dir + "/nodes.csv", lines);

    lines.clear();
    lines.push_back("sid,rid,start_node_id,end_node_id,pos1,pos2,kind,length,curve");
    for (const auto& s : sections_) {
      lines.push_back(csv_join({std::to_string(s.sid), std::to_string(s.rid),
                                std::to_string(s.start_node_id), std::to_string(s.end_node_id),
                                fmt_double(s.pos1), fmt_double(s.pos2), std::to_string(s.kind),
                                fmt_double(s.length), format_wkt_linestring(s.curve.points())}));
    }
    write_lines(dir + "/sections.csv", lines);

    lines.clear();
    lines.push_back("rid,kind,length,curve,start_flag,name");
    for (const auto& r : routes_) {
      lines.push_back(csv_join({std::to_string(r.rid), std::to_string(r.kind),
                                fmt_double(r.length), format_wkt_linestring(r.curve.points()),
                                r.start_flag, r.name}));
    }
    write_lines(dir + "/routes.csv", lines);

    lines.clear();
    lines.push_back("jid,r1id,r2id,r1meas,r2meas,point,cc");
    for (const auto& j : junctions_) {
      lines.push_back(csv_join({std::to_string(j.jid), std::to_string(j.r1id),
                                std::to_string(j.r2id), fmt_double(j.r1meas),
                                fmt_double(j.r2meas), format_wkt_point(j.point),
                                cc_to_bits(j.cc)}));
    }
    write_lines(dir + "/junctions.csv", lines);
  }

  static Network load(const std::string& dir, int net_id = 1, Tolerances tol = {});

  /// Builds the derived state (indexes, adjacency, per-node route policy)
  /// and validates structural invariants. Both freeze() and load() end here.
  static Network assemble(int net_id, Tolerances tol, std::vector<Node> nodes,
                          std::vector<Section> sections, std::vector<Route> routes,
                          std::vector<Junction> junctions) {
    Network net;
    net.net_id_ = net_id;
    net.tol_ = tol;
    net.nodes_ = std::move(nodes);
    net.sections_ = std::move(sections);
    net.routes_ = std::move(routes);
    net.junctions_ = std::move(junctions);

    std::sort(net.nodes_.begin(), net.nodes_.end(),
              [](const Node& a, const Node& b) { return a.node_id < b.node_id; });
    std::sort(net.sections_.begin(), net.sections_.end(),
              [](const Section& a, const Section& b) { return a.sid < b.sid; });
    std::sort(net.routes_.begin(), net.routes_.end(),
              [](const Route& a, const Route& b) { return a.rid < b.rid; });
    std::sort(net.junctions_.begin(), net.junctions_.end(),
              [](const Junction& a, const Junction& b) { return a.jid < b.jid; });

    for (std::size_t i = 0; i < net.nodes_.size(); ++i) {
      if (!net.node_index_.emplace(net.nodes_[i].node_id, i).second) {
        fail(Err::kMalformedRow, "duplicate node id " + std::to_string(net.nodes_[i].node_id));
      }
    }
    for (std::size_t i = 0; i < net.sections_.size(); ++i) {
      if (!net.section_index_.emplace(net.sections_[i].sid, i).second) {
        fail(Err::kMalformedRow, "duplicate section id " + std::to_string(net.sections_[i].sid));
      }
    }
    for (std::size_t i = 0; i < net.routes_.size(); ++i) {
      if (!net.route_index_.emplace(net.routes_[i].rid, i).second) {
        fail(Err::kMalformedRow, "duplicate route id " + std::to_string(net.routes_[i].rid));
      }
      net.routes_[i].section_ids.clear();
    }
    for (std::size_t i = 0; i < net.junctions_.size(); ++i) {
      const Junction& j = net.junctions_[i];
      net.junction_index_.emplace(std::make_tuple(j.node_id, j.r1id, j.r2id), i);
      net.junction_nodes_.insert(j.node_id);
    }

    const double eps = net.tol_.eps_measure;
    for (const auto& s : net.sections_) {
      if (!net.node_index_.count(s.start_node_id) || !net.node_index_.count(s.end_node_id)) {
        fail(Err::kMalformedRow, "section " + std::to_string(s.sid) + " references missing node");
      }
      if (!net.route_index_.count(s.rid)) {
        fail(Err::kMalformedRow, "section " + std::to_string(s.sid) + " references missing route");
      }
      if (!(s.pos1 < s.pos2)) {
        fail(Err::kMalformedRow, "section " + std::to_string(s.sid) + " has pos1 >= pos2");
      }
      const double tol_len = eps * std::max(1.0, s.length);
      if (std::abs((s.pos2 - s.pos1) - s.length) > tol_len ||
          std::abs(s.curve.length() - s.length) > tol_len) {
        fail(Err::kMalformedRow,
             "section " + std::to_string(s.sid) + " length disagrees with measures or curve");
      }
      net.routes_[net.route_index_[s.rid]].section_ids.push_back(s.sid);
    }

    for (auto& r : net.routes_) {
      if (r.section_ids.empty()) {
        fail(Err::kMalformedRow, "route " + std::to_string(r.rid) + " has no sections");
      }
      std::sort(r.section_ids.begin(), r.section_ids.end(), [&](int a, int b) {
        return net.section(a).pos1 < net.section(b).pos1;
      });
      const double tol_len = eps * std::max(1.0, r.length);
      double cursor = 0.0;
      for (int sid : r.section_ids) {
        const Section& s = net.section(sid);
        if (std::abs(s.pos1 - cursor) > tol_len) {
          fail(Err::kMalformedRow, "route " + std::to_string(r.rid) +
                                       " sections leave a measure gap at " + std::to_string(cursor));
        }
        cursor = s.pos2;
      }
      if (std::abs(cursor - r.length) > tol_len) {
        fail(Err::kMalformedRow,
             "route " + std::to_string(r.rid) + " sections do not reach its length");
      }
    }

    for (const auto& j : net.junctions_) {
      if (j.r1id >= j.r2id) {
        fail(Err::kMalformedRow, "junction " + std::to_string(j.jid) + " must have r1id < r2id");
      }
      for (const auto& [rid, meas] : {std::pair{j.r1id, j.r1meas}, std::pair{j.r2id, j.r2meas}}) {
        const PlanarPoint at = net.route(rid).curve.locate(meas, net.tol_.snap);
        if (distance(at, j.point) > net.tol_.snap * 4.0) {
          fail(Err::kMalformedRow, "junction " + std::to_string(j.jid) +
                                       " measure does not locate to its point on route " +
                                       std::to_string(rid));
        }
      }
    }

    for (const auto& s : net.sections_) {
      net.departures_[s.start_node_id].push_back(
          Departure{s.rid, Dir::kUp, s.sid, s.end_node_id, s.pos1, s.pos2, s.length});
      if (s.kind == 2) {
        net.departures_[s.end_node_id].push_back(
            Departure{s.rid, Dir::kDown, s.sid, s.start_node_id, s.pos2, s.pos1, s.length});
      }
      net.add_node_route(s.start_node_id, s.rid, s.pos1);
      net.add_node_route(s.end_node_id, s.rid, s.pos2);
    }
    for (auto& [node, deps] : net.departures_) {
      std::sort(deps.begin(), deps.end(), [](const Departure& a, const Departure& b) {
        return std::tie(a.rid, a.dir, a.sid) < std::tie(b.rid, b.dir, b.sid);
      });
    }
    for (auto& [node, rl] : net.node_routes_) {
      std::sort(rl.begin(), rl.end());
    }

    // Per-node same-route policy, ANDed across all junction records that
    // mention the route so dumps and adjacency stay consistent. The seed is
    // all-true: each record's cc already carries the default (or its
    // override), and an AND-only fold could never honor an allow override.
    constexpr SameRouteCell kAllTrue = {{{true, true}, {true, true}}};
    for (const auto& j : net.junctions_) {
      for (const bool is_r1 : {true, false}) {
        const int rid = is_r1 ? j.r1id : j.r2id;
        auto& cell = net.same_route_map_.try_emplace(std::make_pair(j.node_id, rid), kAllTrue)
                         .first->second;
        for (int fd = 0; fd < 2; ++fd) {
          for (int td = 0; td < 2; ++td) {
            const int fs = cc_slot(is_r1, static_cast<Dir>(fd));
            const int ts = cc_slot(is_r1, static_cast<Dir>(td));
            cell[fd][td] = cell[fd][td] && j.cc[fs * 4 + ts];
          }
        }
      }
    }
    return net;
  }

 private:
  using SameRouteCell = std::array<std::array<bool, 2>, 2>;
  static constexpr SameRouteCell kSameRouteDefault = {{{true, false}, {false, true}}};

  const SameRouteCell& same_route_cell(int node_id, int rid) const {
    auto it = same_route_map_.find(std::make_pair(node_id, rid));
    if (it != same_route_map_.end()) return it->second;
    static constexpr SameRouteCell kDefault = {{{true, false}, {false, true}}};
    return kDefault;
  }

  void add_node_route(int node_id, int rid, double measure) {
    auto& list = node_routes_[node_id];
    for (const auto& [r, m] : list) {
      if (r == rid && std::abs(m - measure) <= tol_.eps_measure) return;
    }
    list.emplace_back(rid, measure);
  }

  int net_id_ = 1;
  Tolerances tol_;
  std::vector<Node> nodes_;
  std::vector<Section> sections_;
  std::vector<Route> routes_;
  std::vector<Junction> junctions_;
  std::map<int, std::size_t> node_index_;
  std::map<int, std::size_t> section_index_;
  std::map<int, std::size_t> route_index_;
  std::map<std::tuple<int, int, int>, std::size_t> junction_index_;
  std::set<int> junction_nodes_;
  std::map<int, std::vector<Departure>> departures_;
  std::map<int, std::vector<std::pair<int, double>>> node_routes_;
  std::map<std::pair<int, int>, SameRouteCell> same_route_map_;
};

struct EdgeInput {
  MeasuredPolyline curve;
  std::string name;
  int kind = 2;
};

/// Mutable network model for the build phase. Topology edits (add_edge,
/// add_node) apply immediately; routes and junctions are derived
/// deterministically from the edge set when freeze() is called, so they are
/// always up to date with the latest topology.
class NetworkBuilder {
 public:
  explicit NetworkBuilder(int net_id = 1, Tolerances tol = {}) : net_id_(net_id), tol_(tol) {}

  void create_topology(const std::vector<EdgeInput>& edges) {
    if (edges.empty()) fail(Err::kEmptyInput, "no edges to build a network from");
    for (const auto& e : edges) add_edge(e.curve, e.name, e.kind);
  }

  int add_edge(const MeasuredPolyline& curve, const std::string& name, int kind) {
    if (kind != 1 && kind != 2) {
      fail(Err::kBadArgument, "section kind must be 1 or 2, got " + std::to_string(kind));
    }
    std::vector<PlanarPoint> pts(curve.points().begin(), curve.points().end());
    const int n1 = find_or_create_node(pts.front());
    pts.front() = nodes_[static_cast<std::size_t>(n1) - 1].point;
    const int n2 = find_or_create_node(pts.back());
    pts.back() = nodes_[static_cast<std::size_t>(n2) - 1].point;
    EdgeRec rec;
    rec.name = name;
    rec.kind = kind;
    rec.curve = MeasuredPolyline::from_points(pts);  // throws DegenerateEdge if collapsed
    rec.n1 = n1;
    rec.n2 = n2;
    recs_.push_back(std::move(rec));
    return static_cast<int>(recs_.size());
  }

  int add_node(const PlanarPoint& p) {
    if (const auto hit = nearest_node(p); hit && hit->second <= tol_.snap) {
      return hit->first;
    }
    int best_edge = -1;
    double best_dist = 0.0;
    double best_meas = 0.0;
    for (std::size_t i = 0; i < recs_.size(); ++i) {
      const auto proj = recs_[i].curve.project(p, tol_.eps_side);
      if (best_edge < 0 || proj.distance < best_dist) {
        best_edge = static_cast<int>(i);
        best_dist = proj.distance;
        best_meas = proj.measure;
      }
    }
    if (best_edge >= 0 && best_dist <= tol_.snap) {
      EdgeRec& rec = recs_[static_cast<std::size_t>(best_edge)];
      const double len = rec.curve.length();
      if (best_meas <= tol_.snap) return rec.n1;
      if (best_meas >= len - tol_.snap) return rec.n2;
      const PlanarPoint on_curve = rec.curve.locate(best_meas, tol_.eps_measure);
      if (const auto hit = nearest_node(on_curve); hit && hit->second <= tol_.snap) {
        return hit->first;
      }
      const int nid = create_node(on_curve);
      EdgeRec second;
      second.name = rec.name;
      second.kind = rec.kind;
      second.curve = rec.curve.slice(best_meas, len, tol_.eps_measure);
      second.n1 = nid;
      second.n2 = rec.n2;
      rec.curve = rec.curve.slice(0.0, best_meas, tol_.eps_measure);
      rec.n2 = nid;
      recs_.push_back(std::move(second));
      return nid;
    }
    return create_node(p);
  }

  void build_routes(RouteKey key) { route_key_ = key; }

  void build_junctions(std::vector<TurnRestriction> restrictions) {
    restrictions_ = std::move(restrictions);
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int section_count() const { return static_cast<int>(recs_.size()); }

  Network freeze() const {
    if (recs_.empty()) fail(Err::kEmptyInput, "no edges to build a network from");

    // Chain sections into routes. A chain extends across a node only while
    // exactly one unused same-name continuation is available there.
    struct Elem {
      int idx;   // index into recs_
      bool fwd;  // digitized curve direction agrees with chain direction
    };
    std::vector<std::vector<Elem>> chains;
    std::vector<bool> used(recs_.size(), false);

    if (route_key_ == RouteKey::kByName) {
      std::map<std::string, std::vector<int>> groups;
      for (std::size_t i = 0; i < recs_.size(); ++i) {
        if (!recs_[i].name.empty()) groups[recs_[i].name].push_back(static_cast<int>(i));
      }
      std::vector<std::pair<int, const std::vector<int>*>> ordered;
      for (const auto& [name, members] : groups) {
        ordered.emplace_back(members.front(), &members);
      }
      std::sort(ordered.begin(), ordered.end());
      for (const auto& [min_idx, members_ptr] : ordered) {
        const std::vector<int>& members = *members_ptr;
        std::map<int, std::vector<int>> at_node;
        for (int idx : members) {
          at_node[recs_[idx].n1].push_back(idx);
          if (recs_[idx].n2 != recs_[idx].n1) at_node[recs_[idx].n2].push_back(idx);
        }
        auto sole_unused = [&](int node) -> int {
          int found = -1;
          for (int idx : at_node[node]) {
            if (used[idx]) continue;
            if (found >= 0) return -1;  // branch: more than one continuation
            found = idx;
          }
          return found;
        };
        for (int seed : members) {
          if (used[seed]) continue;
          used[seed] = true;
          std::deque<Elem> chain{{seed, true}};
          int front_node = recs_[seed].n1;
          int back_node = recs_[seed].n2;
          for (;;) {
            const int c = sole_unused(back_node);
            if (c < 0) break;
            used[c] = true;
            if (recs_[c].n1 == back_node) {
              chain.push_back({c, true});
              back_node = recs_[c].n2;
            } else {
              chain.push_back({c, false});
              back_node = recs_[c].n1;
            }
          }
          for (;;) {
            const int c = sole_unused(front_node);
            if (c < 0) break;
            used[c] = true;
            if (recs_[c].n2 == front_node) {
              chain.push_front({c, true});
              front_node = recs_[c].n1;
            } else {
              chain.push_front({c, false});
              front_node = recs_[c].n2;
            }
          }
          if (chain.back().idx < chain.front().idx) {
            std::reverse(chain.begin(), chain.end());
            for (auto& e : chain) e.fwd = !e.fwd;
          }
          chains.emplace_back(chain.begin(), chain.end());
        }
      }
    }
    for (std::size_t i = 0; i < recs_.size(); ++i) {
      if (!used[i]) chains.push_back({{static_cast<int>(i), true}});
    }
    std::sort(chains.begin(), chains.end(),
              [](const std::vector<Elem>& a, const std::vector<Elem>& b) {
                return a.front().idx < b.front().idx;
              });

    std::vector<Section> sections(recs_.size());
    std::vector<Route> routes;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      Route r;
      r.rid = static_cast<int>(c) + 1;
      r.kind = 1;
      double cursor = 0.0;
      std::optional<MeasuredPolyline> route_curve;
      for (const Elem& e : chains[c]) {
        const EdgeRec& rec = recs_[static_cast<std::size_t>(e.idx)];
        Section s;
        s.sid = e.idx + 1;
        s.rid = r.rid;
        s.kind = rec.kind;
        s.curve = e.fwd ? rec.curve : rec.curve.reversed();
        s.start_node_id = e.fwd ? rec.n1 : rec.n2;
        s.end_node_id = e.fwd ? rec.n2 : rec.n1;
        s.length = s.curve.length();
        s.pos1 = cursor;
        cursor += s.length;
        s.pos2 = cursor;
        if (rec.kind != 1) r.kind = 2;
        if (route_curve) {
          route_curve->append(s.curve);
        } else {
          route_curve = s.curve;
        }
        r.section_ids.push_back(s.sid);
        sections[static_cast<std::size_t>(e.idx)] = std::move(s);
        r.name = rec.name;
      }
      r.length = cursor;
      r.curve = std::move(*route_curve);
      routes.push_back(std::move(r));
    }

    // One junction per unordered route pair per node, default cc, then the
    // restriction overrides.
    std::map<int, std::map<int, double>> node_route_min;  // node -> rid -> min measure
    for (const auto& s : sections) {
      auto touch = [&](int node, double meas) {
        auto [it, fresh] = node_route_min[node].try_emplace(s.rid, meas);
        if (!fresh) it->second = std::min(it->second, meas);
      };
      touch(s.start_node_id, s.pos1);
      touch(s.end_node_id, s.pos2);
    }
    std::vector<Junction> junctions;
    std::map<std::tuple<int, int, int>, std::size_t> jindex;
    for (const auto& [node, rmap] : node_route_min) {
      std::vector<std::pair<int, double>> rl(rmap.begin(), rmap.end());
      for (std::size_t i = 0; i < rl.size(); ++i) {
        for (std::size_t k = i + 1; k < rl.size(); ++k) {
          Junction j;
          j.jid = static_cast<int>(junctions.size()) + 1;
          j.node_id = node;
          j.r1id = rl[i].first;
          j.r2id = rl[k].first;
          j.r1meas = rl[i].second;
          j.r2meas = rl[k].second;
          j.point = nodes_[static_cast<std::size_t>(node) - 1].point;
          jindex.emplace(std::make_tuple(node, j.r1id, j.r2id), junctions.size());
          junctions.push_back(j);
        }
      }
    }

    for (const auto& tr : restrictions_) {
      if (tr.node_id < 1 || tr.node_id > static_cast<int>(nodes_.size())) {
        fail(Err::kUnknownNode, "restriction references unknown node " +
                                    std::to_string(tr.node_id));
      }
      const auto& incident = node_route_min[tr.node_id];
      const int from = resolve_route_ref(tr.from_route, tr.node_id, routes, incident);
      const int to = resolve_route_ref(tr.to_route, tr.node_id, routes, incident);
      if (from == to) {
        // Same-route override: write every junction record at the node that
        // mentions the route, so the ANDed policy picks it up. A node with no
        // junction record for the route has nowhere to persist the override,
        // so a non-default policy there would be lost on dump/load.
        int touched = 0;
        for (auto& j : junctions) {
          if (j.node_id != tr.node_id || (j.r1id != from && j.r2id != from)) continue;
          const int fs = cc_slot(from == j.r1id, tr.from_dir);
          const int ts = cc_slot(from == j.r1id, tr.to_dir);
          j.cc[fs * 4 + ts] = tr.allow;
          ++touched;
        }
        if (touched == 0) {
          fail(Err::kBadArgument,
               "same-route restriction at node " + std::to_string(tr.node_id) +
                   " has no junction record to carry it");
        }
      } else {
        const int ra = std::min(from, to);
        const int rb = std::max(from, to);
        Junction& j = junctions[jindex.at(std::make_tuple(tr.node_id, ra, rb))];
        const int fs = cc_slot(from == j.r1id, tr.from_dir);
        const int ts = cc_slot(to == j.r1id, tr.to_dir);
        j.cc[fs * 4 + ts] = tr.allow;
      }
    }

    return Network::assemble(net_id_, tol_, nodes_, std::move(sections), std::move(routes),
                             std::move(junctions));
  }

 private:
  struct EdgeRec {
    std::string name;
    int kind = 2;
    MeasuredPolyline curve;  // endpoints snapped to node coordinates
    int n1 = 0;
    int n2 = 0;
  };

  std::pair<long long, long long> cell_of(const PlanarPoint& p) const {
    return {static_cast<long long>(std::floor(p.x / tol_.snap)),
            static_cast<long long>(std::floor(p.y / tol_.snap))};
  }

  /// Nearest existing node and its distance, scanning the 3x3 grid
  /// neighborhood; ties break toward the smaller node id.
  std::optional<std::pair<int, double>> nearest_node(const PlanarPoint& p) const {
    const auto [cx, cy] = cell_of(p);
    int best_id = -1;
    double best = 0.0;
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = grid_.find({cx + dx, cy + dy});
        if (it == grid_.end()) continue;
        for (int id : it->second) {
          const double d = distance(p, nodes_[static_cast<std::size_t>(id) - 1].point);
          if (best_id < 0 || d < best || (d == best && id < best_id)) {
            best_id = id;
            best = d;
          }
        }
      }
    }
    if (best_id < 0) return std::nullopt;
    return std::make_pair(best_id, best);
  }

  int create_node(const PlanarPoint& p) {
    const int id = static_cast<int>(nodes_.size()) + 1;
    nodes_.push_back(Node{id, p});
    grid_[cell_of(p)].push_back(id);
    return id;
  }

  int find_or_create_node(const PlanarPoint& p) {
    if (const auto hit = nearest_node(p); hit && hit->second <= tol_.snap) {
      return hit->first;
    }
    return create_node(p);
  }

  static int resolve_route_ref(const std::string& ref, int node_id,
                               const std::vector<Route>& routes,
                               const std::map<int, double>& incident) {
    int rid = 0;
    bool numeric = !ref.empty();
    for (char ch : ref) {
      if (ch < '0' || ch > '9') {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      rid = std::stoi(ref);
      if (rid < 1 || rid > static_cast<int>(routes.size())) {
        fail(Err::kUnknownRoute, "restriction references unknown route " + ref);
      }
    } else {
      int found = 0;
      for (const auto& r : routes) {
        if (r.name == ref && incident.count(r.rid)) {
          rid = r.rid;
          ++found;
        }
      }
      if (found == 0) {
        fail(Err::kUnknownRouteAtNode, "no route named '" + ref + "' is incident to node " +
                                           std::to_string(node_id));
      }
      if (found > 1) {
        fail(Err::kBadArgument, "route name '" + ref + "' is ambiguous at node " +
                                    std::to_string(node_id));
      }
      return rid;
    }
    if (!incident.count(rid)) {
      fail(Err::kUnknownRouteAtNode, "route " + std::to_string(rid) +
                                         " is not incident to node " + std::to_string(node_id));
    }
    return rid;
  }

  int net_id_ = 1;
  Tolerances tol_;
  std::vector<Node> nodes_;
  std::map<std::pair<long long, long long>, std::vector<int>> grid_;
  std::vector<EdgeRec> recs_;
  RouteKey route_key_ = RouteKey::kByName;
  std::vector<TurnRestriction> restrictions_;
};

// ---- file loaders -----------------------------------------------------------

/// Edge import format: CSV with header name,kind,wkt.
inline std::vector<EdgeInput> load_edges_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || csv_split(lines.front()) != std::vector<std::string>{"name", "kind", "wkt"}) {
    fail(Err::kMalformedRow, path + ": expected header name,kind,wkt");
  }
  std::vector<EdgeInput> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv_split(lines[i]);
    if (f.size() != 3) fail(Err::kMalformedRow, path + " line " + std::to_string(i + 1));
    EdgeInput e;
    e.name = f[0];
    e.kind = static_cast<int>(parse_int(f[1]));
    if (e.kind != 1 && e.kind != 2) {
      fail(Err::kMalformedRow, path + " line " + std::to_string(i + 1) + ": kind must be 1 or 2");
    }
    e.curve = MeasuredPolyline::from_points(parse_wkt_linestring(f[2]));
    out.push_back(std::move(e));
  }
  return out;
}

/// Restriction format: CSV with header node_id,from_route,from_dir,to_route,to_dir,allow.
inline std::vector<TurnRestriction> load_restrictions_csv(const std::string& path) {
  const auto lines = read_lines(path);
  const std::vector<std::string> expected{"node_id", "from_route", "from_dir",
                                          "to_route", "to_dir",    "allow"};
  if (lines.empty() || csv_split(lines.front()) != expected) {
    fail(Err::kMalformedRow,
         path + ": expected header node_id,from_route,from_dir,to_route,to_dir,allow");
  }
  std::vector<TurnRestriction> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv_split(lines[i]);
    if (f.size() != 6) fail(Err::kMalformedRow, path + " line " + std::to_string(i + 1));
    TurnRestriction tr;
    tr.node_id = static_cast<int>(parse_int(f[0]));
    tr.from_route = f[1];
    tr.from_dir = parse_dir(f[2]);
    tr.to_route = f[3];
    tr.to_dir = parse_dir(f[4]);
    const long long allow = parse_int(f[5]);
    if (allow != 0 && allow != 1) {
      fail(Err::kMalformedRow, path + " line " + std::to_string(i + 1) + ": allow must be 0 or 1");
    }
    tr.allow = allow == 1;
    out.push_back(std::move(tr));
  }
  return out;
}

inline Network Network::load(const std::string& dir, int net_id, Tolerances tol) {
  auto expect_header = [&](const std::vector<std::string>& lines, const std::string& header,
                           const std::string& file) {
    if (lines.empty() || lines.front() != header) {
      fail(Err::kMalformedRow, file + ": expected header " + header);
    }
  };

  const auto node_lines = read_lines(dir + "/nodes.csv");
  expect_header(node_lines, "node_id,point", "nodes.csv");
  std::vector<Node> nodes;
  for (std::size_t i = 1; i < node_lines.size(); ++i) {
    if (node_lines[i].empty()) continue;
    const auto f = csv_split(node_lines[i]);
    if (f.size() != 2) fail(Err::kMalformedRow, "nodes.csv line " + std::to_string(i + 1));
    nodes.push_back(Node{static_cast<int>(parse_int(f[0])), parse_wkt_point(f[1])});
  }

  const auto sec_lines = read_lines(dir + "/sections.csv");
  expect_header(sec_lines, "sid,rid,start_node_id,end_node_id,pos1,pos2,kind,length,curve",
                "sections.csv");
  std::vector<Section> sections;
  for (std::size_t i = 1; i < sec_lines.size(); ++i) {
    if (sec_lines[i].empty()) continue;
    const auto f = csv_split(sec_lines[i]);
    if (f.size() != 9) fail(Err::kMalformedRow, "sections.csv line " + std::to_string(i + 1));
    Section s;
    s.sid = static_cast<int>(parse_int(f[0]));
    s.rid = static_cast<int>(parse_int(f[1]));
    s.start_node_id = static_cast<int>(parse_int(f[2]));
    s.end_node_id = static_cast<int>(parse_int(f[3]));
    s.pos1 = parse_double(f[4]);
    s.pos2 = parse_double(f[5]);
    s.kind = static_cast<int>(parse_int(f[6]));
    s.length = parse_double(f[7]);
    s.curve = MeasuredPolyline::from_points(parse_wkt_linestring(f[8]));
    sections.push_back(std::move(s));
  }

  const auto route_lines = read_lines(dir + "/routes.csv");
  expect_header(route_lines, "rid,kind,length,curve,start_flag,name", "routes.csv");
  std::vector<Route> routes;
  for (std::size_t i = 1; i < route_lines.size(); ++i) {
    if (route_lines[i].empty()) continue;
    const auto f = csv_split(route_lines[i]);
    if (f.size() != 6) fail(Err::kMalformedRow, "routes.csv line " + std::to_string(i + 1));
    Route r;
    r.rid = static_cast<int>(parse_int(f[0]));
    r.kind = static_cast<int>(parse_int(f[1]));
    r.length = parse_double(f[2]);
    r.curve = MeasuredPolyline::from_points(parse_wkt_linestring(f[3]));
    if (f[4] != "start" && f[4] != "end") {
      fail(Err::kMalformedRow, "routes.csv line " + std::to_string(i + 1) + ": bad start_flag");
    }
    if (f[4] == "end") r.curve = r.curve.reversed();
    r.start_flag = "start";
    r.name = f[5];
    routes.push_back(std::move(r));
  }

  const auto junc_lines = read_lines(dir + "/junctions.csv");
  expect_header(junc_lines, "jid,r1id,r2id,r1meas,r2meas,point,cc", "junctions.csv");
  std::vector<Junction> junctions;
  for (std::size_t i = 1; i < junc_lines.size(); ++i) {
    if (junc_lines[i].empty()) continue;
    const auto f = csv_split(junc_lines[i]);
    if (f.size() != 7) fail(Err::kMalformedRow, "junctions.csv line " + std::to_string(i + 1));
    Junction j;
    j.jid = static_cast<int>(parse_int(f[0]));
    j.r1id = static_cast<int>(parse_int(f[1]));
    j.r2id = static_cast<int>(parse_int(f[2]));
    j.r1meas = parse_double(f[3]);
    j.r2meas = parse_double(f[4]);
    j.point = parse_wkt_point(f[5]);
    j.cc = cc_from_bits(f[6]);
    // The file format does not carry node ids; recover them from geometry.
    j.node_id = 0;
    for (const auto& n : nodes) {
      if (n.point == j.point) {
        j.node_id = n.node_id;
        break;
      }
    }
    if (j.node_id == 0) {
      double best = 0.0;
      for (const auto& n : nodes) {
        const double d = distance(n.point, j.point);
        if (j.node_id == 0 || d < best) {
          j.node_id = n.node_id;
          best = d;
        }
      }
      if (j.node_id == 0 || best > tol.snap) {
        fail(Err::kMalformedRow,
             "junctions.csv line " + std::to_string(i + 1) + ": point matches no node");
      }
    }
    junctions.push_back(j);
  }

  return assemble(net_id, tol, std::move(nodes), std::move(sections), std::move(routes),
                  std::move(junctions));
}

}  // namespace netmo
