#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "netmo/common.hpp"
#include "netmo/gtypes.hpp"
#include "netmo/network.hpp"

namespace netmo {

struct PathResult {
  GLine line;   ///< traversal-ordered route intervals, glid 0
  double cost = 0.0;  ///< total length in meters
};

namespace routing_detail {

/// Search state: at a node, having arrived on (rid, dir). The trip origin is
/// rid 0, which also makes it sort before any real arrival for tie-breaking.
struct StateKey {
  int node = 0;
  int rid = 0;
  int dirv = 0;

  friend bool operator<(const StateKey& a, const StateKey& b) {
    return std::tie(a.node, a.rid, a.dirv) < std::tie(b.node, b.rid, b.dirv);
  }
  friend bool operator==(const StateKey& a, const StateKey& b) {
    return std::tie(a.node, a.rid, a.dirv) == std::tie(b.node, b.rid, b.dirv);
  }
};

struct Label {
  double cost = 0.0;
  std::optional<StateKey> pred;
  std::optional<RouteInterval> arc;  ///< interval traversed to reach this state
};

/// pred=nullopt (a search seed) sorts below every real predecessor.
inline bool pred_less(const std::optional<StateKey>& a, const std::optional<StateKey>& b) {
  if (!a) return static_cast<bool>(b);
  if (!b) return false;
  return *a < *b;
}

/// Bit-packs a state so a hash map can key on it; integer order matches the
/// lexicographic (node, rid, dirv) order.
inline std::uint64_t state_id(const StateKey& k) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.node)) << 32) |
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.rid)) << 2) |
         static_cast<std::uint64_t>(k.dirv);
}

/// The node whose position coincides with measure m on route rid, if any.
inline std::optional<int> node_at_measure(const Network& net, int rid, double m) {
  const double eps = net.tol().eps_measure;
  const Section& s = net.section_at(rid, m);
  if (std::abs(m - s.pos1) <= eps) return s.start_node_id;
  if (std::abs(m - s.pos2) <= eps) return s.end_node_id;
  return std::nullopt;
}

inline void check_gpoint(const Network& net, const GPoint& p, const char* label) {
  const double len = net.length(p.rid);  // throws UnknownRoute
  if (p.measure < -net.tol().eps_measure || p.measure > len + net.tol().eps_measure) {
    fail(Err::kMeasureOutOfRange, std::string(label) + " measure " + std::to_string(p.measure) +
                                      " outside route " + std::to_string(p.rid));
  }
}

}  // namespace routing_detail

/// Minimum-length path between two network positions under turn restrictions
/// and one-way constraints. Dijkstra over (node, arriving route-direction)
/// states; cost ties resolve toward the smaller predecessor state key.
inline PathResult shortest_path_result(const Network& net, const GPoint& from, const GPoint& to) {
  using routing_detail::Label;
  using routing_detail::StateKey;
  using routing_detail::node_at_measure;
  using routing_detail::pred_less;
  using routing_detail::state_id;

  routing_detail::check_gpoint(net, from, "origin");
  routing_detail::check_gpoint(net, to, "destination");
  const double eps = net.tol().eps_measure;

  PathResult res;
  res.line.netid = net.net_id();
  res.line.glid = 0;
  if (from.rid == to.rid && std::abs(from.measure - to.measure) <= eps) {
    return res;  // same location: empty path, zero cost
  }

  const std::optional<int> origin_node = node_at_measure(net, from.rid, from.measure);
  const std::optional<int> dest_node = node_at_measure(net, to.rid, to.measure);
  const Section& dest_sec = net.section_at(to.rid, to.measure);

  std::unordered_map<std::uint64_t, Label> labels;
  using QEntry = std::tuple<double, int, int, int>;  // cost, node, rid, dirv
  std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> queue;

  auto offer = [&](const StateKey& key, double cost, std::optional<StateKey> pred,
                   std::optional<RouteInterval> arc) {
    auto it = labels.find(state_id(key));
    if (it == labels.end() || cost < it->second.cost - eps) {
      labels[state_id(key)] = Label{cost, pred, arc};
      queue.emplace(cost, key.node, key.rid, key.dirv);
    } else if (cost <= it->second.cost + eps && pred_less(pred, it->second.pred)) {
      it->second.cost = std::min(it->second.cost, cost);
      it->second.pred = pred;
      it->second.arc = arc;
    }
  };

  if (origin_node) {
    offer(StateKey{*origin_node, 0, 0}, 0.0, std::nullopt, std::nullopt);
  } else {
    const Section& os = net.section_at(from.rid, from.measure);
    offer(StateKey{os.end_node_id, from.rid, static_cast<int>(Dir::kUp)}, os.pos2 - from.measure,
          std::nullopt, RouteInterval{from.rid, from.measure, os.pos2, 0});
    if (os.kind == 2) {
      offer(StateKey{os.start_node_id, from.rid, static_cast<int>(Dir::kDown)},
            from.measure - os.pos1, std::nullopt,
            RouteInterval{from.rid, from.measure, os.pos1, 0});
    }
  }

  double best_cost = 0.0;
  bool have_best = false;
  StateKey best_state;
  std::optional<RouteInterval> best_tail;

  // Direct reach without crossing any node: origin and destination interior
  // to the same section.
  if (!origin_node && !dest_node && from.rid == to.rid) {
    const Section& os = net.section_at(from.rid, from.measure);
    if (os.sid == dest_sec.sid) {
      const bool upward = to.measure > from.measure;
      if (upward || os.kind == 2) {
        best_cost = std::abs(to.measure - from.measure);
        have_best = true;
        best_state = StateKey{0, 0, 0};  // sentinel: no node chain
        best_tail = RouteInterval{from.rid, from.measure, to.measure, 0};
      }
    }
  }

  auto consider_final = [&](const StateKey& key, double cost,
                            std::optional<RouteInterval> tail) {
    if (!have_best || cost < best_cost - eps) {
      best_cost = cost;
      have_best = true;
      best_state = key;
      best_tail = tail;
    } else if (cost <= best_cost + eps && key < best_state) {
      best_cost = std::min(best_cost, cost);
      best_state = key;
      best_tail = tail;
    }
  };

  while (!queue.empty()) {
    const auto [cost, node, rid, dirv] = queue.top();
    queue.pop();
    const StateKey key{node, rid, dirv};
    const auto lit = labels.find(state_id(key));
    if (lit == labels.end() || cost > lit->second.cost + eps) continue;  // stale entry
    if (have_best && cost > best_cost + eps) break;

    const bool at_origin_state = rid == 0;

    // Finalization against the destination.
    if (dest_node) {
      if (node == *dest_node) consider_final(key, cost, std::nullopt);
    } else {
      if (node == dest_sec.start_node_id &&
          (at_origin_state ||
           net.transition_allowed(node, rid, static_cast<Dir>(dirv), to.rid, Dir::kUp))) {
        consider_final(key, cost + (to.measure - dest_sec.pos1),
                       RouteInterval{to.rid, dest_sec.pos1, to.measure, 0});
      }
      if (node == dest_sec.end_node_id && dest_sec.kind == 2 &&
          (at_origin_state ||
           net.transition_allowed(node, rid, static_cast<Dir>(dirv), to.rid, Dir::kDown))) {
        consider_final(key, cost + (dest_sec.pos2 - to.measure),
                       RouteInterval{to.rid, dest_sec.pos2, to.measure, 0});
      }
    }

    for (const auto& dep : net.departures(node)) {
      if (!at_origin_state &&
          !net.transition_allowed(node, rid, static_cast<Dir>(dirv), dep.rid, dep.dir)) {
        continue;
      }
      offer(StateKey{dep.to_node, dep.rid, static_cast<int>(dep.dir)}, cost + dep.length, key,
            RouteInterval{dep.rid, dep.from_meas, dep.to_meas, 0});
    }
  }

  if (!have_best) fail(Err::kNoPath, "no turn-legal path between the given positions");

  std::vector<RouteInterval> chain;
  if (best_tail) chain.push_back(*best_tail);
  if (!(best_state == StateKey{0, 0, 0})) {
    StateKey cur = best_state;
    for (;;) {
      const Label& lab = labels.at(state_id(cur));
      if (lab.arc) chain.push_back(*lab.arc);
      if (!lab.pred) break;
      cur = *lab.pred;
    }
  }
  std::reverse(chain.begin(), chain.end());

  for (const auto& iv : chain) {
    auto& out = res.line.intervals;
    if (!out.empty()) {
      RouteInterval& prev = out.back();
      const bool same_dir = (prev.pos2 > prev.pos1) == (iv.pos2 > iv.pos1);
      if (prev.rid == iv.rid && same_dir && std::abs(prev.pos2 - iv.pos1) <= eps) {
        prev.pos2 = iv.pos2;
        continue;
      }
    }
    out.push_back(iv);
  }
  res.cost = best_cost;
  return res;
}

inline GLine shortest_path(const Network& net, const GPoint& from, const GPoint& to) {
  return shortest_path_result(net, from, to).line;
}

inline double network_distance(const Network& net, const GPoint& from, const GPoint& to) {
  return shortest_path_result(net, from, to).cost;
}

}  // namespace netmo
