#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "netmo/common.hpp"
#include "netmo/geometry.hpp"
#include "netmo/gtypes.hpp"
#include "netmo/network.hpp"
#include "netmo/routing.hpp"

namespace netmo {

inline constexpr double kEpsAccel = 1e-12;  ///< below this, motion is treated as linear
inline constexpr TimestampMs kEpsTimeMs = 1;  ///< crossing times snap to bounds within this

// ---- conversions between network and planar space ---------------------------

inline PlanarPoint in_space(const Network& net, const GPoint& p) { return net.to_planar(p); }

/// One sub-polyline per interval, in interval order; zero-span intervals
/// (a stationary trace) carry no line geometry and are skipped.
inline std::vector<MeasuredPolyline> in_space_line(const Network& net, const GLine& g) {
  std::vector<MeasuredPolyline> out;
  for (const auto& iv : g.intervals) {
    if (iv.span() <= net.tol().eps_measure) continue;
    out.push_back(net.curve(iv.rid).slice(iv.pos1, iv.pos2, net.tol().eps_measure));
  }
  return out;
}

/// Projects a planar point onto the nearest route (ties to the smaller rid).
inline GPoint in_network(const Network& net, PlanarPoint q, double max_dist = 100.0) {
  std::optional<MeasuredPolyline::Projection> best;
  int best_rid = 0;
  for (const auto& r : net.routes()) {
    const auto proj = r.curve.project(q, net.tol().eps_side);
    if (!best || proj.distance < best->distance) {
      best = proj;
      best_rid = r.rid;
    }
  }
  if (!best || best->distance > max_dist) {
    fail(Err::kNoNearbyRoute, "no route within " + std::to_string(max_dist) + " m");
  }
  return GPoint{net.net_id(), best_rid, best->measure, best->side};
}

// ---- temporal operations ----------------------------------------------------

inline Periods deftime(const UGPoint& u) {
  std::vector<Period> raw;
  for (const auto& unit : u.units) raw.push_back(Period{unit.t1, unit.t2});
  return Periods::of(std::move(raw));
}

/// The unit whose time interval covers t. Units are half-open [t1, t2)
/// except the final one, which is closed at t2.
inline const MGPointUnit* unit_at(const UGPoint& u, TimestampMs t) {
  for (std::size_t i = 0; i < u.units.size(); ++i) {
    const MGPointUnit& unit = u.units[i];
    const bool last = i + 1 == u.units.size();
    if (t >= unit.t1 && (t < unit.t2 || (last && t == unit.t2))) return &unit;
  }
  return nullptr;
}

inline Intime atinstant(const UGPoint& u, TimestampMs t) {
  const MGPointUnit* unit = unit_at(u, t);
  if (unit == nullptr) {
    fail(Err::kUndefinedAtTime, "object " + std::to_string(u.moid) + " undefined at " +
                                    format_iso8601(t));
  }
  return Intime{GPoint{unit->netid, unit->rid, unit->measure_at(t), unit->side}, t};
}

/// The traversed part of the network: per-unit swept spans, merged per
/// (route, side) when their closures overlap; glid = moid. Zero-span entries
/// (stationary slices) are kept so every visited position is covered.
inline GLine trajectory(const UGPoint& u) {
  GLine g;
  g.glid = u.moid;
  if (u.units.empty()) return g;
  g.netid = u.units.front().netid;

  struct Span {
    int rid = 0;
    int side = 0;
    double lo = 0.0;
    double hi = 0.0;
    bool merged = false;
    double pos1 = 0.0;  // original orientation, kept for unmerged spans
    double pos2 = 0.0;
  };
  std::vector<Span> spans;
  for (const auto& unit : u.units) {
    const auto [lo, hi] = unit.sweep();
    spans.push_back(Span{unit.rid, unit.side, lo, hi, false, unit.pos1, unit.pos2});
  }
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
    return std::tie(a.rid, a.side, a.lo, a.hi) < std::tie(b.rid, b.side, b.lo, b.hi);
  });
  std::vector<Span> merged;
  for (const auto& s : spans) {
    if (!merged.empty()) {
      Span& prev = merged.back();
      if (prev.rid == s.rid && prev.side == s.side && s.lo <= prev.hi) {
        if (s.hi > prev.hi) prev.hi = s.hi;
        prev.merged = true;
        continue;
      }
    }
    merged.push_back(s);
  }
  std::sort(merged.begin(), merged.end(), [](const Span& a, const Span& b) {
    return std::tie(a.rid, a.lo, a.side) < std::tie(b.rid, b.lo, b.side);
  });
  for (const auto& s : merged) {
    if (s.merged) {
      g.intervals.push_back(RouteInterval{s.rid, s.lo, s.hi, s.side});
    } else {
      // A lone slice keeps its direction of travel.
      g.intervals.push_back(RouteInterval{s.rid, s.pos1, s.pos2, s.side});
    }
  }
  return g;
}

namespace motion_detail {

/// Clips one unit to [t1, t2] on the millisecond grid, recomputing boundary
/// measures by the position equation and the new v0 by the velocity equation.
inline MGPointUnit reslice(const MGPointUnit& unit, TimestampMs t1, TimestampMs t2) {
  MGPointUnit out = unit;
  out.t1 = t1;
  out.t2 = t2;
  out.pos1 = unit.measure_at(t1);
  out.pos2 = unit.measure_at(t2);
  out.v0 = unit.velocity_at(t1);
  return out;
}

}  // namespace motion_detail

/// Restricts the object to the given time periods.
inline UGPoint atperiods(const UGPoint& u, const Periods& ps) {
  UGPoint out;
  out.moid = u.moid;
  for (const auto& unit : u.units) {
    for (const auto& p : ps.spans()) {
      const TimestampMs lo = std::max(unit.t1, p.t_start);
      const TimestampMs hi = std::min(unit.t2, p.t_end);
      if (lo >= hi) continue;
      out.units.push_back(motion_detail::reslice(unit, lo, hi));
    }
  }
  std::sort(out.units.begin(), out.units.end(),
            [](const MGPointUnit& a, const MGPointUnit& b) { return a.t1 < b.t1; });
  return out;
}

namespace motion_detail {

/// Real roots of pos(tau) = target within [0, limit], using the numerically
/// stable quadratic form; linear fallback for negligible acceleration.
inline void crossing_times(const MGPointUnit& unit, double target, double limit,
                           std::vector<double>& out) {
  const double c = unit.pos1 - target;
  if (std::abs(unit.a) < kEpsAccel) {
    if (std::abs(unit.v0) < kEpsAccel) return;  // constant position, no crossing
    const double tau = -c / unit.v0;
    if (tau >= 0.0 && tau <= limit) out.push_back(tau);
    return;
  }
  const double A = 0.5 * unit.a;
  const double b = unit.v0;
  const double disc = b * b - 4.0 * A * c;
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  const double q = -(b + (b >= 0.0 ? sq : -sq)) / 2.0;
  double roots[2];
  int n = 0;
  roots[n++] = q / A;
  if (std::abs(q) > 0.0) roots[n++] = c / q;
  for (int i = 0; i < n; ++i) {
    if (roots[i] >= 0.0 && roots[i] <= limit) out.push_back(roots[i]);
  }
}

inline bool sides_match(int a, int b) { return a == 0 || b == 0 || a == b; }

}  // namespace motion_detail

/// Restricts the object to the times its position lies within g
/// (side 0 acts as a wildcard on either side of the match).
inline UGPoint at_gline(const UGPoint& u, const GLine& g, double eps_measure = 1e-9) {
  UGPoint out;
  out.moid = u.moid;
  for (const auto& unit : u.units) {
    std::vector<std::pair<double, double>> bounds;  // matching measure intervals
    for (const auto& iv : g.intervals) {
      if (iv.rid == unit.rid && motion_detail::sides_match(iv.side, unit.side)) {
        bounds.emplace_back(iv.lo(), iv.hi());
      }
    }
    if (bounds.empty()) continue;

    const double limit = unit.duration_s();
    std::vector<double> cuts{0.0, limit};
    for (const auto& [lo, hi] : bounds) {
      motion_detail::crossing_times(unit, lo, limit, cuts);
      motion_detail::crossing_times(unit, hi, limit, cuts);
    }
    const double eps_t = static_cast<double>(kEpsTimeMs) / 1000.0;
    for (double& c : cuts) {
      if (std::abs(c) <= eps_t) c = 0.0;
      if (std::abs(c - limit) <= eps_t) c = limit;
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               cuts.end());

    auto inside_bounds = [&](double tau) {
      const double m = unit.pos1 + unit.v0 * tau + 0.5 * unit.a * tau * tau;
      for (const auto& [lo, hi] : bounds) {
        if (m >= lo - eps_measure && m <= hi + eps_measure) return true;
      }
      return false;
    };

    // Walk the pieces between cuts; membership is constant on each piece.
    std::optional<double> run_start;
    std::vector<std::pair<double, double>> runs;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const bool in = inside_bounds((cuts[i] + cuts[i + 1]) / 2.0);
      if (in && !run_start) run_start = cuts[i];
      if (!in && run_start) {
        runs.emplace_back(*run_start, cuts[i]);
        run_start.reset();
      }
    }
    if (run_start) runs.emplace_back(*run_start, cuts.back());

    for (const auto& [tau_in, tau_out] : runs) {
      // Shrink inward to the millisecond grid so containment survives the
      // integer timestamps.
      const double guard = 1e-9;
      TimestampMs t1 = unit.t1 + static_cast<TimestampMs>(std::ceil(tau_in * 1000.0 - guard));
      TimestampMs t2 = unit.t1 + static_cast<TimestampMs>(std::floor(tau_out * 1000.0 + guard));
      t1 = std::max(t1, unit.t1);
      t2 = std::min(t2, unit.t2);
      if (t1 >= t2) continue;
      out.units.push_back(motion_detail::reslice(unit, t1, t2));
    }
  }
  std::sort(out.units.begin(), out.units.end(),
            [](const MGPointUnit& a, const MGPointUnit& b) { return a.t1 < b.t1; });
  return out;
}

/// Whether the object lies within g at time t.
inline bool inside(const UGPoint& u, const GLine& g, TimestampMs t, double eps_measure = 1e-9) {
  const Intime it = atinstant(u, t);
  for (const auto& iv : g.intervals) {
    if (iv.rid != it.position.rid) continue;
    if (!motion_detail::sides_match(iv.side, it.position.side)) continue;
    if (it.position.measure >= iv.lo() - eps_measure &&
        it.position.measure <= iv.hi() + eps_measure) {
      return true;
    }
  }
  return false;
}

/// Azimuth from object 1 toward object 2 at time t, degrees in [0, 360).
inline double direction(const Network& net, const UGPoint& u1, const UGPoint& u2, TimestampMs t) {
  const PlanarPoint p1 = net.to_planar(atinstant(u1, t).position);
  const PlanarPoint p2 = net.to_planar(atinstant(u2, t).position);
  return azimuth_deg(p1, p2);
}

/// Shortest network path between two objects' positions at time t.
inline GLine shortest_path_mo(const Network& net, const UGPoint& u1, const UGPoint& u2,
                              TimestampMs t) {
  return shortest_path(net, atinstant(u1, t).position, atinstant(u2, t).position);
}

/// Time span from first definition to last, gaps included, in seconds.
inline double duration(const UGPoint& u) {
  if (u.units.empty()) return 0.0;
  TimestampMs lo = u.units.front().t1;
  TimestampMs hi = u.units.front().t2;
  for (const auto& unit : u.units) {
    lo = std::min(lo, unit.t1);
    hi = std::max(hi, unit.t2);
  }
  return static_cast<double>(hi - lo) / 1000.0;
}

/// Last stored instant of the object.
inline TimestampMs now_of(const UGPoint& u) {
  if (u.units.empty()) fail(Err::kUndefinedAtTime, "object has no stored movement");
  TimestampMs hi = u.units.front().t2;
  for (const auto& unit : u.units) hi = std::max(hi, unit.t2);
  return hi;
}

/// Last stored position of the object.
inline GPoint current_of(const UGPoint& u) { return atinstant(u, now_of(u)).position; }

/// Full object validation against its network: per-unit motion-equation
/// consistency plus ordering, non-overlap and positional continuity across
/// unit boundaries.
inline void validate_ugpoint(const Network& net, const UGPoint& u) {
  const double eps = net.tol().eps_measure;
  for (const auto& unit : u.units) {
    validate_unit(unit, net.length(unit.rid), eps);
  }
  for (std::size_t i = 0; i + 1 < u.units.size(); ++i) {
    const MGPointUnit& a = u.units[i];
    const MGPointUnit& b = u.units[i + 1];
    if (b.t1 < a.t2) {
      fail(Err::kTemporalOverlap, "object " + std::to_string(u.moid) + " units overlap at " +
                                      format_iso8601(b.t1));
    }
    if (b.t1 != a.t2) continue;  // a gap; nothing to join up
    if (a.rid == b.rid) {
      if (std::abs(a.pos2 - b.pos1) > eps * std::max(1.0, net.length(a.rid))) {
        fail(Err::kContinuityViolation,
             "object " + std::to_string(u.moid) + " jumps along route " + std::to_string(a.rid) +
                 " at " + format_iso8601(b.t1));
      }
    } else {
      const PlanarPoint pa = net.to_planar(GPoint{a.netid, a.rid, a.pos2, 0});
      const PlanarPoint pb = net.to_planar(GPoint{b.netid, b.rid, b.pos1, 0});
      if (distance(pa, pb) > net.tol().snap) {
        fail(Err::kContinuityViolation,
             "object " + std::to_string(u.moid) + " changes route discontinuously at " +
                 format_iso8601(b.t1));
      }
    }
  }
}

}  // namespace netmo
