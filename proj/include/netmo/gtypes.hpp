#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netmo/common.hpp"
#include "netmo/timeutil.hpp"

namespace netmo {

/// A static position on the network: (route, measure along the route, side).
/// This is the linear-referencing replacement for a planar coordinate.
struct GPoint {
  int netid = 0;
  int rid = 0;
  double measure = 0.0;  ///< meters from the route origin
  int side = 0;          ///< +1 right of the up direction, -1 left, 0 on/unspecified

  friend bool operator==(const GPoint&, const GPoint&) = default;
};

/// One stretch of one route. pos1/pos2 are route measures and may appear in
/// either order; the order carries the traversal direction.
struct RouteInterval {
  int rid = 0;
  double pos1 = 0.0;
  double pos2 = 0.0;
  int side = 0;

  double lo() const { return std::min(pos1, pos2); }
  double hi() const { return std::max(pos1, pos2); }
  double span() const { return std::abs(pos2 - pos1); }

  friend bool operator==(const RouteInterval&, const RouteInterval&) = default;
};

/// A region or path of the network: a set of route intervals sharing a group
/// id. Stored intervals must be quasi-disjoint (same route and side implies
/// non-overlapping interiors); transient results such as raw shortest paths
/// are not forced through that check, the store enforces it on insert.
struct GLine {
  int netid = 0;
  int glid = 0;
  std::vector<RouteInterval> intervals;

  bool empty() const { return intervals.empty(); }

  friend bool operator==(const GLine&, const GLine&) = default;
};

/// Total length of a GLine (sum of interval spans).
inline double gline_size(const GLine& g) {
  double s = 0.0;
  for (const auto& iv : g.intervals) s += iv.span();
  return s;
}

/// Returns the indices of a pair of intervals violating quasi-disjointness,
/// or nullopt if the set is valid. Two intervals conflict when they lie on
/// the same route and side and their interiors overlap by more than eps.
inline std::optional<std::pair<std::size_t, std::size_t>> quasi_disjoint_violation(
    const std::vector<RouteInterval>& intervals, double eps = 1e-9) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    for (std::size_t j = i + 1; j < intervals.size(); ++j) {
      const auto& a = intervals[i];
      const auto& b = intervals[j];
      if (a.rid != b.rid || a.side != b.side) continue;
      const double overlap = std::min(a.hi(), b.hi()) - std::max(a.lo(), b.lo());
      if (overlap > eps) return std::make_pair(i, j);
    }
  }
  return std::nullopt;
}

/// A time interval [t_start, t_end), milliseconds UTC.
struct Period {
  TimestampMs t_start = 0;
  TimestampMs t_end = 0;

  friend bool operator==(const Period&, const Period&) = default;
};

/// A sorted set of disjoint time intervals; overlapping or touching input
/// periods coalesce on construction.
class Periods {
 public:
  Periods() = default;

  static Periods of(std::vector<Period> raw) {
    for (const auto& p : raw) {
      if (!(p.t_start < p.t_end)) {
        fail(Err::kBadArgument, "period start must precede end");
      }
    }
    std::sort(raw.begin(), raw.end(),
              [](const Period& a, const Period& b) { return a.t_start < b.t_start; });
    Periods out;
    for (const auto& p : raw) {
      if (!out.spans_.empty() && p.t_start <= out.spans_.back().t_end) {
        out.spans_.back().t_end = std::max(out.spans_.back().t_end, p.t_end);
      } else {
        out.spans_.push_back(p);
      }
    }
    return out;
  }

  const std::vector<Period>& spans() const { return spans_; }
  bool empty() const { return spans_.empty(); }

  bool contains(TimestampMs t) const {
    for (const auto& p : spans_) {
      if (t >= p.t_start && t < p.t_end) return true;
    }
    return false;
  }

  TimestampMs total_ms() const {
    TimestampMs sum = 0;
    for (const auto& p : spans_) sum += p.t_end - p.t_start;
    return sum;
  }

  friend bool operator==(const Periods&, const Periods&) = default;

 private:
  std::vector<Period> spans_;
};

/// A (position, timestamp) pair; position and instant are plain field reads.
struct Intime {
  GPoint position;
  TimestampMs t = 0;
};

/// One temporal slice of a moving point: over [t1, t2) the object moves on
/// one route with constant acceleration, measure(t) = pos1 + v0*tau +
/// 0.5*a*tau^2 for tau = (t - t1)/1000 seconds. v0 and a are signed, positive
/// in the direction of increasing measure.
struct MGPointUnit {
  int moid = 0;
  int netid = 0;
  int rid = 0;
  int side = 0;
  TimestampMs t1 = 0;
  TimestampMs t2 = 0;
  double pos1 = 0.0;
  double pos2 = 0.0;
  double v0 = 0.0;  ///< m/s at t1
  double a = 0.0;   ///< m/s^2

  double duration_s() const { return static_cast<double>(t2 - t1) / 1000.0; }

  double measure_at(TimestampMs t) const {
    const double tau = static_cast<double>(t - t1) / 1000.0;
    return pos1 + v0 * tau + 0.5 * a * tau * tau;
  }

  double velocity_at(TimestampMs t) const {
    const double tau = static_cast<double>(t - t1) / 1000.0;
    return v0 + a * tau;
  }

  /// Measure range swept over [t1, t2], including an interior extremum when
  /// the velocity changes sign inside the slice.
  std::pair<double, double> sweep() const {
    double lo = std::min(pos1, pos2);
    double hi = std::max(pos1, pos2);
    if (a != 0.0) {
      const double t_star = -v0 / a;
      if (t_star > 0.0 && t_star < duration_s()) {
        const double ext = pos1 + v0 * t_star + 0.5 * a * t_star * t_star;
        lo = std::min(lo, ext);
        hi = std::max(hi, ext);
      }
    }
    return {lo, hi};
  }
};

/// Validates one slice against its route length: time order, side domain,
/// the closed-form position consistency between pos1 and pos2, and the swept
/// measure staying on the route.
inline void validate_unit(const MGPointUnit& u, double route_length, double eps = 1e-9) {
  if (!(u.t1 < u.t2)) {
    fail(Err::kUnitInvariantViolation, "unit times must satisfy t1 < t2");
  }
  if (u.side < -1 || u.side > 1) {
    fail(Err::kUnitInvariantViolation, "unit side outside {-1,0,1}");
  }
  const double tol = eps * std::max(1.0, route_length);
  const double predicted = u.measure_at(u.t2);
  if (std::abs(predicted - u.pos2) > tol) {
    fail(Err::kUnitInvariantViolation,
         "pos2 " + std::to_string(u.pos2) + " deviates from motion equation prediction " +
             std::to_string(predicted));
  }
  const auto [lo, hi] = u.sweep();
  if (lo < -tol || hi > route_length + tol) {
    fail(Err::kUnitInvariantViolation, "unit measure leaves the route");
  }
}

/// The slices of one moving object, ordered by start time. Slice intervals
/// are half-open [t1, t2) except the final one, which is closed at t2 so the
/// last stored position is well defined.
struct UGPoint {
  int moid = 0;
  std::vector<MGPointUnit> units;

  bool empty() const { return units.empty(); }
};

// ---- textual forms ----------------------------------------------------------

namespace text_detail {
inline std::string f3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}
}  // namespace text_detail

inline std::string format_route_interval(const GLine& g, const RouteInterval& iv) {
  return "GLINE(" + std::to_string(g.netid) + "," + std::to_string(iv.rid) + "," +
         text_detail::f3(iv.pos1) + "," + text_detail::f3(iv.pos2) + "," +
         std::to_string(iv.side) + "," + std::to_string(g.glid) + ")";
}

/// One GLINE(netid,rid,pos1,pos2,side,glid) tuple per line; "GLINE()" when empty.
inline std::string format_gline(const GLine& g) {
  if (g.empty()) return "GLINE()";
  std::string out;
  for (std::size_t i = 0; i < g.intervals.size(); ++i) {
    if (i) out += '\n';
    out += format_route_interval(g, g.intervals[i]);
  }
  return out;
}

inline std::string format_gpoint(const GPoint& p) {
  return "GPOINT(" + std::to_string(p.netid) + "," + std::to_string(p.rid) + "," +
         text_detail::f3(p.measure) + "," + std::to_string(p.side) + ")";
}

inline std::string format_intime(const Intime& it) {
  return "INTIME(" + format_gpoint(it.position) + "," + format_iso8601(it.t) + ")";
}

inline std::string format_periods(const Periods& ps) {
  std::string out = "PERIODS(";
  for (std::size_t i = 0; i < ps.spans().size(); ++i) {
    if (i) out += ", ";
    out += "[" + format_iso8601(ps.spans()[i].t_start) + ", " +
           format_iso8601(ps.spans()[i].t_end) + ")";
  }
  out += ')';
  return out;
}

}  // namespace netmo
