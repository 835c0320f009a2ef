#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "netmo/common.hpp"
#include "netmo/csv.hpp"
#include "netmo/gtypes.hpp"
#include "netmo/motion.hpp"
#include "netmo/network.hpp"
#include "netmo/routing.hpp"
#include "netmo/store.hpp"
#include "netmo/timeutil.hpp"

namespace netmo {

/// First batch start: 2024-01-01T00:00:00.000Z. Arbitrary but fixed so runs
/// are reproducible without a clock.
inline constexpr TimestampMs kDefaultStartMs = 1704067200000LL;

struct GenParams {
  int periods = 1;          ///< number of departure batches
  double interval_s = 25.0; ///< seconds between batch starts
  int per_period = 1;       ///< objects per batch
  std::uint64_t seed = 0;
  double cruise = 14.0;     ///< m/s
  double accel = 2.0;       ///< m/s^2
  double decel = 3.0;       ///< m/s^2, applied as negative
  double red_prob = 0.3;    ///< chance a junction is hit on red
  double red_wait_s = 20.0; ///< stop time at a red light
  double sample_step_s = 2.0;
  TimestampMs start_ms = kDefaultStartMs;
  int moid_start = 1000;  ///< raised past existing moids when appending
};

inline void validate_params(const GenParams& p) {
  if (p.periods < 1 || p.per_period < 1 || p.interval_s <= 0.0) {
    fail(Err::kBadArgument, "periods and per-period counts must be >= 1, interval > 0");
  }
  if (p.cruise <= 0.0 || p.accel <= 0.0 || p.decel <= 0.0) {
    fail(Err::kBadArgument, "cruise speed and accelerations must be positive");
  }
  if (p.red_prob < 0.0 || p.red_prob > 1.0) {
    fail(Err::kBadArgument, "red-light probability must lie in [0,1]");
  }
  if (p.red_wait_s < 0.0 || p.sample_step_s <= 0.0) {
    fail(Err::kBadArgument, "red wait must be >= 0 and sample step > 0");
  }
}

struct Trip {
  int moid = 0;
  int start_node = 0;
  int end_node = 0;
  TimestampMs start_time = 0;
  GLine path;
};

namespace gen_detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Engine for one object's random draws, decoupled from planning order.
inline std::mt19937_64 trip_engine(std::uint64_t seed, int moid) {
  std::uint64_t state = seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(moid));
  splitmix64(state);
  return std::mt19937_64(splitmix64(state));
}

/// Unbiased-enough bounded draw via the multiply-high trick; stable across
/// platforms, unlike the standard distributions.
inline std::uint64_t bounded(std::uint64_t x, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(x) * n) >> 64);
}

inline double unit_double(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

inline TimestampMs ceil_ms(double seconds) {
  const double ms = seconds * 1000.0;
  return static_cast<TimestampMs>(std::ceil(ms - 1e-9));
}

}  // namespace gen_detail

/// The network position of a node: its smallest incident route at the
/// smallest measure the route touches the node with.
inline GPoint node_gpoint(const Network& net, int node_id) {
  const auto& rl = net.routes_at(node_id);
  if (rl.empty()) fail(Err::kUnknownNode, "node " + std::to_string(node_id) + " has no routes");
  return GPoint{net.net_id(), rl.front().first, rl.front().second, 0};
}

/// Draws periods x per_period trips with uniform node pairs; unroutable or
/// degenerate pairs are redrawn up to 100 times, then the slot is skipped
/// with a warning. moids run from 1000 in creation order.
inline std::vector<Trip> plan_trips(const Network& net, const GenParams& params,
                                    std::vector<std::string>* warnings = nullptr) {
  validate_params(params);
  const std::size_t n = net.nodes().size();
  if (n < 2) fail(Err::kTooFewNodes, "trip planning needs at least two nodes");

  std::mt19937_64 rng(params.seed);
  std::vector<Trip> trips;
  for (int k = 0; k < params.periods; ++k) {
    const TimestampMs start =
        params.start_ms + static_cast<TimestampMs>(std::llround(
                              static_cast<double>(k) * params.interval_s * 1000.0));
    for (int j = 0; j < params.per_period; ++j) {
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        const std::size_t ia = gen_detail::bounded(rng(), n);
        const std::size_t ib = gen_detail::bounded(rng(), n);
        if (ia == ib) continue;
        const int na = net.nodes()[ia].node_id;
        const int nb = net.nodes()[ib].node_id;
        try {
          Trip t;
          t.moid = params.moid_start + static_cast<int>(trips.size());
          t.start_node = na;
          t.end_node = nb;
          t.start_time = start;
          t.path = shortest_path(net, node_gpoint(net, na), node_gpoint(net, nb));
          if (t.path.empty()) continue;
          trips.push_back(std::move(t));
          placed = true;
        } catch (const EngineError& e) {
          if (e.code() != Err::kNoPath) throw;
        }
      }
      if (!placed && warnings != nullptr) {
        warnings->push_back("period " + std::to_string(k) + " slot " + std::to_string(j) +
                            ": no routable node pair after 100 attempts, trip skipped");
      }
    }
  }
  return trips;
}

namespace gen_detail {

struct Event {
  double s = 0.0;       ///< arc position along the whole path
  double target = 0.0;  ///< desired speed when passing/stopping here
  bool interior = true; ///< interior events consume a red-light draw
  TimestampMs wait_ms = 0;
};

/// Event list for a path: origin, interval joints, junction nodes interior
/// to an interval, destination. Joints where the travel direction flips are
/// full stops; other interior events are junction crossings.
inline std::vector<Event> build_events(const Network& net, const GLine& path, double cruise,
                                       double eps) {
  const auto& ivs = path.intervals;
  std::vector<double> cum(ivs.size() + 1, 0.0);
  for (std::size_t i = 0; i < ivs.size(); ++i) cum[i + 1] = cum[i] + ivs[i].span();
  const double total = cum.back();

  std::vector<Event> events;
  events.push_back(Event{0.0, 0.0, false, 0});
  for (std::size_t i = 0; i < ivs.size(); ++i) {
    if (i + 1 < ivs.size()) {
      const bool same_route = ivs[i].rid == ivs[i + 1].rid;
      const bool flip = same_route && ((ivs[i].pos2 > ivs[i].pos1) != (ivs[i + 1].pos2 > ivs[i + 1].pos1));
      events.push_back(Event{cum[i + 1], flip ? 0.0 : cruise / 2.0, true, 0});
    }
    const double lo = ivs[i].lo();
    const double hi = ivs[i].hi();
    const bool up = ivs[i].pos2 > ivs[i].pos1;
    const Route& r = net.route(ivs[i].rid);
    for (int sid : r.section_ids) {
      const Section& sec = net.section(sid);
      for (const auto& [m, node] : {std::pair{sec.pos1, sec.start_node_id},
                                    std::pair{sec.pos2, sec.end_node_id}}) {
        if (m <= lo + eps || m >= hi - eps) continue;
        if (!net.has_junction_at(node)) continue;
        const double arc = cum[i] + (up ? m - ivs[i].pos1 : ivs[i].pos1 - m);
        events.push_back(Event{arc, cruise / 2.0, true, 0});
      }
    }
  }
  events.push_back(Event{total, 0.0, false, 0});

  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.s != b.s) return a.s < b.s;
    return a.target < b.target;
  });
  std::vector<Event> merged;
  for (const auto& e : events) {
    if (!merged.empty() && e.s - merged.back().s <= eps) {
      merged.back().target = std::min(merged.back().target, e.target);
      merged.back().interior = merged.back().interior && e.interior;
      continue;
    }
    merged.push_back(e);
  }
  merged.front().interior = false;
  merged.back().interior = false;
  merged.front().target = 0.0;
  merged.back().target = 0.0;
  return merged;
}

struct Phase {
  TimestampMs dur_ms = 0;
  double v = 0.0;  ///< arc-space speed entering the phase
  double a = 0.0;  ///< arc-space acceleration
};

/// Realizes one inter-event segment as up to three constant-acceleration
/// phases with integer-millisecond durations. The interior peak speed is the
/// free variable, so entry speed, exit speed and total distance are met
/// exactly; durations are rounded up from the nominal profile, which keeps
/// the peak at or below the nominal one.
inline void segment_phases(double d, double v_in, double v_out, double cruise, double accel,
                           double decel, std::vector<Phase>& out) {
  const double d_acc = (cruise * cruise - v_in * v_in) / (2.0 * accel);
  const double d_dec = (cruise * cruise - v_out * v_out) / (2.0 * decel);
  double v_peak;
  double t2_nom;
  if (d_acc + d_dec <= d) {
    v_peak = cruise;
    t2_nom = (d - d_acc - d_dec) / cruise;
  } else {
    v_peak = std::sqrt((2.0 * accel * decel * d + decel * v_in * v_in +
                        accel * v_out * v_out) /
                       (accel + decel));
    v_peak = std::max(v_peak, std::max(v_in, v_out));  // guard float dust
    t2_nom = 0.0;
  }
  const TimestampMs t1 = std::max<TimestampMs>(1, ceil_ms((v_peak - v_in) / accel));
  const TimestampMs t3 = std::max<TimestampMs>(1, ceil_ms((v_peak - v_out) / decel));
  const TimestampMs t2 = std::max<TimestampMs>(0, ceil_ms(t2_nom));

  const double t1s = static_cast<double>(t1) / 1000.0;
  const double t2s = static_cast<double>(t2) / 1000.0;
  const double t3s = static_cast<double>(t3) / 1000.0;
  const double vp = (d - v_in * t1s / 2.0 - v_out * t3s / 2.0) / (t1s / 2.0 + t2s + t3s / 2.0);

  out.push_back(Phase{t1, v_in, (vp - v_in) / t1s});
  if (t2 > 0) out.push_back(Phase{t2, vp, 0.0});
  out.push_back(Phase{t3, vp, (v_out - vp) / t3s});
}

}  // namespace gen_detail

/// Simulates one trip into storage units. The speed profile accelerates from
/// rest, cruises, brakes for junctions (to half cruise speed, or to a stop
/// plus a wait when the seeded draw lands on a red light) and stops exactly
/// at the destination. Every acceleration change and route change starts a
/// new unit.
inline std::vector<MGPointUnit> simulate_trip(const Network& net, const Trip& trip,
                                              const GenParams& params) {
  validate_params(params);
  const double eps = net.tol().eps_measure;
  const auto& ivs = trip.path.intervals;
  std::vector<MGPointUnit> units;
  if (ivs.empty()) return units;

  std::vector<double> cum(ivs.size() + 1, 0.0);
  for (std::size_t i = 0; i < ivs.size(); ++i) cum[i + 1] = cum[i] + ivs[i].span();

  auto events = gen_detail::build_events(net, trip.path, params.cruise, eps);

  std::mt19937_64 rng = gen_detail::trip_engine(params.seed, trip.moid);
  const TimestampMs red_ms =
      static_cast<TimestampMs>(std::llround(params.red_wait_s * 1000.0));
  for (auto& e : events) {
    if (!e.interior) continue;
    if (gen_detail::unit_double(rng()) < params.red_prob) {
      e.target = 0.0;
      e.wait_ms = red_ms;
    }
  }

  // Backward feasibility pass: speed at each event must allow braking to the
  // next event's speed within the available distance.
  std::vector<double> cap(events.size());
  cap.back() = 0.0;
  for (std::size_t i = events.size() - 1; i-- > 0;) {
    const double d = events[i + 1].s - events[i].s;
    cap[i] = std::min(events[i].target,
                      std::sqrt(cap[i + 1] * cap[i + 1] + 2.0 * params.decel * d));
  }
  cap.front() = 0.0;

  TimestampMs t = trip.start_time;
  double v = 0.0;
  std::size_t cur_iv = static_cast<std::size_t>(-1);
  double cur_pos = 0.0;
  double dirsign = 1.0;

  auto emit = [&](std::size_t iv_idx, TimestampMs dur, double v_arc, double a_arc) {
    if (dur <= 0) return;
    MGPointUnit u;
    u.moid = trip.moid;
    u.netid = net.net_id();
    u.rid = ivs[iv_idx].rid;
    u.side = 0;
    u.t1 = t;
    u.t2 = t + dur;
    u.pos1 = cur_pos;
    u.v0 = dirsign * v_arc;
    u.a = dirsign * a_arc;
    const double ds = static_cast<double>(dur) / 1000.0;
    u.pos2 = u.pos1 + u.v0 * ds + 0.5 * u.a * ds * ds;
    cur_pos = u.pos2;
    t = u.t2;
    units.push_back(u);
  };

  std::vector<gen_detail::Phase> phases;
  for (std::size_t i = 0; i + 1 < events.size(); ++i) {
    const double d = events[i + 1].s - events[i].s;
    const double mid = (events[i].s + events[i + 1].s) / 2.0;
    const std::size_t j =
        static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), mid) - cum.begin()) - 1;
    if (j != cur_iv) {
      cur_iv = j;
      dirsign = ivs[j].pos2 > ivs[j].pos1 ? 1.0 : -1.0;
      cur_pos = ivs[j].pos1 + dirsign * (events[i].s - cum[j]);
    }
    if (d > eps) {
      const double v_out = std::min(cap[i + 1], std::sqrt(v * v + 2.0 * params.accel * d));
      phases.clear();
      gen_detail::segment_phases(d, v, v_out, params.cruise, params.accel, params.decel, phases);
      for (const auto& ph : phases) emit(cur_iv, ph.dur_ms, ph.v, ph.a);
      v = v_out;
    }
    if (events[i + 1].wait_ms > 0) {
      // The wait happens before crossing, so it stays on the interval the
      // object arrived on.
      emit(cur_iv, events[i + 1].wait_ms, 0.0, 0.0);
      v = 0.0;
    }
  }
  return units;
}

struct GenSummary {
  int objects = 0;
  int units = 0;
  long long sample_rows = 0;
  std::vector<std::string> warnings;
};

/// Plans and simulates all trips, appends their units to the store and
/// writes the 2-second position capture file.
inline GenSummary generate(const Network& net, const GenParams& params, Stores& stores,
                           const std::string& samples_path) {
  GenSummary summary;
  const auto trips = plan_trips(net, params, &summary.warnings);

  const TimestampMs step =
      static_cast<TimestampMs>(std::llround(params.sample_step_s * 1000.0));
  std::vector<std::string> sample_lines;
  sample_lines.push_back("moid,t,rid,measure,x,y");

  for (const auto& trip : trips) {
    const auto units = simulate_trip(net, trip, params);
    if (units.empty()) continue;
    summary.units += stores.append_units(net, units);
    ++summary.objects;

    UGPoint u;
    u.moid = trip.moid;
    u.units = units;
    const TimestampMs end = units.back().t2;
    for (TimestampMs ts = trip.start_time; ts <= end; ts += step) {
      const Intime it = atinstant(u, ts);
      const PlanarPoint p = net.to_planar(it.position);
      sample_lines.push_back(csv_join({std::to_string(trip.moid), format_iso8601(ts),
                                       std::to_string(it.position.rid),
                                       fmt_double(it.position.measure), fmt_double(p.x),
                                       fmt_double(p.y)}));
      ++summary.sample_rows;
    }
  }
  write_lines(samples_path, sample_lines);
  return summary;
}

}  // namespace netmo
