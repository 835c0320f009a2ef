#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "netmo/common.hpp"
#include "netmo/csv.hpp"
#include "netmo/gtypes.hpp"
#include "netmo/motion.hpp"
#include "netmo/network.hpp"
#include "netmo/timeutil.hpp"

namespace netmo {

struct GPointRecord {
  int id = 0;  ///< 0 lets the store assign the next free id
  GPoint geom;
  std::string name;
};

struct GLineRecord {
  int id = 0;
  GLine geom;
  std::string name;
};

/// Record stores for static points, static lines and moving points. Writers
/// go through the insert/append operations, which enforce the integrity
/// rules; files are plain CSV, one per store.
class Stores {
 public:
  int insert_gpoint(GPointRecord rec) {
    rec.id = claim_id(rec.id, gpoint_ids());
    gpoints_.push_back(std::move(rec));
    sort_by_id(gpoints_);
    return gpoints_.back().id;
  }

  /// Stores a line record iff its intervals are pairwise quasi-disjoint.
  int insert_gline(GLineRecord rec, double eps_measure = 1e-9) {
    if (rec.geom.intervals.empty()) {
      fail(Err::kEmptyInput, "refusing to store a gline with no intervals");
    }
    if (const auto bad = quasi_disjoint_violation(rec.geom.intervals, eps_measure)) {
      const auto& a = rec.geom.intervals[bad->first];
      const auto& b = rec.geom.intervals[bad->second];
      fail(Err::kQuasiDisjointViolation,
           "intervals " + std::to_string(bad->first) + " and " + std::to_string(bad->second) +
               " overlap on route " + std::to_string(a.rid) + " side " + std::to_string(a.side) +
               ": [" + std::to_string(a.lo()) + "," + std::to_string(a.hi()) + "] vs [" +
               std::to_string(b.lo()) + "," + std::to_string(b.hi()) + "]");
    }
    rec.id = claim_id(rec.id, gline_ids());
    glines_.push_back(std::move(rec));
    sort_by_id(glines_);
    return glines_.back().id;
  }

  /// Appends units in the given order, validating each against its network
  /// and against the tail of its object's existing slices.
  int append_units(const Network& net, const std::vector<MGPointUnit>& units) {
    int count = 0;
    for (const auto& unit : units) {
      validate_unit(unit, net.length(unit.rid), net.tol().eps_measure);
      UGPoint& u = mgpoints_[unit.moid];
      u.moid = unit.moid;
      if (!u.units.empty()) {
        const MGPointUnit& prev = u.units.back();
        if (unit.t1 < prev.t2) {
          fail(Err::kTemporalOverlap, "object " + std::to_string(unit.moid) +
                                          ": unit starting " + format_iso8601(unit.t1) +
                                          " overlaps the stored tail");
        }
        if (unit.t1 == prev.t2) {
          check_boundary(net, prev, unit);
        }
      }
      u.units.push_back(unit);
      ++count;
    }
    return count;
  }

  const std::vector<GPointRecord>& gpoints() const { return gpoints_; }
  const std::vector<GLineRecord>& glines() const { return glines_; }
  const std::map<int, UGPoint>& mgpoints() const { return mgpoints_; }

  const UGPoint& ugpoint(int moid) const {
    auto it = mgpoints_.find(moid);
    if (it == mgpoints_.end()) {
      fail(Err::kUnknownName, "no moving object with id " + std::to_string(moid));
    }
    return it->second;
  }

  const GPointRecord* find_gpoint(const std::string& name) const {
    for (const auto& r : gpoints_) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }

  const GLineRecord* find_gline(const std::string& name) const {
    for (const auto& r : glines_) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }

  /// Full-store integrity check; returns human-readable violation messages,
  /// empty when the store is consistent.
  std::vector<std::string> audit(const Network& net) const {
    std::vector<std::string> problems;
    for (const auto& r : glines_) {
      if (const auto bad = quasi_disjoint_violation(r.geom.intervals, net.tol().eps_measure)) {
        problems.push_back("gline " + std::to_string(r.id) + ": intervals " +
                           std::to_string(bad->first) + " and " + std::to_string(bad->second) +
                           " violate quasi-disjointness");
      }
      for (const auto& iv : r.geom.intervals) {
        if (!net.has_route(iv.rid)) {
          problems.push_back("gline " + std::to_string(r.id) + ": unknown route " +
                             std::to_string(iv.rid));
        }
      }
    }
    for (const auto& r : gpoints_) {
      if (!net.has_route(r.geom.rid) ||
          !net.on_route(GPoint{r.geom.netid, r.geom.rid, r.geom.measure, 0}, r.geom.rid)) {
        problems.push_back("gpoint " + std::to_string(r.id) + ": not a valid network position");
      }
    }
    for (const auto& [moid, u] : mgpoints_) {
      try {
        validate_ugpoint(net, u);
      } catch (const EngineError& e) {
        problems.push_back("mgpoint " + std::to_string(moid) + ": " + e.what());
      }
    }
    return problems;
  }

  void save(const std::string& dir) const {
    std::vector<std::string> lines;
    lines.push_back("id,netid,rid,measure,side,name");
    for (const auto& r : gpoints_) {
      lines.push_back(csv_join({std::to_string(r.id), std::to_string(r.geom.netid),
                                std::to_string(r.geom.rid), fmt_double(r.geom.measure),
                                std::to_string(r.geom.side), r.name}));
    }
    write_lines(dir + "/gpoints.csv", lines);

    lines.clear();
    lines.push_back("id,glid,netid,rid,pos1,pos2,side,name");
    for (const auto& r : glines_) {
      for (const auto& iv : r.geom.intervals) {
        lines.push_back(csv_join({std::to_string(r.id), std::to_string(r.geom.glid),
                                  std::to_string(r.geom.netid), std::to_string(iv.rid),
                                  fmt_double(iv.pos1), fmt_double(iv.pos2),
                                  std::to_string(iv.side), r.name}));
      }
    }
    write_lines(dir + "/glines.csv", lines);

    lines.clear();
    lines.push_back("moid,netid,rid,side,t1,t2,pos1,pos2,v0,a");
    for (const auto& [moid, u] : mgpoints_) {
      for (const auto& unit : u.units) {
        lines.push_back(csv_join({std::to_string(unit.moid), std::to_string(unit.netid),
                                  std::to_string(unit.rid), std::to_string(unit.side),
                                  format_iso8601(unit.t1), format_iso8601(unit.t2),
                                  fmt_double(unit.pos1), fmt_double(unit.pos2),
                                  fmt_double(unit.v0), fmt_double(unit.a)}));
      }
    }
    write_lines(dir + "/mgpoints.csv", lines);
  }

  static Stores load(const std::string& dir) {
    Stores st;
    auto bad_row = [](const std::string& file, std::size_t line) {
      fail(Err::kMalformedRow, file + " line " + std::to_string(line));
    };

    const auto gp = read_lines(dir + "/gpoints.csv");
    if (gp.empty() || gp.front() != "id,netid,rid,measure,side,name") {
      fail(Err::kMalformedRow, "gpoints.csv: bad header");
    }
    for (std::size_t i = 1; i < gp.size(); ++i) {
      if (gp[i].empty()) continue;
      const auto f = csv_split(gp[i]);
      if (f.size() != 6) bad_row("gpoints.csv", i + 1);
      GPointRecord r;
      r.id = static_cast<int>(parse_int(f[0]));
      r.geom = GPoint{static_cast<int>(parse_int(f[1])), static_cast<int>(parse_int(f[2])),
                      parse_double(f[3]), static_cast<int>(parse_int(f[4]))};
      r.name = f[5];
      st.gpoints_.push_back(std::move(r));
    }
    sort_by_id(st.gpoints_);

    const auto gl = read_lines(dir + "/glines.csv");
    if (gl.empty() || gl.front() != "id,glid,netid,rid,pos1,pos2,side,name") {
      fail(Err::kMalformedRow, "glines.csv: bad header");
    }
    std::map<int, std::size_t> gline_pos;
    for (std::size_t i = 1; i < gl.size(); ++i) {
      if (gl[i].empty()) continue;
      const auto f = csv_split(gl[i]);
      if (f.size() != 8) bad_row("glines.csv", i + 1);
      const int id = static_cast<int>(parse_int(f[0]));
      auto it = gline_pos.find(id);
      if (it == gline_pos.end()) {
        GLineRecord r;
        r.id = id;
        r.geom.glid = static_cast<int>(parse_int(f[1]));
        r.geom.netid = static_cast<int>(parse_int(f[2]));
        r.name = f[7];
        it = gline_pos.emplace(id, st.glines_.size()).first;
        st.glines_.push_back(std::move(r));
      }
      st.glines_[it->second].geom.intervals.push_back(
          RouteInterval{static_cast<int>(parse_int(f[3])), parse_double(f[4]), parse_double(f[5]),
                        static_cast<int>(parse_int(f[6]))});
    }
    sort_by_id(st.glines_);

    const auto mg = read_lines(dir + "/mgpoints.csv");
    if (mg.empty() || mg.front() != "moid,netid,rid,side,t1,t2,pos1,pos2,v0,a") {
      fail(Err::kMalformedRow, "mgpoints.csv: bad header");
    }
    for (std::size_t i = 1; i < mg.size(); ++i) {
      if (mg[i].empty()) continue;
      const auto f = csv_split(mg[i]);
      if (f.size() != 10) bad_row("mgpoints.csv", i + 1);
      MGPointUnit u;
      u.moid = static_cast<int>(parse_int(f[0]));
      u.netid = static_cast<int>(parse_int(f[1]));
      u.rid = static_cast<int>(parse_int(f[2]));
      u.side = static_cast<int>(parse_int(f[3]));
      u.t1 = parse_iso8601(f[4]);
      u.t2 = parse_iso8601(f[5]);
      u.pos1 = parse_double(f[6]);
      u.pos2 = parse_double(f[7]);
      u.v0 = parse_double(f[8]);
      u.a = parse_double(f[9]);
      if (u.t1 >= u.t2) bad_row("mgpoints.csv", i + 1);
      UGPoint& obj = st.mgpoints_[u.moid];
      obj.moid = u.moid;
      obj.units.push_back(u);
    }
    for (auto& [moid, u] : st.mgpoints_) {
      std::stable_sort(u.units.begin(), u.units.end(),
                       [](const MGPointUnit& a, const MGPointUnit& b) { return a.t1 < b.t1; });
    }
    return st;
  }

 private:
  template <typename R>
  static void sort_by_id(std::vector<R>& recs) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const R& a, const R& b) { return a.id < b.id; });
  }

  std::vector<int> gpoint_ids() const {
    std::vector<int> ids;
    for (const auto& r : gpoints_) ids.push_back(r.id);
    return ids;
  }

  std::vector<int> gline_ids() const {
    std::vector<int> ids;
    for (const auto& r : glines_) ids.push_back(r.id);
    return ids;
  }

  static int claim_id(int requested, const std::vector<int>& taken) {
    if (requested == 0) {
      int next = 1;
      for (int id : taken) next = std::max(next, id + 1);
      return next;
    }
    if (std::find(taken.begin(), taken.end(), requested) != taken.end()) {
      fail(Err::kBadArgument, "record id " + std::to_string(requested) + " already in use");
    }
    return requested;
  }

  static void check_boundary(const Network& net, const MGPointUnit& prev,
                             const MGPointUnit& next) {
    const double eps = net.tol().eps_measure;
    if (prev.rid == next.rid) {
      if (std::abs(prev.pos2 - next.pos1) > eps * std::max(1.0, net.length(prev.rid))) {
        fail(Err::kContinuityViolation, "object " + std::to_string(next.moid) +
                                            " jumps along route " + std::to_string(prev.rid) +
                                            " at " + format_iso8601(next.t1));
      }
    } else {
      const PlanarPoint pa = net.to_planar(GPoint{prev.netid, prev.rid, prev.pos2, 0});
      const PlanarPoint pb = net.to_planar(GPoint{next.netid, next.rid, next.pos1, 0});
      if (distance(pa, pb) > net.tol().snap) {
        fail(Err::kContinuityViolation, "object " + std::to_string(next.moid) +
                                            " changes route discontinuously at " +
                                            format_iso8601(next.t1));
      }
    }
  }

  std::vector<GPointRecord> gpoints_;
  std::vector<GLineRecord> glines_;
  std::map<int, UGPoint> mgpoints_;
};

}  // namespace netmo
