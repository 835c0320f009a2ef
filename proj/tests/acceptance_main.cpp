// Acceptance gate: runs the eight release criteria end to end and prints
// one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "netmo/cli.hpp"
#include "netmo/csv.hpp"
#include "netmo/generator.hpp"
#include "netmo/moql.hpp"
#include "netmo/motion.hpp"
#include "netmo/network.hpp"
#include "netmo/routing.hpp"
#include "netmo/store.hpp"
#include "routing_oracle.hpp"
#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;
using namespace netmo;
using netmo::testing::brute_force_cost;
using netmo::testing::check_path_legal;
using netmo::testing::grid_network;
using netmo::testing::moql_corpus;
using netmo::testing::random_gpoint;
using netmo::testing::random_network;
using netmo::testing::t1_network;
using netmo::testing::t1_network_with;
using netmo::testing::TempDir;

// Pinned acceptance tolerances and budgets.
constexpr double kCostEps = 1e-9;          // routing cost agreement, meters
constexpr double kSampleEps = 1e-6;        // sample reconstruction, meters
constexpr double kUnitEps = 1e-9;          // motion equation residual, meters
constexpr double kVelocityEps = 1e-9;      // boundary speed agreement, m/s
constexpr TimestampMs kSweepSnapMs = 2;    // AT boundary vs 1 ms sweep
constexpr double kRoutingBudgetS = 60.0;   // criterion 1 wall clock
constexpr double kGenerateBudgetS = 30.0;  // criterion 3 wall clock

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_seconds(double s) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << s << " s";
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool object_covers(const UGPoint& u, TimestampMs t) {
  for (std::size_t i = 0; i < u.units.size(); ++i) {
    const auto& un = u.units[i];
    if (t >= un.t1 && (t < un.t2 || (i + 1 == u.units.size() && t == un.t2))) return true;
  }
  return false;
}

// Criterion 1: shortest_path agrees with exhaustive turn-legal enumeration
// on at least 500 random small networks, within the time budget.
Outcome criterion_routing_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  const int net_count = 500;
  int queries = 0;
  for (int n = 0; n < net_count; ++n) {
    const Network net = random_network(rng);
    for (int q = 0; q < 4; ++q) {
      const GPoint a = random_gpoint(net, rng);
      const GPoint b = random_gpoint(net, rng);
      const auto want = brute_force_cost(net, a, b);
      try {
        const auto res = shortest_path_result(net, a, b);
        if (!want) return {false, "search found a path the oracle rejects"};
        if (std::abs(res.cost - *want) > kCostEps) {
          return {false, "cost mismatch: search " + std::to_string(res.cost) + " vs oracle " +
                             std::to_string(*want)};
        }
        check_path_legal(net, a, b, res);
      } catch (const EngineError& e) {
        if (e.code() != Err::kNoPath) throw;
        if (want) return {false, "oracle found a path the search missed"};
      }
      ++queries;
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= kRoutingBudgetS) {
    return {false, "over time budget: " + fmt_seconds(dt)};
  }
  return {true, std::to_string(net_count) + " networks / " + std::to_string(queries) +
                    " queries agree within 1e-9 m in " + fmt_seconds(dt)};
}

// Criterion 2: the two-route fixture takes the junction turn, and blocking
// both entries into the side route leaves no path.
Outcome criterion_fixture_path() {
  const Network net = t1_network();
  const auto res = shortest_path_result(net, GPoint{1, 1, 100, 0}, GPoint{1, 2, 200, 0});
  if (std::abs(res.cost - 700.0) > kCostEps) {
    return {false, "cost " + std::to_string(res.cost) + ", expected 700"};
  }
  const auto& ivs = res.line.intervals;
  const bool shape_ok = ivs.size() == 2 && ivs[0].rid == 1 && ivs[0].pos1 == 100.0 &&
                        ivs[0].pos2 == 600.0 && ivs[1].rid == 2 && ivs[1].pos1 == 0.0 &&
                        ivs[1].pos2 == 200.0;
  if (!shape_ok) return {false, "path shape differs from {A[100,600], B[0,200]}"};

  const Network blocked = t1_network_with({
      make_restriction(2, 1, Dir::kUp, 2, Dir::kUp, false),
      make_restriction(2, 1, Dir::kDown, 2, Dir::kUp, false),
  });
  try {
    shortest_path_result(blocked, GPoint{1, 1, 100, 0}, GPoint{1, 2, 200, 0});
    return {false, "restricted network still found a path"};
  } catch (const EngineError& e) {
    if (e.code() != Err::kNoPath) return {false, std::string("unexpected error: ") + e.what()};
  }
  return {true, "cost 700 with the expected intervals; restricted variant yields NoPath"};
}

// Criterion 3: the documented 20x5 seeded run on a 100x100 grid makes
// exactly 100 objects whose sample rows reconstruct from the stored units.
Outcome criterion_kinematic_roundtrip() {
  TempDir dir;
  grid_network(100, 100).dump(dir.path());

  const auto t0 = Clock::now();
  std::ostringstream out, err;
  const int code = cli::run({"generate", "--data", dir.path(), "--periods", "20", "--interval",
                             "25", "--per-period", "5", "--seed", "42"},
                            out, err);
  const double dt = seconds_since(t0);
  if (code != 0) return {false, "generate exited " + std::to_string(code) + ": " + err.str()};

  const Stores stores = Stores::load(dir.path());
  if (stores.mgpoints().size() != 100) {
    return {false, "expected exactly 100 objects, got " +
                       std::to_string(stores.mgpoints().size())};
  }
  const Network net = Network::load(dir.path());

  const auto lines = read_lines(dir.path() + "/samples.csv");
  if (lines.empty() || lines[0] != "moid,t,rid,measure,x,y") {
    return {false, "samples.csv missing or has a wrong header"};
  }
  long long rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv_split(lines[i]);
    if (f.size() != 6) return {false, "short sample row at line " + std::to_string(i + 1)};
    const Intime it = atinstant(stores.ugpoint(parse_int(f[0])), parse_iso8601(f[1]));
    if (parse_int(f[2]) != it.position.rid ||
        std::abs(parse_double(f[3]) - it.position.measure) > kSampleEps) {
      return {false, "sample row " + std::to_string(i + 1) + " deviates from atinstant"};
    }
    const PlanarPoint p = in_space(net, it.position);
    if (std::abs(parse_double(f[4]) - p.x) > kSampleEps ||
        std::abs(parse_double(f[5]) - p.y) > kSampleEps) {
      return {false, "sample row " + std::to_string(i + 1) + " planar deviation"};
    }
    ++rows;
  }
  if (rows == 0) return {false, "no sample rows written"};
  if (dt >= kGenerateBudgetS) return {false, "generate over budget: " + fmt_seconds(dt)};
  return {true, "100 objects, " + std::to_string(rows) +
                    " sample rows reconstruct within 1e-6 m; generate took " + fmt_seconds(dt)};
}

// Criterion 4: identical seed and inputs give byte-identical output files.
Outcome criterion_determinism() {
  const Network net = grid_network(3, 3);
  const auto run_once = [&](const TempDir& dir) {
    net.dump(dir.path());
    std::ostringstream out, err;
    const int code = cli::run({"generate", "--data", dir.path(), "--periods", "2", "--interval",
                               "25", "--per-period", "4", "--seed", "9"},
                              out, err);
    if (code != 0) throw std::runtime_error("generate failed: " + err.str());
  };
  TempDir d1, d2;
  run_once(d1);
  run_once(d2);
  for (const char* f : {"mgpoints.csv", "samples.csv"}) {
    const std::string a = slurp(fs::path(d1.path()) / f);
    if (a.empty()) return {false, std::string(f) + " is empty"};
    if (a != slurp(fs::path(d2.path()) / f)) {
      return {false, std::string(f) + " differs between identical runs"};
    }
  }
  return {true, "mgpoints.csv and samples.csv byte-identical across two seeded runs"};
}

// Criterion 5: the motion-algebra invariants hold on generated data.
Outcome criterion_motion_invariants() {
  const Network net = grid_network(4, 4);
  GenParams gp;
  gp.periods = 4;
  gp.per_period = 5;
  gp.seed = 7;
  Stores stores;
  TempDir dir;
  generate(net, gp, stores, (fs::path(dir.path()) / "samples.csv").string());
  if (stores.mgpoints().empty()) return {false, "no objects generated"};

  std::mt19937_64 rng(77);
  int sweep_checked = 0;
  for (const auto& [moid, u] : stores.mgpoints()) {
    // Motion-equation consistency and boundary continuity.
    for (std::size_t i = 0; i < u.units.size(); ++i) {
      const auto& un = u.units[i];
      if (std::abs(un.measure_at(un.t2) - un.pos2) > kUnitEps) {
        return {false, "motion equation residual on moid " + std::to_string(moid)};
      }
      if (i + 1 < u.units.size()) {
        const auto& nx = u.units[i + 1];
        if (un.t2 != nx.t1) return {false, "time gap inside trip " + std::to_string(moid)};
        if (std::abs(std::abs(un.velocity_at(un.t2)) - std::abs(nx.v0)) > kVelocityEps) {
          return {false, "velocity jump inside trip " + std::to_string(moid)};
        }
        if (un.rid == nx.rid && std::abs(un.pos2 - nx.pos1) > kUnitEps) {
          return {false, "position jump inside trip " + std::to_string(moid)};
        }
      }
    }

    // atperiods over the full deftime is the identity under sampling.
    const UGPoint clipped = atperiods(u, deftime(u));
    const TimestampMs lo = u.units.front().t1;
    const TimestampMs hi = u.units.back().t2;
    for (TimestampMs t = lo; t <= hi; t += 103) {
      const bool a = object_covers(u, t);
      const bool b = object_covers(clipped, t);
      if (a != b) return {false, "deftime clip changed coverage on moid " + std::to_string(moid)};
      if (a && std::abs(atinstant(u, t).position.measure -
                        atinstant(clipped, t).position.measure) > kUnitEps) {
        return {false, "deftime clip moved a position on moid " + std::to_string(moid)};
      }
    }

    // Restriction to a line stays inside the line.
    const int rid = u.units.front().rid;
    const double len = net.length(rid);
    const GLine band{1, 0, {{rid, len * 0.2, len * 0.7, 0}}};
    const GLine tr = trajectory(at_gline(u, band));
    for (const auto& iv : tr.intervals) {
      if (iv.rid != rid || iv.lo() < band.intervals[0].lo() - kSampleEps ||
          iv.hi() > band.intervals[0].hi() + kSampleEps) {
        return {false, "AT trajectory leaves the band on moid " + std::to_string(moid)};
      }
    }

    // Clipping never grows the traversed length.
    const double full_size = gline_size(trajectory(u));
    for (int k = 0; k < 3; ++k) {
      const TimestampMs a = lo + static_cast<TimestampMs>(rng() % (hi - lo));
      const TimestampMs b = a + 1 + static_cast<TimestampMs>(rng() % (hi - a));
      if (gline_size(trajectory(atperiods(u, Periods::of({{a, b}})))) > full_size + kUnitEps) {
        return {false, "clip grew the trajectory on moid " + std::to_string(moid)};
      }
    }

    // AT crossing windows vs a 1 ms sweep, on a subset for runtime.
    if (sweep_checked < 6) {
      ++sweep_checked;
      const UGPoint r = at_gline(u, band);
      const auto member = [&](TimestampMs t) {
        if (!object_covers(u, t)) return false;
        const Intime it = atinstant(u, t);
        return it.position.rid == rid && it.position.measure >= band.intervals[0].lo() &&
               it.position.measure <= band.intervals[0].hi();
      };
      std::vector<TimestampMs> bounds;
      for (const auto& un : r.units) {
        bounds.push_back(un.t1);
        bounds.push_back(un.t2);
      }
      bool prev = member(lo);
      for (TimestampMs t = lo + 1; t <= hi; ++t) {
        const bool cur = member(t);
        if (cur != prev) bounds.push_back(t);
        prev = cur;
      }
      std::sort(bounds.begin(), bounds.end());
      for (TimestampMs t = lo; t <= hi; ++t) {
        if (member(t) == object_covers(r, t)) continue;
        const auto it = std::lower_bound(bounds.begin(), bounds.end(), t - kSweepSnapMs);
        if (it == bounds.end() || *it > t + kSweepSnapMs) {
          return {false, "AT window off by more than 2 ms on moid " + std::to_string(moid)};
        }
      }
    }
  }
  return {true, std::to_string(stores.mgpoints().size()) +
                    " generated objects satisfy the invariant suite"};
}

// Criterion 6: quasi-disjoint insertion accepts, rejects, accepts.
Outcome criterion_quasi_disjoint() {
  Stores s;
  try {
    s.insert_gline({0, GLine{1, 1, {{1, 0, 100, 0}, {1, 100, 200, 0}}}, ""});
  } catch (const EngineError&) {
    return {false, "shared-endpoint line was rejected"};
  }
  bool rejected = false;
  try {
    s.insert_gline({0, GLine{1, 2, {{1, 0, 150, 0}, {1, 100, 200, 0}}}, ""});
  } catch (const EngineError& e) {
    rejected = e.code() == Err::kQuasiDisjointViolation;
  }
  if (!rejected) return {false, "interior overlap was accepted"};
  try {
    s.insert_gline({0, GLine{1, 3, {{1, 0, 150, 0}, {2, 100, 200, 0}}}, ""});
  } catch (const EngineError&) {
    return {false, "different-route overlap was rejected"};
  }
  return {true, "accept / reject / accept as specified"};
}

// Criterion 7: the visited and count-by-route templates give the documented
// formats and agree with a brute-force recount.
Outcome criterion_query_templates() {
  TempDir dir;
  {
    std::ofstream edges(fs::path(dir.path()) / "raw.csv");
    edges << "name,kind,wkt\n"
          << "A,2,\"LINESTRING(0 0, 600 0)\"\n"
          << "A,2,\"LINESTRING(600 0, 1000 0)\"\n"
          << "B,2,\"LINESTRING(600 0, 600 500)\"\n";
  }
  std::ostringstream sink, errs;
  if (cli::run({"import-edges", (fs::path(dir.path()) / "raw.csv").string(), "--data",
                dir.path()},
               sink, errs) != 0 ||
      cli::run({"build-network", "--data", dir.path()}, sink, errs) != 0 ||
      cli::run({"generate", "--data", dir.path(), "--periods", "3", "--per-period", "4",
                "--seed", "11"},
               sink, errs) != 0) {
    return {false, "dataset setup failed: " + errs.str()};
  }
  const Network net = Network::load(dir.path());
  const Stores stores = Stores::load(dir.path());

  // visited: the Query-1 shape, GLINE tuples with glid = moid.
  std::ostringstream vout, verr;
  if (cli::run({"visited", "--data", dir.path(), "--moid", "1000"}, vout, verr) != 0) {
    return {false, "visited failed: " + verr.str()};
  }
  std::vector<std::string> vlines;
  {
    std::istringstream in(vout.str());
    for (std::string l; std::getline(in, l);) vlines.push_back(l);
  }
  const GLine want_traj = trajectory(stores.ugpoint(1000));
  if (vlines.size() != want_traj.intervals.size() || vlines.empty()) {
    return {false, "visited printed " + std::to_string(vlines.size()) + " lines, expected " +
                       std::to_string(want_traj.intervals.size())};
  }
  for (std::size_t i = 0; i < vlines.size(); ++i) {
    if (vlines[i] != format_route_interval(want_traj, want_traj.intervals[i])) {
      return {false, "visited line " + std::to_string(i) + " not in GLINE(...) form: " +
                         vlines[i]};
    }
    if (vlines[i].rfind(",1000)") != vlines[i].size() - 6) {
      return {false, "visited glid is not the moid: " + vlines[i]};
    }
  }

  // count-by-route at 'now' against a brute-force recount, with threshold.
  std::map<int, int> recount;
  for (const auto& [moid, u] : stores.mgpoints()) ++recount[current_of(u).rid];
  for (const int min_count : {0, 1, 2}) {
    std::ostringstream cout_, cerr_;
    if (cli::run({"count-by-route", "--data", dir.path(), "--min",
                  std::to_string(min_count)},
                 cout_, cerr_) != 0) {
      return {false, "count-by-route failed: " + cerr_.str()};
    }
    std::istringstream in(cout_.str());
    std::string header;
    std::getline(in, header);
    if (header != "routeid,name,count") return {false, "wrong header: " + header};
    std::map<int, int> reported;
    for (std::string l; std::getline(in, l);) {
      const auto f = csv_split(l);
      if (f.size() != 3) return {false, "bad row: " + l};
      reported[parse_int(f[0])] = parse_int(f[2]);
      if (f[1] != net.route(parse_int(f[0])).name) return {false, "route name mismatch: " + l};
    }
    std::map<int, int> expected;
    for (const auto& [rid, n] : recount) {
      if (n > min_count) expected[rid] = n;
    }
    if (reported != expected) {
      return {false, "count-by-route differs from recount at min " +
                         std::to_string(min_count)};
    }
  }
  return {true, "visited matches trajectory tuples; count-by-route matches the recount"};
}

// Criterion 8: full MOQL coverage, positioned errors, print fixpoint.
Outcome criterion_moql() {
  const auto& table = moql::function_table();
  for (const char* name :
       {"in_space", "in_space_line", "in_network", "deftime", "trajectory", "atinstant",
        "atperiods", "at", "inside", "direction", "shortest_path_mo", "size", "duration",
        "now", "current", "shortest_path", "network_distance"}) {
    if (!table.count(name)) return {false, std::string("operation missing from MOQL: ") + name};
  }

  const auto expect_error = [](const std::string& query, Err code) -> std::optional<std::string> {
    try {
      moql::typecheck(moql::parse(query));
      return "no error for: " + query;
    } catch (const EngineError& e) {
      if (e.code() != code) return "wrong error kind for: " + query;
      const std::string what = e.what();
      if (what.find("col") == std::string::npos) return "no position in: " + what;
      return std::nullopt;
    }
  };
  for (const auto& [query, code] :
       std::vector<std::pair<std::string, Err>>{{"size(1, 2)", Err::kTypeError},
                                                {"mo(", Err::kSyntaxError},
                                                {"size(\"open", Err::kSyntaxError},
                                                {"mo(1) trailing", Err::kSyntaxError},
                                                {"frobnicate(1)", Err::kTypeError},
                                                {"size(mo(5))", Err::kTypeError}}) {
    if (const auto problem = expect_error(query, code)) return {false, *problem};
  }

  const auto corpus = moql_corpus();
  if (corpus.size() < 50) {
    return {false, "corpus has only " + std::to_string(corpus.size()) + " queries"};
  }
  for (const auto& q : corpus) {
    const auto e1 = moql::parse(q);
    const auto s1 = moql::print(e1);
    const auto e2 = moql::parse(s1);
    if (!(e1 == e2)) return {false, "AST not stable for: " + q};
    if (moql::print(e2) != s1) return {false, "printed text not stable for: " + q};
  }
  return {true, "all operations invocable; errors carry positions; " +
                    std::to_string(corpus.size()) + "-query print fixpoint holds"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    Outcome (*fn)();
  };
  const std::vector<Criterion> criteria = {
      {1, "routing oracle equivalence", criterion_routing_oracle},
      {2, "fixture path and restriction", criterion_fixture_path},
      {3, "kinematic round-trip", criterion_kinematic_roundtrip},
      {4, "determinism", criterion_determinism},
      {5, "motion invariants on generated data", criterion_motion_invariants},
      {6, "quasi-disjoint enforcement", criterion_quasi_disjoint},
      {7, "query templates", criterion_query_templates},
      {8, "MOQL parser", criterion_moql},
  };

  bool all_pass = true;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("unexpected exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << " - "
              << o.detail << "\n";
    if (!o.pass) all_pass = false;
  }
  return all_pass ? 0 : 1;
}
