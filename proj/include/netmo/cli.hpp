#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "netmo/common.hpp"
#include "netmo/generator.hpp"
#include "netmo/moql.hpp"
#include "netmo/motion.hpp"
#include "netmo/network.hpp"
#include "netmo/routing.hpp"
#include "netmo/store.hpp"

namespace netmo::cli {

namespace fs = std::filesystem;

namespace cli_detail {

inline bool stores_present(const std::string& dir) {
  return fs::exists(dir + "/gpoints.csv") && fs::exists(dir + "/glines.csv") &&
         fs::exists(dir + "/mgpoints.csv");
}

inline Stores load_stores_if_present(const std::string& dir) {
  if (stores_present(dir)) return Stores::load(dir);
  return Stores{};
}

inline Network load_network(const std::string& dir, double snap) {
  Tolerances tol;
  tol.snap = snap;
  return Network::load(dir, 1, tol);
}

inline void copy_into(const std::string& src, const std::string& dst_dir) {
  if (!fs::exists(src)) fail(Err::kIoError, "missing file " + src);
  fs::create_directories(dst_dir);
  fs::copy_file(src, dst_dir + "/" + fs::path(src).filename().string(),
                fs::copy_options::overwrite_existing);
}

inline TimestampMs resolve_instant(const std::string& text, const UGPoint& u) {
  if (text == "now") return now_of(u);
  return parse_iso8601(text);
}

}  // namespace cli_detail

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 usage error, 2 data error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"moving objects on a transportation network"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --data appear after the subcommand name too
  std::string data_dir = "./data";
  app.add_option("--data", data_dir, "data directory (network + store files)");

  std::string edges_path;
  auto* sc_import = app.add_subcommand("import-edges", "stage an edge CSV into the data directory");
  sc_import->add_option("csv", edges_path, "edge file with header name,kind,wkt")->required();

  std::string restrictions_path;
  std::string route_key = "by_name";
  double snap = Tolerances{}.snap;
  auto* sc_build = app.add_subcommand("build-network", "build topology, routes and junctions");
  sc_build->add_option("--restrictions", restrictions_path, "turn-restriction CSV");
  sc_build->add_option("--route-key", route_key, "route grouping")
      ->check(CLI::IsMember({"by_name", "per_section"}));
  sc_build->add_option("--snap", snap, "node snap tolerance in meters");

  GenParams gp;
  auto* sc_gen = app.add_subcommand("generate", "simulate moving objects into the store");
  sc_gen->add_option("--periods", gp.periods, "number of departure batches");
  sc_gen->add_option("--interval", gp.interval_s, "seconds between batches");
  sc_gen->add_option("--per-period", gp.per_period, "objects per batch");
  sc_gen->add_option("--seed", gp.seed, "random seed");
  sc_gen->add_option("--cruise", gp.cruise, "cruise speed m/s");
  sc_gen->add_option("--accel", gp.accel, "acceleration m/s^2");
  sc_gen->add_option("--decel", gp.decel, "deceleration m/s^2");
  sc_gen->add_option("--red-prob", gp.red_prob, "red light probability");
  sc_gen->add_option("--red-wait", gp.red_wait_s, "red light wait seconds");

  std::string query_text;
  auto* sc_query = app.add_subcommand("query", "evaluate a MOQL expression");
  sc_query->add_option("moql", query_text, "query text")->required();

  auto* sc_audit = app.add_subcommand("audit", "check every stored record against the invariants");

  std::string export_what;
  std::string export_out;
  auto* sc_export = app.add_subcommand("export", "copy data files elsewhere");
  sc_export->add_option("--what", export_what, "network|samples|mgpoints")
      ->required()
      ->check(CLI::IsMember({"network", "samples", "mgpoints"}));
  sc_export->add_option("--out", export_out, "destination directory")->required();

  int visited_moid = 0;
  std::string from_text;
  std::string to_text;
  auto* sc_visited = app.add_subcommand("visited", "places an object travelled, as GLINE tuples");
  sc_visited->add_option("--moid", visited_moid, "moving object id")->required();
  sc_visited->add_option("--from", from_text, "ISO-8601 window start");
  sc_visited->add_option("--to", to_text, "ISO-8601 window end");

  std::string gline_name;
  auto* sc_passed = app.add_subcommand("passed-through",
                                       "objects that touched a named gline in a time window");
  sc_passed->add_option("--gline", gline_name, "stored gline name")->required();
  sc_passed->add_option("--from", from_text, "ISO-8601 window start")->required();
  sc_passed->add_option("--to", to_text, "ISO-8601 window end")->required();

  int count_min = 0;
  std::string at_text = "now";
  auto* sc_count = app.add_subcommand("count-by-route",
                                      "routes whose object count at a time exceeds a threshold");
  sc_count->add_option("--min", count_min, "strict lower bound on the count")->required();
  sc_count->add_option("--at", at_text, "ISO-8601 instant or 'now'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // help / version
    }
    err << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (sc_import->parsed()) {
      const auto edges = load_edges_csv(edges_path);  // validate before staging
      fs::create_directories(data_dir);
      fs::copy_file(edges_path, data_dir + "/edges.csv", fs::copy_options::overwrite_existing);
      out << "staged " << edges.size() << " edges\n";
      return 0;
    }

    if (sc_build->parsed()) {
      Tolerances tol;
      tol.snap = snap;
      NetworkBuilder builder(1, tol);
      builder.create_topology(load_edges_csv(data_dir + "/edges.csv"));
      builder.build_routes(route_key == "by_name" ? RouteKey::kByName : RouteKey::kPerSection);
      std::vector<TurnRestriction> restrictions;
      if (!restrictions_path.empty()) restrictions = load_restrictions_csv(restrictions_path);
      builder.build_junctions(std::move(restrictions));
      const Network net = builder.freeze();
      net.dump(data_dir);
      out << "network: " << net.nodes().size() << " nodes, " << net.sections().size()
          << " sections, " << net.routes().size() << " routes, " << net.junctions().size()
          << " junctions\n";
      return 0;
    }

    if (sc_gen->parsed()) {
      const Network net = cli_detail::load_network(data_dir, snap);
      Stores stores = cli_detail::load_stores_if_present(data_dir);
      for (const auto& [moid, u] : stores.mgpoints()) {
        gp.moid_start = std::max(gp.moid_start, moid + 1);
      }
      const GenSummary s = generate(net, gp, stores, data_dir + "/samples.csv");
      stores.save(data_dir);
      for (const auto& w : s.warnings) err << "warning: " << w << "\n";
      out << "generated " << s.objects << " objects, " << s.units << " units, "
          << s.sample_rows << " sample rows\n";
      return 0;
    }

    if (sc_query->parsed()) {
      const Network net = cli_detail::load_network(data_dir, snap);
      const Stores stores = cli_detail::load_stores_if_present(data_dir);
      for (const auto& line : moql::run_query(query_text, net, stores)) out << line << "\n";
      return 0;
    }

    if (sc_audit->parsed()) {
      const Network net = cli_detail::load_network(data_dir, snap);
      const Stores stores = cli_detail::load_stores_if_present(data_dir);
      const auto problems = stores.audit(net);
      if (problems.empty()) {
        out << "audit: ok\n";
        return 0;
      }
      for (const auto& p : problems) out << p << "\n";
      return 2;
    }

    if (sc_export->parsed()) {
      if (export_what == "network") {
        for (const char* f : {"nodes.csv", "sections.csv", "routes.csv", "junctions.csv"}) {
          cli_detail::copy_into(data_dir + "/" + f, export_out);
        }
      } else if (export_what == "samples") {
        cli_detail::copy_into(data_dir + "/samples.csv", export_out);
      } else {
        cli_detail::copy_into(data_dir + "/mgpoints.csv", export_out);
      }
      out << "exported " << export_what << " to " << export_out << "\n";
      return 0;
    }

    if (sc_visited->parsed()) {
      if (from_text.empty() != to_text.empty()) {
        err << "usage error: --from and --to must be given together\n";
        return 1;
      }
      const Network net = cli_detail::load_network(data_dir, snap);
      const Stores stores = cli_detail::load_stores_if_present(data_dir);
      UGPoint u = stores.ugpoint(visited_moid);
      if (!from_text.empty()) {
        u = atperiods(u, Periods::of({Period{parse_iso8601(from_text),
                                             parse_iso8601(to_text)}}));
      }
      out << format_gline(trajectory(u)) << "\n";
      return 0;
    }

    if (sc_passed->parsed()) {
      const Network net = cli_detail::load_network(data_dir, snap);
      const Stores stores = cli_detail::load_stores_if_present(data_dir);
      const GLineRecord* rec = stores.find_gline(gline_name);
      if (rec == nullptr) fail(Err::kUnknownName, "no gline named '" + gline_name + "'");
      const Periods window =
          Periods::of({Period{parse_iso8601(from_text), parse_iso8601(to_text)}});
      std::vector<int> hits;
      for (const auto& [moid, u] : stores.mgpoints()) {
        const UGPoint windowed = atperiods(u, window);
        if (!at_gline(windowed, rec->geom).units.empty()) hits.push_back(moid);
      }
      std::sort(hits.begin(), hits.end());
      std::string line;
      for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i) line += ", ";
        line += std::to_string(hits[i]);
      }
      out << line << "\n";
      return 0;
    }

    if (sc_count->parsed()) {
      const Network net = cli_detail::load_network(data_dir, snap);
      const Stores stores = cli_detail::load_stores_if_present(data_dir);
      std::map<int, int> counts;
      for (const auto& [moid, u] : stores.mgpoints()) {
        try {
          const TimestampMs t = cli_detail::resolve_instant(at_text, u);
          counts[atinstant(u, t).position.rid] += 1;
        } catch (const EngineError& e) {
          if (e.code() != Err::kUndefinedAtTime) throw;
        }
      }
      out << "routeid,name,count\n";
      for (const auto& [rid, n] : counts) {
        if (n <= count_min) continue;
        out << rid << "," << csv_escape(net.route(rid).name) << "," << n << "\n";
      }
      return 0;
    }

    err << "usage error: no subcommand\n";
    return 1;
  } catch (const EngineError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("netmo");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& a : full) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace netmo::cli
