// thingcrawl: operator CLI for the spatial crawler, simulator farm, and
// analytics suite. Machine-readable output (JSON/CSV) goes to stdout; human
// prose goes to stderr. Exit codes: 0 success, 1 operational error, 2 usage.

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "thingcrawl/analytics.hpp"
#include "thingcrawl/config.hpp"
#include "thingcrawl/emd.hpp"
#include "thingcrawl/pipeline.hpp"
#include "thingcrawl/sim.hpp"
#include "thingcrawl/source.hpp"
#include "thingcrawl/store.hpp"

using nlohmann::json;
using namespace thingcrawl;

namespace {

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << std::endl;
  } else {
    std::ofstream out(out_path);
    if (!out) throw IoFailure("cannot open output path " + out_path);
    out << j.dump(2) << '\n';
  }
}

BoundingBox parse_region_flag(const std::string& s) {
  double v[4];
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3]) != 4)
    throw ConfigError("--region must be min_lat,min_lon,max_lat,max_lon");
  return BoundingBox{{v[0], v[1]}, {v[2], v[3]}};
}

std::pair<int, int> parse_grid_flag(const std::string& s) {
  int r = 0, c = 0;
  if (std::sscanf(s.c_str(), "%dx%d", &r, &c) != 2 || r < 1 || c < 1)
    throw ConfigError("--grid must be ROWSxCOLS");
  return {r, c};
}

Timestamp parse_time_flag(const std::string& s) {
  auto t = parse_iso8601(s);
  if (!t) throw ConfigError("timestamp '" + s + "' is not ISO-8601");
  return *t;
}

json queue_to_json(const ScanQueue& q) {
  json entries = json::array();
  for (const auto& [r, c] : q.entries) entries.push_back(json::array({r, c}));
  return entries;
}

json summary_to_json(const RoundSummary& s) {
  json j;
  j["round_timestamp"] = format_iso8601(s.round_timestamp);
  j["records"] = s.record_count;
  j["sources"] = json::object();
  for (const auto& [k, v] : s.per_source) j["sources"][k] = v;
  j["warnings"] = s.warnings;
  j["next_queue"] = queue_to_json(s.next_queue);
  return j;
}

std::unique_ptr<Clock> make_clock(const CrawlConfig& cfg) {
  if (!cfg.sim_control.empty())
    return std::make_unique<RemoteSimClock>(cfg.sim_control);
  return std::make_unique<SimClock>(0);
}

struct AnalyzeStoreArgs {
  std::string store_dir;
  std::string region_flag;
  std::string config_path;

  BoundingBox region() const {
    if (!region_flag.empty()) return parse_region_flag(region_flag);
    if (!config_path.empty()) return load_crawl_config(config_path).region;
    throw ConfigError("need --region or --config to define the grid region");
  }
};

int run(int argc, char** argv) {
  CLI::App app{"spatial IoT crawler, simulator farm, and analytics"};
  app.require_subcommand(1);

  std::string out_path;
  app.add_option("--out", out_path, "write JSON output here instead of stdout");

  // simulate ---------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "run the simulated source farm");
  std::string sim_config, listen = "127.0.0.1:8080";
  simulate->add_option("--config", sim_config, "world TOML file")->required();
  simulate->add_option("--listen", listen, "host:port to bind");

  // plan -------------------------------------------------------------------
  auto* plan_cmd = app.add_subcommand("plan", "emit the weighted scan queue");
  std::string plan_config, plan_density, plan_queries;
  plan_cmd->add_option("--config", plan_config, "crawl TOML file")->required();
  plan_cmd->add_option("--density", plan_density, "observed density CSV");
  plan_cmd->add_option("--queries", plan_queries, "query density CSV");

  // crawl ------------------------------------------------------------------
  auto* crawl = app.add_subcommand("crawl", "run a crawl campaign");
  std::string crawl_config, crawl_store;
  int crawl_rounds = 1;
  crawl->add_option("--config", crawl_config, "crawl TOML file")->required();
  crawl->add_option("--rounds", crawl_rounds, "number of rounds")->required();
  crawl->add_option("--store", crawl_store, "snapshot store directory")->required();

  // qualify ----------------------------------------------------------------
  auto* qual = app.add_subcommand("qualify", "screen a candidate source");
  std::string qual_source, qual_region = "-90,-180,90,180";
  int qual_polls = 3;
  double qual_interval = 1.0, qual_theta = 0.95;
  qual->add_option("--source", qual_source, "source base URL")->required();
  qual->add_option("--polls", qual_polls, "number of polls");
  qual->add_option("--interval", qual_interval, "seconds between polls");
  qual->add_option("--theta", qual_theta, "valid-coordinate threshold");
  qual->add_option("--region", qual_region, "query box");

  // analyze ----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "metrics over stores and logs");
  analyze->require_subcommand(1);

  AnalyzeStoreArgs emd_args;
  auto* a_emd = analyze->add_subcommand("emd", "drift between distributions");
  std::string emd_a, emd_b, emd_grid = "8x8", emd_from;
  a_emd->add_option("--a", emd_a, "first density CSV");
  a_emd->add_option("--b", emd_b, "second density CSV");
  a_emd->add_option("--store", emd_args.store_dir, "snapshot store for a drift series");
  a_emd->add_option("--grid", emd_grid, "ROWSxCOLS");
  a_emd->add_option("--region", emd_args.region_flag, "grid region");
  a_emd->add_option("--config", emd_args.config_path, "crawl config supplying the region");
  a_emd->add_option("--from", emd_from, "baseline round (default: first)");

  auto* a_upd = analyze->add_subcommand("updates", "update ratios between rounds");
  std::string upd_store;
  bool upd_baseline = false;
  a_upd->add_option("--store", upd_store, "snapshot store")->required();
  a_upd->add_flag("--baseline", upd_baseline,
                  "compare every round against the first instead of consecutive");

  auto* a_inc = analyze->add_subcommand("inclusiveness", "per-source share of the id union");
  std::string inc_store, inc_round;
  a_inc->add_option("--store", inc_store, "snapshot store")->required();
  a_inc->add_option("--round", inc_round, "round timestamp (default: latest)");

  auto* a_kw = analyze->add_subcommand("keywords", "query-log keyword statistics");
  std::string kw_log, kw_cats;
  int kw_top = 24;
  a_kw->add_option("--log", kw_log, "query log JSON-lines")->required();
  a_kw->add_option("--categories", kw_cats, "keyword<TAB>category file");
  a_kw->add_option("--top", kw_top, "rows before the aggregate tail");

  AnalyzeStoreArgs gap_args;
  auto* a_gap = analyze->add_subcommand("gap", "things vs query distribution gap");
  std::string gap_round, gap_log, gap_grid = "8x8";
  a_gap->add_option("--store", gap_args.store_dir, "snapshot store")->required();
  a_gap->add_option("--round", gap_round, "round timestamp (default: latest)");
  a_gap->add_option("--log", gap_log, "query log JSON-lines")->required();
  a_gap->add_option("--grid", gap_grid, "ROWSxCOLS");
  a_gap->add_option("--region", gap_args.region_flag, "grid region");
  a_gap->add_option("--config", gap_args.config_path, "crawl config supplying the region");

  // export -----------------------------------------------------------------
  auto* export_cmd = app.add_subcommand("export", "file exports");
  export_cmd->require_subcommand(1);
  AnalyzeStoreArgs exp_args;
  auto* e_density = export_cmd->add_subcommand("density", "density CSV and PGM heatmap");
  std::string exp_round, exp_grid = "8x8", exp_csv, exp_pgm;
  e_density->add_option("--store", exp_args.store_dir, "snapshot store")->required();
  e_density->add_option("--round", exp_round, "round timestamp")->required();
  e_density->add_option("--grid", exp_grid, "ROWSxCOLS");
  e_density->add_option("--csv", exp_csv, "CSV output path");
  e_density->add_option("--pgm", exp_pgm, "PGM output path");
  e_density->add_option("--region", exp_args.region_flag, "grid region");
  e_density->add_option("--config", exp_args.config_path, "crawl config supplying the region");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  if (simulate->parsed()) {
    WorldFileConfig wf = load_world_config(sim_config);
    auto world = std::make_shared<World>(wf.world);
    SimServer server(world, wf.sources);
    auto colon = listen.rfind(':');
    if (colon == std::string::npos)
      throw ConfigError("--listen must be host:port");
    std::string host = listen.substr(0, colon);
    int port = std::atoi(listen.c_str() + colon + 1);
    std::cerr << "serving " << wf.sources.size() << " sources over "
              << world->object_count() << " objects at " << listen << std::endl;
    server.run(host, port);
    return 0;
  }

  if (plan_cmd->parsed()) {
    CrawlConfig cfg = load_crawl_config(plan_config);
    GridPlan plan = make_grid(cfg.region, cfg.rows, cfg.cols, cfg.margin_fraction);
    if (!plan_density.empty()) {
      std::ifstream in(plan_density);
      std::ostringstream buf;
      buf << in.rdbuf();
      DensityMatrix d = density_from_csv(buf.str());
      std::optional<DensityMatrix> q;
      if (!plan_queries.empty()) {
        std::ifstream qin(plan_queries);
        std::ostringstream qbuf;
        qbuf << qin.rdbuf();
        q = density_from_csv(qbuf.str());
      }
      plan = update_weights(plan, d, q, cfg.alpha, cfg.beta);
    }
    ScanQueue queue = build_queue(plan, cfg.prune_threshold, cfg.revisit_every);
    json j;
    j["rows"] = plan.rows;
    j["cols"] = plan.cols;
    j["margin_fraction"] = plan.margin_fraction;
    json segs = json::array();
    for (const auto& s : plan.segments) {
      json seg;
      seg["index"] = json::array({s.index.first, s.index.second});
      seg["weight"] = s.weight;
      seg["fetch_bounds"] = json::array(
          {s.fetch_bounds.min_corner.latitude, s.fetch_bounds.min_corner.longitude,
           s.fetch_bounds.max_corner.latitude, s.fetch_bounds.max_corner.longitude});
      segs.push_back(std::move(seg));
    }
    j["segments"] = std::move(segs);
    j["queue"] = queue_to_json(queue);
    emit(j, out_path);
    return 0;
  }

  if (crawl->parsed()) {
    CrawlConfig cfg = load_crawl_config(crawl_config);
    if (!cfg.table_sidecar.empty())
      register_enricher(make_table_enricher(cfg.table_sidecar));
    RoundConfig rc = cfg.to_round_config();
    SnapshotStore store(crawl_store);
    auto clock = make_clock(cfg);
    auto summaries = run_campaign(rc, crawl_rounds, store, *clock);
    json j = json::array();
    for (const auto& s : summaries) j.push_back(summary_to_json(s));
    for (const auto& s : summaries)
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << std::endl;
    emit(j, out_path);
    return 0;
  }

  if (qual->parsed()) {
    SourceDescriptor desc;
    desc.source_id = "candidate";
    desc.base_url = qual_source;
    desc.field_map["object_id"] = {"id"};
    desc.field_map["lat"] = {"latitude", "lat"};
    desc.field_map["lon"] = {"longitude", "lon", "lng"};
    desc.field_map["observed_at"] = {"updated"};
    QualificationReport rep = qualify_live(desc, parse_region_flag(qual_region),
                                           qual_polls, qual_interval, qual_theta);
    json j;
    j["parses"] = rep.parses;
    j["valid_coords_fraction"] = rep.valid_coords_fraction;
    j["updates_observed"] = rep.updates_observed;
    j["stable_ids"] = rep.stable_ids;
    j["verdict"] = rep.verdict;
    emit(j, out_path);
    return 0;
  }

  if (a_emd->parsed()) {
    if (!emd_a.empty() && !emd_b.empty()) {
      std::ifstream ina(emd_a), inb(emd_b);
      std::ostringstream ba, bb;
      ba << ina.rdbuf();
      bb << inb.rdbuf();
      DriftScore s = emd(density_from_csv(ba.str()), density_from_csv(bb.str()));
      json j;
      j["value"] = s.value;
      emit(j, out_path);
      return 0;
    }
    if (emd_args.store_dir.empty())
      throw ConfigError("analyze emd needs either --a/--b or --store");
    SnapshotStore store(emd_args.store_dir);
    auto rounds = store.list_rounds();
    if (rounds.empty()) throw UnknownRound("store has no rounds");
    Timestamp from = emd_from.empty() ? rounds.front() : parse_time_flag(emd_from);
    auto [rows, cols] = parse_grid_flag(emd_grid);
    auto series = drift_series(store, from, emd_args.region(), rows, cols);
    json j = json::array();
    for (const auto& s : series) {
      json e;
      e["from"] = format_iso8601(s.from_timestamp);
      e["to"] = format_iso8601(s.to_timestamp);
      e["value"] = s.value;
      j.push_back(std::move(e));
    }
    emit(j, out_path);
    return 0;
  }

  if (a_upd->parsed()) {
    SnapshotStore store(upd_store);
    auto rounds = store.list_rounds();
    if (rounds.size() < 2) throw UnknownRound("need at least two stored rounds");
    json j = json::array();
    Snapshot base = store.get_snapshot(rounds.front());
    Snapshot prev = base;
    for (std::size_t i = 1; i < rounds.size(); ++i) {
      Snapshot cur = store.get_snapshot(rounds[i]);
      UpdateRatioReport r = update_ratio(upd_baseline ? base : prev, cur);
      json e;
      e["from"] = format_iso8601(r.i_timestamp);
      e["to"] = format_iso8601(r.j_timestamp);
      e["ratio"] = r.ratio;
      e["new_rows"] = r.new_rows;
      j.push_back(std::move(e));
      prev = std::move(cur);
    }
    emit(j, out_path);
    return 0;
  }

  if (a_inc->parsed()) {
    SnapshotStore store(inc_store);
    auto rounds = store.list_rounds();
    if (rounds.empty()) throw UnknownRound("store has no rounds");
    Timestamp t = inc_round.empty() ? rounds.back() : parse_time_flag(inc_round);
    Snapshot s = store.get_snapshot(t);
    std::map<std::string, std::set<std::string>> id_sets;
    for (const auto& src : s.source_ids) id_sets[src];
    for (const auto& r : s.records) id_sets[r.source_id].insert(r.object_id);
    json j;
    for (const auto& [src, ratio] : inclusiveness(id_sets)) j[src] = ratio;
    emit(j, out_path);
    return 0;
  }

  if (a_kw->parsed()) {
    std::ifstream log(kw_log);
    if (!log) throw IoFailure("cannot open query log " + kw_log);
    QueryLogParse parsed = parse_query_log(log);
    std::map<std::string, std::string> cats;
    if (!kw_cats.empty()) {
      std::ifstream cin_(kw_cats);
      if (!cin_) throw IoFailure("cannot open category map " + kw_cats);
      cats = load_category_map(cin_);
    }
    KeywordStats stats = keyword_stats(parsed.entries, cats,
                                       static_cast<std::size_t>(kw_top));
    json j;
    j["total_queries"] = stats.total_queries;
    j["keyworded_queries"] = stats.keyworded_queries;
    j["keyworded_fraction"] = stats.keyworded_fraction;
    j["rejected_lines"] = parsed.rejected_lines;
    json rows = json::array();
    for (const auto& r : stats.rows) {
      json e;
      e["keyword"] = r.keyword;
      e["frequency"] = r.frequency;
      e["category"] = r.category;
      e["percent"] = r.percent;
      rows.push_back(std::move(e));
    }
    j["rows"] = std::move(rows);
    j["category_totals"] = json::object();
    for (const auto& [c, n] : stats.category_totals) j["category_totals"][c] = n;
    j["per_day"] = json::object();
    for (const auto& [d, n] : stats.per_day) j["per_day"][d] = n;
    emit(j, out_path);
    return 0;
  }

  if (a_gap->parsed()) {
    SnapshotStore store(gap_args.store_dir);
    auto rounds = store.list_rounds();
    if (rounds.empty()) throw UnknownRound("store has no rounds");
    Timestamp t = gap_round.empty() ? rounds.back() : parse_time_flag(gap_round);
    auto [rows, cols] = parse_grid_flag(gap_grid);
    BoundingBox region = gap_args.region();
    DensityMatrix things = density(store.get_snapshot(t), region, rows, cols);
    std::ifstream log(gap_log);
    if (!log) throw IoFailure("cannot open query log " + gap_log);
    QueryLogParse parsed = parse_query_log(log);
    DensityMatrix queries = query_density(parsed.entries, region, rows, cols);
    DriftScore s = gap_score(things, queries);
    json j;
    j["value"] = s.value;
    j["round"] = format_iso8601(t);
    emit(j, out_path);
    return 0;
  }

  if (e_density->parsed()) {
    SnapshotStore store(exp_args.store_dir);
    auto [rows, cols] = parse_grid_flag(exp_grid);
    DensityMatrix m = store.export_density(parse_time_flag(exp_round),
                                           exp_args.region(), rows, cols,
                                           exp_csv, exp_pgm);
    std::cerr << "exported " << m.total() << " records over " << rows << "x"
              << cols << std::endl;
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
}
