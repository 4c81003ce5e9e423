#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>

#include "thingcrawl/config.hpp"
#include "thingcrawl/pipeline.hpp"
#include "thingcrawl/sim.hpp"
#include "thingcrawl/store.hpp"

using namespace thingcrawl;
namespace fs = std::filesystem;

namespace {

const BoundingBox kRegion{{0, 0}, {12, 12}};

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("thingcrawl-pipe-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

struct Farm {
  std::shared_ptr<World> world;
  std::unique_ptr<SimServer> server;
  int port = 0;

  Farm(WorldConfig cfg, std::vector<SimSourceSpec> sources) {
    world = std::make_shared<World>(std::move(cfg));
    server = std::make_unique<SimServer>(world, std::move(sources));
    port = server->start("127.0.0.1", 0);
  }
  ~Farm() { server->stop(); }

  SourceDescriptor descriptor(const std::string& source_id,
                              int page_limit = 100) const {
    SourceDescriptor d;
    d.source_id = source_id;
    d.base_url =
        "http://127.0.0.1:" + std::to_string(port) + "/" + source_id;
    d.page_limit = page_limit;
    d.field_map["object_id"] = {"id"};
    d.field_map["lat"] = {"latitude", "lat"};
    d.field_map["lon"] = {"longitude", "lon", "lng"};
    d.field_map["observed_at"] = {"updated"};
    return d;
  }
};

WorldConfig mover_world(int count, std::uint64_t seed = 3) {
  WorldConfig cfg;
  cfg.seed = seed;
  cfg.region = kRegion;
  PopulationSpec p;
  p.kind = PopulationSpec::Kind::mover;
  p.count = count;
  p.speed = 0.3;
  cfg.populations = {p};
  return cfg;
}

SimSourceSpec source(const std::string& id, double coverage = 1.0) {
  SimSourceSpec s;
  s.source_id = id;
  s.coverage = coverage;
  return s;
}

ScanQueue full_queue(const GridPlan& plan) {
  ScanQueue q;
  for (const Segment& s : plan.segments) q.entries.push_back(s.index);
  return q;
}

std::vector<ThingRecord> sorted(std::vector<ThingRecord> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("a round captures every object exactly once") {
  Farm farm(mover_world(200), {source("a")});
  RoundConfig cfg;
  cfg.workers = 4;
  cfg.sources = {farm.descriptor("a")};
  cfg.plan = make_grid(kRegion, 4, 4, 0.0);
  SimClock clock(farm.world->config().start_time);
  RoundResult r = run_round(cfg, full_queue(cfg.plan), clock);
  CHECK(r.warnings.empty());
  CHECK(r.snapshot.records.size() == 200);
  std::set<std::string> ids;
  for (const auto& rec : r.snapshot.records) ids.insert(rec.object_id);
  CHECK(ids.size() == 200);
}

TEST_CASE("merged output is independent of the worker count") {
  Farm farm(mover_world(300, 9), {source("a"), source("b", 0.5)});
  RoundConfig cfg;
  cfg.sources = {farm.descriptor("a"), farm.descriptor("b")};
  cfg.plan = make_grid(kRegion, 4, 4, 0.01);

  std::vector<std::vector<ThingRecord>> results;
  for (int workers : {1, 4, 8}) {
    cfg.workers = workers;
    SimClock clock(farm.world->config().start_time);
    RoundResult r = run_round(cfg, full_queue(cfg.plan), clock);
    results.push_back(sorted(r.snapshot.records));
  }
  CHECK(results[0] == results[1]);
  CHECK(results[1] == results[2]);
}

TEST_CASE("duplicate queue entries do not duplicate records") {
  Farm farm(mover_world(100), {source("a")});
  RoundConfig cfg;
  cfg.workers = 4;
  cfg.sources = {farm.descriptor("a")};
  cfg.plan = make_grid(kRegion, 2, 2, 0.0);
  ScanQueue q = full_queue(cfg.plan);
  q.entries.insert(q.entries.end(), q.entries.begin(), q.entries.end());
  SimClock clock(farm.world->config().start_time);
  RoundResult r = run_round(cfg, q, clock);
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& rec : r.snapshot.records)
    keys.insert({rec.source_id, rec.object_id});
  CHECK(keys.size() == r.snapshot.records.size());
}

TEST_CASE("a dead source degrades to a warning") {
  Farm farm(mover_world(50), {source("live")});
  RoundConfig cfg;
  cfg.workers = 2;
  cfg.sources = {farm.descriptor("live")};
  SourceDescriptor dead = farm.descriptor("dead");
  dead.base_url = "http://127.0.0.1:1/dead";
  cfg.sources.push_back(dead);
  cfg.plan = make_grid(kRegion, 2, 2, 0.0);
  SimClock clock(farm.world->config().start_time);
  RoundResult r = run_round(cfg, full_queue(cfg.plan), clock);
  CHECK(r.warnings.size() == 1);
  CHECK(r.snapshot.records.size() == 50);
  for (const auto& rec : r.snapshot.records) CHECK(rec.source_id == "live");
}

TEST_CASE("a round with no reachable source fails loudly") {
  RoundConfig cfg;
  cfg.workers = 1;
  SourceDescriptor dead;
  dead.source_id = "dead";
  dead.base_url = "http://127.0.0.1:1/dead";
  dead.field_map["object_id"] = {"id"};
  dead.field_map["lat"] = {"lat"};
  dead.field_map["lon"] = {"lon"};
  cfg.sources = {dead};
  cfg.plan = make_grid(kRegion, 1, 1, 0.0);
  SimClock clock(0);
  CHECK_THROWS_AS(run_round(cfg, full_queue(cfg.plan), clock),
                  AllSourcesFailed);
}

TEST_CASE("the noop enricher is the identity") {
  auto noop = lookup_enricher("noop");
  ThingRecord r;
  r.source_id = "s";
  r.object_id = "o";
  r.position = {1, 2};
  r.attributes["value"] = 3.5;
  CHECK(noop->enrich(r) == r);
}

TEST_CASE("unknown enrichers are rejected") {
  CHECK_THROWS_AS(lookup_enricher("no-such-enricher"), UnknownEnricher);
}

TEST_CASE("the table enricher fills absent fields and never overwrites") {
  TempDir tmp;
  fs::path sidecar = tmp.path / "sidecar.jsonl";
  {
    std::ofstream out(sidecar);
    out << "{\"source_id\":\"s\",\"object_id\":\"o\",\"fields\":"
           "{\"room\":\"kitchen\",\"value\":99.0}}\n";
  }
  auto table = make_table_enricher(sidecar);
  ThingRecord r;
  r.source_id = "s";
  r.object_id = "o";
  r.attributes["value"] = 3.5;
  ThingRecord e = table->enrich(r);
  CHECK(std::get<std::string>(e.attributes.at("room")) == "kitchen");
  CHECK(std::get<double>(e.attributes.at("value")) == 3.5);  // preserved

  ThingRecord other;
  other.source_id = "s";
  other.object_id = "unknown";
  CHECK(table->enrich(other) == other);
}

TEST_CASE("a single-round campaign persists exactly one snapshot") {
  Farm farm(mover_world(60), {source("a")});
  RoundConfig cfg;
  cfg.workers = 2;
  cfg.interval = 7200;
  cfg.sources = {farm.descriptor("a")};
  cfg.plan = make_grid(kRegion, 2, 2, 0.0);
  TempDir tmp;
  SnapshotStore store(tmp.path);
  SimClock clock(farm.world->config().start_time);
  auto summaries = run_campaign(cfg, 1, store, clock);
  REQUIRE(summaries.size() == 1);
  CHECK(store.list_rounds().size() == 1);
  CHECK(summaries[0].record_count == 60);
  CHECK_FALSE(summaries[0].next_queue.entries.empty());
}

TEST_CASE("campaign rounds advance the clock by the interval") {
  Farm farm(mover_world(40), {source("a")});
  RoundConfig cfg;
  cfg.workers = 2;
  cfg.interval = 3600;
  cfg.sources = {farm.descriptor("a")};
  cfg.plan = make_grid(kRegion, 2, 2, 0.0);
  TempDir tmp;
  SnapshotStore store(tmp.path);
  SimClock clock(1000000);
  auto summaries = run_campaign(cfg, 3, store, clock);
  REQUIRE(summaries.size() == 3);
  CHECK(summaries[0].round_timestamp == 1000000);
  CHECK(summaries[1].round_timestamp == 1003600);
  CHECK(summaries[2].round_timestamp == 1007200);
  CHECK(store.list_rounds() ==
        std::vector<Timestamp>{1000000, 1003600, 1007200});
}
