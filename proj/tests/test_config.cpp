#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "thingcrawl/config.hpp"

using namespace thingcrawl;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& text) {
    path = fs::temp_directory_path() /
           ("thingcrawl-cfg-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++) + ".toml");
    std::ofstream out(path);
    out << text;
  }
  ~TempFile() { fs::remove(path); }
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("scalar and array values parse with comments") {
  toml::Table t = toml::parse(
      "# header comment\n"
      "name = \"crawler\"  # trailing\n"
      "count = 42\n"
      "rate = 2.5\n"
      "on = true\n"
      "box = [1, 2.5, -3, 4]\n"
      "tags = [\"a\", \"b # not a comment\"]\n");
  CHECK(t.get("name").as_string() == "crawler");
  CHECK(t.get("count").as_int() == 42);
  CHECK(t.get("rate").as_double() == doctest::Approx(2.5));
  CHECK(t.get("on").as_bool());
  REQUIRE(t.get("box").as_array().size() == 4);
  CHECK(t.get("box").as_array()[1].as_double() == doctest::Approx(2.5));
  CHECK(t.get("tags").as_array()[1].as_string() == "b # not a comment");
}

TEST_CASE("tables, dotted headers, and arrays of tables") {
  toml::Table t = toml::parse(
      "[outer.inner]\n"
      "x = 1\n"
      "[[items]]\n"
      "id = \"first\"\n"
      "[[items]]\n"
      "id = \"second\"\n");
  CHECK(t.tables.at("outer").tables.at("inner").get("x").as_int() == 1);
  REQUIRE(t.arrays.at("items").size() == 2);
  CHECK(t.arrays.at("items")[1].get("id").as_string() == "second");
}

TEST_CASE("parse errors carry line numbers") {
  CHECK_THROWS_AS(toml::parse("just some words\n"), ConfigError);
  CHECK_THROWS_AS(toml::parse("x = \n"), ConfigError);
  CHECK_THROWS_AS(toml::parse("x = [1, 2\n"), ConfigError);
  CHECK_THROWS_AS(toml::parse("x = @bad\n"), ConfigError);
}

TEST_CASE("typed getters reject wrong types") {
  toml::Table t = toml::parse("x = 5\n");
  CHECK_THROWS_AS(t.get("x").as_string(), ConfigError);
  CHECK_THROWS_AS(t.get("x").as_bool(), ConfigError);
  CHECK(t.get("x").as_double() == 5.0);  // int widens to double
  CHECK_THROWS_AS(t.get("missing"), ConfigError);
}

TEST_CASE("crawl config loads sections and source defaults") {
  TempFile f(
      "[grid]\n"
      "region = [0.0, 0.0, 12.0, 12.0]\n"
      "rows = 4\n"
      "cols = 3\n"
      "margin_fraction = 0.02\n"
      "[sched]\n"
      "alpha = 2.0\n"
      "beta = 0.5\n"
      "prune_threshold = 0.1\n"
      "revisit_every = 7\n"
      "[round]\n"
      "interval = 3600\n"
      "workers = 6\n"
      "sim_control = \"http://127.0.0.1:9\"\n"
      "[[sources]]\n"
      "source_id = \"alpha\"\n"
      "base_url = \"http://127.0.0.1:9/alpha\"\n"
      "page_limit = 25\n"
      "[[sources]]\n"
      "source_id = \"beta\"\n"
      "base_url = \"http://127.0.0.1:9/beta\"\n"
      "field_object_id = [\"uuid\"]\n"
      "token = \"abc\"\n");
  CrawlConfig cfg = load_crawl_config(f.path);
  CHECK(cfg.region == BoundingBox{{0, 0}, {12, 12}});
  CHECK(cfg.rows == 4);
  CHECK(cfg.cols == 3);
  CHECK(cfg.margin_fraction == doctest::Approx(0.02));
  CHECK(cfg.alpha == 2.0);
  CHECK(cfg.beta == 0.5);
  CHECK(cfg.prune_threshold == doctest::Approx(0.1));
  CHECK(cfg.revisit_every == 7);
  CHECK(cfg.interval == 3600);
  CHECK(cfg.workers == 6);
  CHECK(cfg.sim_control == "http://127.0.0.1:9");
  REQUIRE(cfg.sources.size() == 2);
  CHECK(cfg.sources[0].page_limit == 25);
  CHECK(cfg.sources[0].field_map.at("object_id") ==
        std::vector<std::string>{"id"});
  CHECK(cfg.sources[1].field_map.at("object_id") ==
        std::vector<std::string>{"uuid"});
  CHECK(cfg.sources[1].auth_token == "abc");

  RoundConfig rc = cfg.to_round_config();
  CHECK(rc.plan.segments.size() == 12);
  CHECK(rc.workers == 6);
}

TEST_CASE("the token environment variable fills missing tokens") {
  TempFile f(
      "[grid]\n"
      "region = [0.0, 0.0, 1.0, 1.0]\n"
      "[[sources]]\n"
      "source_id = \"s\"\n"
      "base_url = \"http://127.0.0.1:9/s\"\n");
  setenv("THINGCRAWL_TOKEN", "from-env", 1);
  CrawlConfig cfg = load_crawl_config(f.path);
  unsetenv("THINGCRAWL_TOKEN");
  REQUIRE(cfg.sources.size() == 1);
  CHECK(cfg.sources[0].auth_token == "from-env");
}

TEST_CASE("crawl config requires a grid section") {
  TempFile f("[round]\nworkers = 2\n");
  CHECK_THROWS_AS(load_crawl_config(f.path), ConfigError);
}

TEST_CASE("world config loads populations and sources") {
  TempFile f(
      "[world]\n"
      "seed = 99\n"
      "region = [0.0, 0.0, 10.0, 10.0]\n"
      "tick = 1800\n"
      "start_time = \"2020-06-01T00:00:00Z\"\n"
      "[[populations]]\n"
      "kind = \"mover\"\n"
      "count = 10\n"
      "speed = 0.25\n"
      "[[populations]]\n"
      "kind = \"env_sensor\"\n"
      "count = 5\n"
      "update_probability = 0.2\n"
      "value_revert = true\n"
      "spawn = [1.0, 1.0, 2.0, 2.0]\n"
      "[[sim_sources]]\n"
      "source_id = \"m\"\n"
      "coverage = 0.5\n"
      "delay = 3600\n"
      "requires_token = true\n"
      "token = \"t\"\n");
  WorldFileConfig wf = load_world_config(f.path);
  CHECK(wf.world.seed == 99);
  CHECK(wf.world.tick == 1800);
  CHECK(wf.world.start_time == parse_iso8601("2020-06-01T00:00:00Z"));
  REQUIRE(wf.world.populations.size() == 2);
  CHECK(wf.world.populations[0].kind == PopulationSpec::Kind::mover);
  CHECK(wf.world.populations[1].value_revert);
  REQUIRE(wf.world.populations[1].spawn.has_value());
  REQUIRE(wf.sources.size() == 1);
  CHECK(wf.sources[0].coverage == 0.5);
  CHECK(wf.sources[0].delay == 3600);
  CHECK(wf.sources[0].requires_token);
}

TEST_CASE("world config validation errors") {
  TempFile bad_kind(
      "[world]\nregion = [0.0, 0.0, 1.0, 1.0]\n"
      "[[populations]]\nkind = \"ghost\"\n");
  CHECK_THROWS_AS(load_world_config(bad_kind.path), ConfigError);
  TempFile bad_cov(
      "[world]\nregion = [0.0, 0.0, 1.0, 1.0]\n"
      "[[sim_sources]]\nsource_id = \"s\"\ncoverage = 1.5\n");
  CHECK_THROWS_AS(load_world_config(bad_cov.path), ConfigError);
  TempFile bad_prob(
      "[world]\nregion = [0.0, 0.0, 1.0, 1.0]\n"
      "[[populations]]\nkind = \"env_sensor\"\nupdate_probability = 2.0\n");
  CHECK_THROWS_AS(load_world_config(bad_prob.path), ConfigError);
  CHECK_THROWS_AS(load_world_config("/no/such/file.toml"), ConfigError);
}
