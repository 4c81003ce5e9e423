#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "thingcrawl/pipeline.hpp"
#include "thingcrawl/sim.hpp"

namespace thingcrawl {

// Minimal TOML reader covering what the config files use: comments, [table]
// and [[array-of-table]] headers (dotted names allowed), string / integer /
// float / boolean values, and flat arrays of scalars.
namespace toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<std::string, std::int64_t, double, bool, Array> data;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  const std::string& as_string() const;
  std::int64_t as_int() const;
  double as_double() const;  // accepts integers
  bool as_bool() const;
  const Array& as_array() const;
};

struct Table {
  std::map<std::string, Value> values;
  std::map<std::string, Table> tables;
  std::map<std::string, std::vector<Table>> arrays;

  bool has(const std::string& key) const { return values.contains(key); }
  const Value& get(const std::string& key) const;  // throws ConfigError

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

Table parse(const std::string& text);
Table parse_file(const std::filesystem::path& path);

}  // namespace toml

// Crawl config file: [grid], [sched], [round], [[sources]], [enrich].
struct CrawlConfig {
  BoundingBox region;
  int rows = 1;
  int cols = 1;
  double margin_fraction = 0.01;
  double alpha = 1.0;
  double beta = 1.0;
  double prune_threshold = 0.0;
  int revisit_every = 10;
  std::int64_t interval = 7200;
  int workers = 4;
  std::string sim_control;  // empty -> local simulated clock
  std::vector<SourceDescriptor> sources;
  std::vector<std::string> enrichers;
  std::string table_sidecar;

  RoundConfig to_round_config() const;
};

CrawlConfig load_crawl_config(const std::filesystem::path& path);

// World config file: [world], [[populations]], [[sim_sources]].
struct WorldFileConfig {
  WorldConfig world;
  std::vector<SimSourceSpec> sources;
};

WorldFileConfig load_world_config(const std::filesystem::path& path);

}  // namespace thingcrawl
