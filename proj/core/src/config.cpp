#include "thingcrawl/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace thingcrawl {

namespace toml {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a trailing comment, honoring quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (c == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

Value parse_scalar(const std::string& raw, int lineno);

Value parse_array(const std::string& raw, int lineno) {
  Array items;
  std::string body = trim(raw.substr(1, raw.size() - 2));
  std::string cur;
  bool in_str = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_str = !in_str;
    if (c == ',' && !in_str) {
      if (!trim(cur).empty()) items.push_back(parse_scalar(trim(cur), lineno));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(parse_scalar(trim(cur), lineno));
  return Value{std::move(items)};
}

Value parse_scalar(const std::string& raw, int lineno) {
  if (raw.empty())
    throw ConfigError("line " + std::to_string(lineno) + ": empty value");
  if (raw.front() == '[') {
    if (raw.back() != ']')
      throw ConfigError("line " + std::to_string(lineno) + ": unterminated array");
    return parse_array(raw, lineno);
  }
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      throw ConfigError("line " + std::to_string(lineno) + ": unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        char n = raw[++i];
        if (n == 'n') out += '\n';
        else if (n == 't') out += '\t';
        else out += n;
      } else {
        out += raw[i];
      }
    }
    return Value{std::move(out)};
  }
  if (raw == "true") return Value{true};
  if (raw == "false") return Value{false};
  // numeric
  char* end = nullptr;
  if (raw.find_first_of(".eE") == std::string::npos) {
    long long i = std::strtoll(raw.c_str(), &end, 10);
    if (end && *end == '\0') return Value{static_cast<std::int64_t>(i)};
  }
  double d = std::strtod(raw.c_str(), &end);
  if (end && *end == '\0') return Value{d};
  throw ConfigError("line " + std::to_string(lineno) + ": cannot parse value '" +
                    raw + "'");
}

Table* descend(Table& root, const std::string& dotted, int lineno) {
  Table* cur = &root;
  std::istringstream parts(dotted);
  std::string name;
  while (std::getline(parts, name, '.')) {
    name = trim(name);
    if (name.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": bad table name");
    cur = &cur->tables[name];
  }
  return cur;
}

}  // namespace

const std::string& Value::as_string() const {
  if (!is_string()) throw ConfigError("expected a string value");
  return std::get<std::string>(data);
}

std::int64_t Value::as_int() const {
  if (std::holds_alternative<std::int64_t>(data)) return std::get<std::int64_t>(data);
  throw ConfigError("expected an integer value");
}

double Value::as_double() const {
  if (std::holds_alternative<double>(data)) return std::get<double>(data);
  if (std::holds_alternative<std::int64_t>(data))
    return static_cast<double>(std::get<std::int64_t>(data));
  throw ConfigError("expected a numeric value");
}

bool Value::as_bool() const {
  if (std::holds_alternative<bool>(data)) return std::get<bool>(data);
  throw ConfigError("expected a boolean value");
}

const Array& Value::as_array() const {
  if (std::holds_alternative<Array>(data)) return std::get<Array>(data);
  throw ConfigError("expected an array value");
}

const Value& Table::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string Table::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second.as_string();
}

std::int64_t Table::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second.as_int();
}

double Table::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second.as_double();
}

bool Table::get_bool(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second.as_bool();
}

Table parse(const std::string& text) {
  Table root;
  Table* current = &root;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.size() >= 4 && line.substr(0, 2) == "[[" &&
        line.substr(line.size() - 2) == "]]") {
      std::string name = trim(line.substr(2, line.size() - 4));
      auto dot = name.rfind('.');
      Table* parent = &root;
      std::string leaf = name;
      if (dot != std::string::npos) {
        parent = descend(root, name.substr(0, dot), lineno);
        leaf = trim(name.substr(dot + 1));
      }
      parent->arrays[leaf].emplace_back();
      current = &parent->arrays[leaf].back();
      continue;
    }
    if (line.front() == '[' && line.back() == ']') {
      current = descend(root, trim(line.substr(1, line.size() - 2)), lineno);
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    current->values[key] = parse_scalar(value, lineno);
  }
  return root;
}

Table parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace toml

namespace {

BoundingBox box_from_array(const toml::Array& a, const std::string& what) {
  if (a.size() != 4)
    throw ConfigError(what + " must be [min_lat, min_lon, max_lat, max_lon]");
  return BoundingBox{{a[0].as_double(), a[1].as_double()},
                     {a[2].as_double(), a[3].as_double()}};
}

std::vector<std::string> names_from(const toml::Table& t, const std::string& key,
                                    std::vector<std::string> fallback) {
  auto it = t.values.find(key);
  if (it == t.values.end()) return fallback;
  std::vector<std::string> out;
  for (const auto& v : it->second.as_array()) out.push_back(v.as_string());
  return out;
}

}  // namespace

CrawlConfig load_crawl_config(const std::filesystem::path& path) {
  toml::Table root = toml::parse_file(path);
  CrawlConfig cfg;

  auto grid_it = root.tables.find("grid");
  if (grid_it == root.tables.end())
    throw ConfigError("crawl config needs a [grid] section");
  const toml::Table& grid = grid_it->second;
  cfg.region = box_from_array(grid.get("region").as_array(), "grid.region");
  cfg.rows = static_cast<int>(grid.get_int("rows", 1));
  cfg.cols = static_cast<int>(grid.get_int("cols", 1));
  cfg.margin_fraction = grid.get_double("margin_fraction", 0.01);

  if (auto it = root.tables.find("sched"); it != root.tables.end()) {
    cfg.alpha = it->second.get_double("alpha", 1.0);
    cfg.beta = it->second.get_double("beta", 1.0);
    cfg.prune_threshold = it->second.get_double("prune_threshold", 0.0);
    cfg.revisit_every = static_cast<int>(it->second.get_int("revisit_every", 10));
  }
  if (auto it = root.tables.find("round"); it != root.tables.end()) {
    cfg.interval = it->second.get_int("interval", 7200);
    cfg.workers = static_cast<int>(it->second.get_int("workers", 4));
    cfg.sim_control = it->second.get_string("sim_control", "");
  }
  if (auto it = root.tables.find("enrich"); it != root.tables.end()) {
    cfg.enrichers = names_from(it->second, "names", {});
    cfg.table_sidecar = it->second.get_string("table_sidecar", "");
  }

  const char* env_token = std::getenv("THINGCRAWL_TOKEN");
  auto src_it = root.arrays.find("sources");
  if (src_it != root.arrays.end()) {
    for (const toml::Table& t : src_it->second) {
      SourceDescriptor d;
      d.source_id = t.get("source_id").as_string();
      d.base_url = t.get("base_url").as_string();
      d.page_limit = static_cast<int>(t.get_int("page_limit", 100));
      d.category_tag = t.get_string("category", "webmapping");
      d.requests_per_second = t.get_double("rate_limit", 0.0);
      if (t.has("token"))
        d.auth_token = t.get("token").as_string();
      else if (env_token && *env_token)
        d.auth_token = env_token;
      d.field_map["object_id"] = names_from(t, "field_object_id", {"id"});
      d.field_map["lat"] = names_from(t, "field_lat", {"latitude", "lat"});
      d.field_map["lon"] = names_from(t, "field_lon", {"longitude", "lon", "lng"});
      d.field_map["observed_at"] = names_from(t, "field_observed_at", {"updated"});
      cfg.sources.push_back(std::move(d));
    }
  }
  return cfg;
}

RoundConfig CrawlConfig::to_round_config() const {
  RoundConfig rc;
  rc.interval = interval;
  rc.workers = workers;
  rc.sources = sources;
  rc.plan = make_grid(region, rows, cols, margin_fraction);
  rc.enrichers = enrichers;
  rc.alpha = alpha;
  rc.beta = beta;
  rc.prune_threshold = prune_threshold;
  rc.revisit_every = revisit_every;
  return rc;
}

WorldFileConfig load_world_config(const std::filesystem::path& path) {
  toml::Table root = toml::parse_file(path);
  WorldFileConfig out;

  auto world_it = root.tables.find("world");
  if (world_it == root.tables.end())
    throw ConfigError("world config needs a [world] section");
  const toml::Table& w = world_it->second;
  out.world.seed = static_cast<std::uint64_t>(w.get_int("seed", 0));
  out.world.region = box_from_array(w.get("region").as_array(), "world.region");
  out.world.tick = w.get_int("tick", 3600);
  if (w.has("start_time")) {
    const toml::Value& v = w.get("start_time");
    if (v.is_string()) {
      auto t = parse_iso8601(v.as_string());
      if (!t) throw ConfigError("world.start_time is not ISO-8601");
      out.world.start_time = *t;
    } else {
      out.world.start_time = v.as_int();
    }
  }

  if (auto it = root.arrays.find("populations"); it != root.arrays.end()) {
    for (const toml::Table& t : it->second) {
      PopulationSpec p;
      std::string kind = t.get_string("kind", "env_sensor");
      if (kind == "mover")
        p.kind = PopulationSpec::Kind::mover;
      else if (kind == "env_sensor")
        p.kind = PopulationSpec::Kind::env_sensor;
      else
        throw ConfigError("unknown population kind '" + kind + "'");
      p.count = static_cast<int>(t.get_int("count", 0));
      p.speed = t.get_double("speed", 0.0);
      p.update_period = t.get_int("update_period", 21600);
      p.update_probability = t.get_double("update_probability", 0.0);
      if (p.update_probability < 0.0 || p.update_probability > 1.0)
        throw ConfigError("update_probability must be in [0, 1]");
      p.value_revert = t.get_bool("value_revert", false);
      if (t.has("spawn"))
        p.spawn = box_from_array(t.get("spawn").as_array(), "population spawn");
      out.world.populations.push_back(std::move(p));
    }
  }

  if (auto it = root.arrays.find("sim_sources"); it != root.arrays.end()) {
    for (const toml::Table& t : it->second) {
      SimSourceSpec s;
      s.source_id = t.get("source_id").as_string();
      s.coverage = t.get_double("coverage", 1.0);
      if (!(s.coverage > 0.0 && s.coverage <= 1.0))
        throw ConfigError("coverage must be in (0, 1]");
      s.delay = t.get_int("delay", 0);
      s.dropout = t.get_double("dropout", 0.0);
      s.page_limit = static_cast<int>(t.get_int("page_limit", 100));
      s.requires_token = t.get_bool("requires_token", false);
      s.token = t.get_string("token", "secret");
      out.sources.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace thingcrawl
