#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "thingcrawl/geo.hpp"
#include "thingcrawl/timeutil.hpp"

namespace thingcrawl {

// Scalar-or-string attribute value.
using AttrValue = std::variant<std::string, double, std::int64_t, bool>;
using AttrMap = std::map<std::string, AttrValue>;

// One observed object reading from one source.
struct ThingRecord {
  std::string source_id;
  std::string object_id;
  GeoPoint position;
  Timestamp observed_at = 0;
  AttrMap attributes;

  bool operator==(const ThingRecord&) const = default;
  auto operator<=>(const ThingRecord&) const = default;
};

// The set of records captured in one crawl round.
struct Snapshot {
  Timestamp round_timestamp = 0;
  std::vector<ThingRecord> records;
  std::set<std::string> source_ids;
};

// One search query from a query log.
struct QueryLogEntry {
  Timestamp timestamp = 0;
  double lat = 0.0;
  double lng = 0.0;
  int zoom = 0;
  std::string what;  // trimmed, lowercased; empty when absent

  bool operator==(const QueryLogEntry&) const = default;
};

// JSON-lines serialization. Field names: source_id, object_id, lat, lon,
// observed_at (ISO-8601 UTC), attributes.
std::string record_to_json_line(const ThingRecord& r);
std::optional<ThingRecord> record_from_json_line(const std::string& line);

// Snapshot file: header line {"round_timestamp": ...} followed by record lines.
std::string snapshot_to_jsonl(const Snapshot& s);
Snapshot snapshot_from_jsonl(const std::string& text);

}  // namespace thingcrawl
