#include "thingcrawl/record.hpp"

#include <sstream>

#include <json.hpp>

namespace thingcrawl {

using nlohmann::json;

namespace {

json attr_to_json(const AttrValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

std::optional<AttrValue> attr_from_json(const json& j) {
  if (j.is_string()) return AttrValue(j.get<std::string>());
  if (j.is_boolean()) return AttrValue(j.get<bool>());
  if (j.is_number_integer()) return AttrValue(j.get<std::int64_t>());
  if (j.is_number()) return AttrValue(j.get<double>());
  return std::nullopt;
}

}  // namespace

std::string record_to_json_line(const ThingRecord& r) {
  json j;
  j["source_id"] = r.source_id;
  j["object_id"] = r.object_id;
  j["lat"] = r.position.latitude;
  j["lon"] = r.position.longitude;
  j["observed_at"] = format_iso8601(r.observed_at);
  json attrs = json::object();
  for (const auto& [k, v] : r.attributes) attrs[k] = attr_to_json(v);
  j["attributes"] = attrs;
  return j.dump();
}

std::optional<ThingRecord> record_from_json_line(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  ThingRecord r;
  try {
    r.source_id = j.at("source_id").get<std::string>();
    r.object_id = j.at("object_id").get<std::string>();
    r.position.latitude = j.at("lat").get<double>();
    r.position.longitude = j.at("lon").get<double>();
    auto t = parse_iso8601(j.at("observed_at").get<std::string>());
    if (!t) return std::nullopt;
    r.observed_at = *t;
    if (j.contains("attributes")) {
      for (const auto& [k, v] : j.at("attributes").items()) {
        auto a = attr_from_json(v);
        if (a) r.attributes.emplace(k, std::move(*a));
      }
    }
  } catch (const json::exception&) {
    return std::nullopt;
  }
  return r;
}

std::string snapshot_to_jsonl(const Snapshot& s) {
  std::ostringstream out;
  json header;
  header["round_timestamp"] = format_iso8601(s.round_timestamp);
  out << header.dump() << '\n';
  for (const auto& r : s.records) out << record_to_json_line(r) << '\n';
  return out.str();
}

Snapshot snapshot_from_jsonl(const std::string& text) {
  Snapshot s;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!have_header) {
      json h = json::parse(line, nullptr, false);
      if (h.is_discarded() || !h.contains("round_timestamp"))
        throw Error("snapshot header line missing round_timestamp");
      auto t = parse_iso8601(h.at("round_timestamp").get<std::string>());
      if (!t) throw Error("snapshot header has unparseable round_timestamp");
      s.round_timestamp = *t;
      have_header = true;
      continue;
    }
    auto r = record_from_json_line(line);
    if (r) {
      s.source_ids.insert(r->source_id);
      s.records.push_back(std::move(*r));
    }
  }
  if (!have_header) throw Error("snapshot text has no header line");
  return s;
}

}  // namespace thingcrawl
