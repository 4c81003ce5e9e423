#include "thingcrawl/source.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

namespace thingcrawl {

using nlohmann::json;

namespace {

constexpr double kBisectFloorDegrees = 1e-6;
constexpr int kMaxRetries = 3;

// Per-source request pacing. A process-wide registry keyed by source id so
// concurrent workers share one bucket per source.
class TokenBucket {
public:
  void pace(double requests_per_second) {
    if (requests_per_second <= 0.0) return;
    std::unique_lock lock(mu_);
    auto now = std::chrono::steady_clock::now();
    auto min_gap = std::chrono::duration<double>(1.0 / requests_per_second);
    auto earliest = last_ + std::chrono::duration_cast<
        std::chrono::steady_clock::duration>(min_gap);
    if (now < earliest) {
      lock.unlock();
      std::this_thread::sleep_until(earliest);
      lock.lock();
      now = std::chrono::steady_clock::now();
    }
    last_ = now;
  }

private:
  std::mutex mu_;
  std::chrono::steady_clock::time_point last_{};
};

TokenBucket& bucket_for(const std::string& source_id) {
  static std::mutex mu;
  static std::unordered_map<std::string, TokenBucket> buckets;
  std::lock_guard lock(mu);
  return buckets[source_id];
}

struct UrlParts {
  std::string origin;  // scheme://host:port
  std::string path;    // leading path prefix, possibly empty
};

UrlParts split_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw ProtocolError("base_url lacks a scheme: " + base_url);
  auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  return {base_url.substr(0, path_start), base_url.substr(path_start)};
}

std::string format_degrees(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool number_field(const json& j, double& out) {
  if (j.is_number()) {
    out = j.get<double>();
    return true;
  }
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end && *end == '\0';
  }
  return false;
}

const json* mapped_field(const json& item,
                         const std::map<std::string, std::vector<std::string>>& fm,
                         const std::string& canonical,
                         std::string* used_name = nullptr) {
  auto it = fm.find(canonical);
  if (it == fm.end()) return nullptr;
  for (const auto& name : it->second) {
    if (item.contains(name)) {
      if (used_name) *used_name = name;
      return &item.at(name);
    }
  }
  return nullptr;
}

std::optional<ThingRecord> parse_item(const json& item,
                                      const SourceDescriptor& desc,
                                      Timestamp server_time) {
  if (!item.is_object()) return std::nullopt;
  ThingRecord r;
  r.source_id = desc.source_id;

  std::set<std::string> consumed;
  std::string used;

  const json* id = mapped_field(item, desc.field_map, "object_id", &used);
  if (!id) return std::nullopt;
  consumed.insert(used);
  if (id->is_string())
    r.object_id = id->get<std::string>();
  else if (id->is_number_integer())
    r.object_id = std::to_string(id->get<std::int64_t>());
  else
    return std::nullopt;
  if (r.object_id.empty()) return std::nullopt;

  const json* lat = mapped_field(item, desc.field_map, "lat", &used);
  if (!lat || !number_field(*lat, r.position.latitude)) return std::nullopt;
  consumed.insert(used);
  const json* lon = mapped_field(item, desc.field_map, "lon", &used);
  if (!lon || !number_field(*lon, r.position.longitude)) return std::nullopt;
  consumed.insert(used);

  r.observed_at = server_time;
  if (const json* ts = mapped_field(item, desc.field_map, "observed_at", &used)) {
    consumed.insert(used);
    if (ts->is_string()) {
      auto t = parse_iso8601(ts->get<std::string>());
      if (!t) return std::nullopt;
      r.observed_at = *t;
    } else if (ts->is_number_integer()) {
      r.observed_at = ts->get<Timestamp>();
    } else {
      return std::nullopt;
    }
  }

  // Unknown attributes are preserved verbatim.
  for (const auto& [k, v] : item.items()) {
    if (consumed.contains(k)) continue;
    if (v.is_string())
      r.attributes.emplace(k, v.get<std::string>());
    else if (v.is_boolean())
      r.attributes.emplace(k, v.get<bool>());
    else if (v.is_number_integer())
      r.attributes.emplace(k, v.get<std::int64_t>());
    else if (v.is_number())
      r.attributes.emplace(k, v.get<double>());
  }
  return r;
}

std::string fetch_payload(const SourceDescriptor& desc, const BoundingBox& area,
                          int limit) {
  bucket_for(desc.source_id).pace(desc.requests_per_second);

  UrlParts url = split_url(desc.base_url);
  std::string path = url.path + "/things?min_lat=" +
      format_degrees(area.min_corner.latitude) +
      "&min_lon=" + format_degrees(area.min_corner.longitude) +
      "&max_lat=" + format_degrees(area.max_corner.latitude) +
      "&max_lon=" + format_degrees(area.max_corner.longitude) +
      "&limit=" + std::to_string(limit);
  if (desc.auth_token) path += "&token=" + *desc.auth_token;

  httplib::Client client(url.origin);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(30, 0);

  for (int attempt = 0;; ++attempt) {
    auto res = client.Get(path);
    if (!res)
      throw SourceUnreachable(desc.source_id + ": no response from " + url.origin);
    if (res->status == 401)
      throw AuthRejected(desc.source_id + ": authentication rejected");
    if (res->status == 429) {
      if (attempt >= kMaxRetries)
        throw SourceUnreachable(desc.source_id + ": still rate limited after retries");
      double delay = 0.2;
      if (res->has_header("Retry-After"))
        delay = std::atof(res->get_header_value("Retry-After").c_str());
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      continue;
    }
    if (res->status != 200)
      throw SourceUnreachable(desc.source_id + ": HTTP " +
                              std::to_string(res->status));
    return res->body;
  }
}

struct Envelope {
  Timestamp server_time = 0;
  bool truncated = false;
  json items;
};

Envelope parse_envelope(const std::string& body, const std::string& source_id) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("items") ||
      !j.at("items").is_array() || !j.contains("truncated"))
    throw ProtocolError(source_id + ": malformed payload envelope");
  Envelope env;
  env.truncated = j.at("truncated").get<bool>();
  if (j.contains("server_time") && j.at("server_time").is_string()) {
    auto t = parse_iso8601(j.at("server_time").get<std::string>());
    if (t) env.server_time = *t;
  }
  env.items = std::move(j.at("items"));
  return env;
}

}  // namespace

bool SourceDescriptor::valid() const {
  return !source_id.empty() && !base_url.empty() && page_limit >= 1 &&
         field_map.contains("object_id") && field_map.contains("lat") &&
         field_map.contains("lon");
}

FetchResult fetch_segment(const SourceDescriptor& desc, const BoundingBox& area,
                          int limit) {
  if (!desc.valid()) throw Error("invalid source descriptor " + desc.source_id);
  if (limit < 1) throw Error("fetch limit must be >= 1");

  Envelope env = parse_envelope(fetch_payload(desc, area, limit), desc.source_id);
  FetchResult out;
  out.truncated = env.truncated;
  out.fetched_at = env.server_time;
  out.raw_count = static_cast<std::int64_t>(env.items.size());
  for (const auto& item : env.items) {
    auto r = parse_item(item, desc, env.server_time);
    if (r) out.records.push_back(std::move(*r));
  }
  return out;
}

namespace {

void fetch_paged_into(const SourceDescriptor& desc, const BoundingBox& area,
                      int limit, bool split_lon, FetchResult& out,
                      std::unordered_set<std::string>& seen) {
  FetchResult page = fetch_segment(desc, area, limit);
  out.raw_count += page.raw_count;
  if (out.fetched_at == 0) out.fetched_at = page.fetched_at;

  if (!page.truncated) {
    for (auto& r : page.records)
      if (seen.insert(r.object_id).second) out.records.push_back(std::move(r));
    return;
  }

  bool can_lon = area.lon_span() >= kBisectFloorDegrees;
  bool can_lat = area.lat_span() >= kBisectFloorDegrees;
  if (!can_lon && !can_lat)
    throw DepthExceeded(desc.source_id +
                        ": area at bisection floor is still truncated");
  bool by_lon = split_lon ? can_lon : !can_lat ? true : false;

  if (by_lon) {
    double mid = area.min_corner.longitude + area.lon_span() / 2.0;
    BoundingBox left{area.min_corner, {area.max_corner.latitude, mid}};
    BoundingBox right{{area.min_corner.latitude, mid}, area.max_corner};
    fetch_paged_into(desc, left, limit, false, out, seen);
    fetch_paged_into(desc, right, limit, false, out, seen);
  } else {
    double mid = area.min_corner.latitude + area.lat_span() / 2.0;
    BoundingBox lower{area.min_corner, {mid, area.max_corner.longitude}};
    BoundingBox upper{{mid, area.min_corner.longitude}, area.max_corner};
    fetch_paged_into(desc, lower, limit, true, out, seen);
    fetch_paged_into(desc, upper, limit, true, out, seen);
  }
}

}  // namespace

FetchResult fetch_segment_paged(const SourceDescriptor& desc,
                                const BoundingBox& area, int limit) {
  FetchResult out;
  std::unordered_set<std::string> seen;
  fetch_paged_into(desc, area, limit, true, out, seen);
  out.truncated = false;
  return out;
}

std::vector<ThingRecord> refine(const std::vector<ThingRecord>& records,
                                Timestamp now) {
  std::vector<ThingRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.object_id.empty()) continue;
    if (!validate_point(r.position)) continue;
    if (r.observed_at > now + 60) continue;  // future reading beyond skew
    out.push_back(r);
  }
  return out;
}

QualificationReport qualify(const std::vector<QualificationSample>& samples,
                            const SourceDescriptor& desc, double theta) {
  if (samples.size() < 2)
    throw InsufficientSamples("qualification needs at least two samples");
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].captured_at <= samples[i - 1].captured_at)
      throw InsufficientSamples("sample timestamps must be strictly increasing");

  QualificationReport rep;
  rep.parses = true;

  // Per sample: object id set and the full item text per id.
  std::vector<std::map<std::string, std::string>> by_id(samples.size());
  std::int64_t total_items = 0, valid_coords = 0;

  for (std::size_t i = 0; i < samples.size(); ++i) {
    json j = json::parse(samples[i].payload, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("items") ||
        !j.at("items").is_array()) {
      rep.parses = false;
      continue;
    }
    for (const auto& item : j.at("items")) {
      if (!item.is_object()) {
        rep.parses = false;
        continue;
      }
      ++total_items;
      double lat, lon;
      const json* latf = mapped_field(item, desc.field_map, "lat");
      const json* lonf = mapped_field(item, desc.field_map, "lon");
      if (latf && lonf && number_field(*latf, lat) && number_field(*lonf, lon) &&
          validate_point(GeoPoint{lat, lon}))
        ++valid_coords;
      if (const json* id = mapped_field(item, desc.field_map, "object_id"))
        if (id->is_string()) by_id[i][id->get<std::string>()] = item.dump();
    }
  }

  rep.valid_coords_fraction = total_items > 0
      ? static_cast<double>(valid_coords) / static_cast<double>(total_items)
      : 0.0;

  rep.stable_ids = true;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& prev = by_id[i - 1];
    const auto& cur = by_id[i];
    std::size_t shared = 0;
    for (const auto& [id, text] : cur) {
      auto it = prev.find(id);
      if (it == prev.end()) continue;
      ++shared;
      if (it->second != text) rep.updates_observed = true;
    }
    std::size_t uni = prev.size() + cur.size() - shared;
    double jaccard = uni > 0 ? static_cast<double>(shared) / uni : 1.0;
    if (jaccard < 0.5) rep.stable_ids = false;
  }

  rep.verdict = rep.parses && rep.valid_coords_fraction >= theta &&
                rep.updates_observed && rep.stable_ids;
  return rep;
}

QualificationReport qualify_live(const SourceDescriptor& desc,
                                 const BoundingBox& area, int polls,
                                 double interval_seconds, double theta) {
  if (polls < 2) throw InsufficientSamples("need at least two polls");
  std::vector<QualificationSample> samples;
  for (int i = 0; i < polls; ++i) {
    if (i > 0 && interval_seconds > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(interval_seconds));
    QualificationSample s;
    s.captured_at = static_cast<Timestamp>(samples.size());
    s.payload = fetch_payload(desc, area, desc.page_limit);
    samples.push_back(std::move(s));
  }
  // capture indices stand in for wall timestamps; strictly increasing
  return qualify(samples, desc, theta);
}

}  // namespace thingcrawl
