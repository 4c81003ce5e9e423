#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thingcrawl/geo.hpp"
#include "thingcrawl/record.hpp"

namespace thingcrawl {

struct SourceDescriptor {
  std::string source_id;
  std::string base_url;
  int page_limit = 100;
  // canonical field -> candidate source field names, first present wins.
  // Must cover at least object_id, lat, lon.
  std::map<std::string, std::vector<std::string>> field_map;
  std::string category_tag = "webmapping";  // cloud | wot | webmapping [:subtype]
  std::optional<std::string> auth_token;
  double requests_per_second = 0.0;  // 0 = unlimited

  bool valid() const;
};

struct FetchResult {
  std::vector<ThingRecord> records;
  bool truncated = false;
  std::int64_t raw_count = 0;  // items received, including dropped ones
  Timestamp fetched_at = 0;
};

struct QualificationReport {
  bool parses = false;
  double valid_coords_fraction = 0.0;
  bool updates_observed = false;
  bool stable_ids = false;
  bool verdict = false;
};

// One raw payload captured from a candidate source.
struct QualificationSample {
  Timestamp captured_at = 0;
  std::string payload;
};

// Single wire-protocol request for the area; items failing the field map are
// dropped but still counted in raw_count.
FetchResult fetch_segment(const SourceDescriptor& desc, const BoundingBox& area,
                          int limit);

// Bisects the area alternately by longitude/latitude while the source reports
// truncation; results are deduplicated by object_id. Raises DepthExceeded
// when a still-truncated area is narrower than 1e-6 degrees on both axes.
FetchResult fetch_segment_paged(const SourceDescriptor& desc,
                                const BoundingBox& area, int limit);

// Drops records with invalid coordinates, missing object_id, or observed_at
// beyond now + 60 s skew. Order-preserving and idempotent.
std::vector<ThingRecord> refine(const std::vector<ThingRecord>& records,
                                Timestamp now);

// Screens a candidate source from recorded payload samples. theta is the
// minimum valid-coordinate fraction; id stability requires Jaccard overlap
// >= 0.5 between consecutive samples.
QualificationReport qualify(const std::vector<QualificationSample>& samples,
                            const SourceDescriptor& desc, double theta);

// Captures `polls` payloads from a live source at the given spacing (wall
// seconds) over the area, then qualifies them.
QualificationReport qualify_live(const SourceDescriptor& desc,
                                 const BoundingBox& area, int polls,
                                 double interval_seconds, double theta);

}  // namespace thingcrawl
