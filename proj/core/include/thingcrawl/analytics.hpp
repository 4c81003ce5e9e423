#pragma once

#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "thingcrawl/emd.hpp"
#include "thingcrawl/record.hpp"

namespace thingcrawl {

class SnapshotStore;

struct UpdateRatioReport {
  double ratio = 0.0;  // in [0, 1]
  Timestamp i_timestamp = 0;
  Timestamp j_timestamp = 0;
  std::int64_t new_rows = 0;
};

struct KeywordRow {
  std::string keyword;
  std::int64_t frequency = 0;
  std::string category;
  double percent = 0.0;  // of keyworded queries
};

struct KeywordStats {
  std::vector<KeywordRow> rows;  // descending frequency; last row aggregates
                                 // the remainder as "other keywords"
  std::int64_t total_queries = 0;
  std::int64_t keyworded_queries = 0;
  double keyworded_fraction = 0.0;
  std::map<std::string, std::int64_t> category_totals;
  std::map<std::string, std::int64_t> per_day;  // "YYYY-MM-DD" -> count
};

struct QueryLogParse {
  std::vector<QueryLogEntry> entries;
  std::int64_t rejected_lines = 0;
};

// EMD(d_1, d_i) for every stored round at or after t_1, in timestamp order.
// Densities are computed over the given region and grid.
std::vector<DriftScore> drift_series(const SnapshotStore& store, Timestamp t_1,
                                     const BoundingBox& region, int rows,
                                     int cols);

// Eq-style update ratio: a row is the full record tuple; new rows are those
// present in d_j and absent in d_i; ratio = |new| / max(|d_i|, |d_j|).
UpdateRatioReport update_ratio(const Snapshot& d_i, const Snapshot& d_j);

// Per-source share of the union of object ids. Empty union yields all zeros.
std::map<std::string, double> inclusiveness(
    const std::map<std::string, std::set<std::string>>& id_sets);

// Parses JSON-lines query records of the shape
// {"timestamp": ..., "query": {"lat": ..., "lng": ..., "zoom": ..., "what": ...}}.
// Values may be string or numeric; malformed lines are counted and skipped.
QueryLogParse parse_query_log(std::istream& in);

// Category map: lines "keyword<TAB>category". Unknown keywords map to
// "miscellaneous".
std::map<std::string, std::string> load_category_map(std::istream& in);

KeywordStats keyword_stats(const std::vector<QueryLogEntry>& entries,
                           const std::map<std::string, std::string>& categories,
                           std::size_t top_k = 24);

// Cell census of query coordinates over a grid.
DensityMatrix query_density(const std::vector<QueryLogEntry>& entries,
                            const BoundingBox& region, int rows, int cols);

// EMD between the things distribution and the query distribution.
DriftScore gap_score(const DensityMatrix& things_density,
                     const DensityMatrix& queries_density);

}  // namespace thingcrawl
