#include "thingcrawl/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <unordered_set>

#include <json.hpp>

#include "thingcrawl/store.hpp"

namespace thingcrawl {

using nlohmann::json;

std::vector<DriftScore> drift_series(const SnapshotStore& store, Timestamp t_1,
                                     const BoundingBox& region, int rows,
                                     int cols) {
  std::vector<Timestamp> rounds = store.list_rounds();
  if (std::find(rounds.begin(), rounds.end(), t_1) == rounds.end())
    throw UnknownRound("drift baseline round not stored");

  DensityMatrix d1 = density(store.get_snapshot(t_1), region, rows, cols);
  std::vector<DriftScore> series;
  for (Timestamp t : rounds) {
    if (t < t_1) continue;
    DensityMatrix di = density(store.get_snapshot(t), region, rows, cols);
    series.push_back(emd(d1, di));
  }
  return series;
}

UpdateRatioReport update_ratio(const Snapshot& d_i, const Snapshot& d_j) {
  if (d_j.round_timestamp <= d_i.round_timestamp)
    throw OrderViolation("update ratio requires j later than i");

  std::unordered_set<std::string> earlier;
  earlier.reserve(d_i.records.size());
  for (const auto& r : d_i.records) earlier.insert(record_to_json_line(r));

  std::int64_t new_rows = 0;
  for (const auto& r : d_j.records)
    if (!earlier.contains(record_to_json_line(r))) ++new_rows;

  UpdateRatioReport rep;
  rep.i_timestamp = d_i.round_timestamp;
  rep.j_timestamp = d_j.round_timestamp;
  rep.new_rows = new_rows;
  std::size_t denom = std::max(d_i.records.size(), d_j.records.size());
  rep.ratio = denom > 0 ? static_cast<double>(new_rows) / denom : 0.0;
  return rep;
}

std::map<std::string, double> inclusiveness(
    const std::map<std::string, std::set<std::string>>& id_sets) {
  std::set<std::string> all;
  for (const auto& [_, ids] : id_sets) all.insert(ids.begin(), ids.end());

  std::map<std::string, double> out;
  for (const auto& [source, ids] : id_sets)
    out[source] = all.empty()
        ? 0.0 : static_cast<double>(ids.size()) / static_cast<double>(all.size());
  return out;
}

namespace {

std::string normalize_keyword(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Query log values come in both string and numeric forms ("lat":"51.55").
bool json_number(const json& j, double& out) {
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

}  // namespace

QueryLogParse parse_query_log(std::istream& in) {
  QueryLogParse out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("timestamp") ||
        !j.contains("query") || !j.at("query").is_object()) {
      ++out.rejected_lines;
      continue;
    }
    QueryLogEntry e;
    std::optional<Timestamp> ts;
    if (j.at("timestamp").is_string())
      ts = parse_iso8601(j.at("timestamp").get<std::string>());
    else if (j.at("timestamp").is_number_integer())
      ts = j.at("timestamp").get<Timestamp>();
    if (!ts) {
      ++out.rejected_lines;
      continue;
    }
    e.timestamp = *ts;

    const json& q = j.at("query");
    double lat = 0.0, lng = 0.0, zoom = 0.0;
    if (!q.contains("lat") || !json_number(q.at("lat"), lat) ||
        !q.contains("lng") || !json_number(q.at("lng"), lng) ||
        lat < -90.0 || lat > 90.0 || lng < -180.0 || lng > 180.0) {
      ++out.rejected_lines;
      continue;
    }
    e.lat = lat;
    e.lng = lng;
    if (q.contains("zoom") && json_number(q.at("zoom"), zoom) && zoom >= 0)
      e.zoom = static_cast<int>(zoom);
    if (q.contains("what") && q.at("what").is_string())
      e.what = normalize_keyword(q.at("what").get<std::string>());
    out.entries.push_back(std::move(e));
  }
  return out;
}

std::map<std::string, std::string> load_category_map(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw BadCategoryMap("category map line " + std::to_string(lineno) +
                           " is not keyword<TAB>category");
    out[normalize_keyword(line.substr(0, tab))] =
        normalize_keyword(line.substr(tab + 1));
  }
  return out;
}

KeywordStats keyword_stats(const std::vector<QueryLogEntry>& entries,
                           const std::map<std::string, std::string>& categories,
                           std::size_t top_k) {
  KeywordStats stats;
  stats.total_queries = static_cast<std::int64_t>(entries.size());

  std::map<std::string, std::int64_t> freq;
  for (const auto& e : entries) {
    ++stats.per_day[utc_date(e.timestamp)];
    if (e.what.empty()) continue;
    ++stats.keyworded_queries;
    ++freq[e.what];
  }
  stats.keyworded_fraction = stats.total_queries > 0
      ? static_cast<double>(stats.keyworded_queries) / stats.total_queries
      : 0.0;
  if (freq.empty()) return stats;

  auto category_of = [&](const std::string& kw) {
    auto it = categories.find(kw);
    return it != categories.end() ? it->second : std::string("miscellaneous");
  };

  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  const double kw_total = static_cast<double>(stats.keyworded_queries);
  std::int64_t other = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& [kw, n] = ranked[k];
    stats.category_totals[category_of(kw)] += n;
    if (k < top_k)
      stats.rows.push_back({kw, n, category_of(kw), 100.0 * n / kw_total});
    else
      other += n;
  }
  if (other > 0)
    stats.rows.push_back({"other keywords", other, "", 100.0 * other / kw_total});
  return stats;
}

DensityMatrix query_density(const std::vector<QueryLogEntry>& entries,
                            const BoundingBox& region, int rows, int cols) {
  DensityMatrix m = make_density_matrix(region, rows, cols);
  for (const auto& e : entries) {
    auto [r, c] = cell_of(region, rows, cols, GeoPoint{e.lat, e.lng});
    if (r >= 0) ++m.at(r, c);
  }
  return m;
}

DriftScore gap_score(const DensityMatrix& things_density,
                     const DensityMatrix& queries_density) {
  return emd(things_density, queries_density);
}

}  // namespace thingcrawl
