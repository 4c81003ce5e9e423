#include "thingcrawl/store.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace thingcrawl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void atomic_write(const fs::path& target, const std::string& data) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoFailure("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoFailure("rename to " + target.string() + ": " + ec.message());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

SnapshotStore::SnapshotStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "rounds", ec);
  if (ec) throw IoFailure("cannot create store at " + root_.string());
}

fs::path SnapshotStore::round_dir(Timestamp t) const {
  return root_ / "rounds" / format_compact(t);
}

std::vector<ManifestEntry> SnapshotStore::manifest() const {
  std::vector<ManifestEntry> entries;
  fs::path mf = root_ / "manifest.jsonl";
  if (!fs::exists(mf)) return entries;
  std::ifstream in(mf);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoFailure("corrupt manifest line");
    ManifestEntry e;
    auto t = parse_iso8601(j.at("round_timestamp").get<std::string>());
    if (!t) throw IoFailure("corrupt manifest timestamp");
    e.round_timestamp = *t;
    e.record_count = j.at("records").get<std::int64_t>();
    e.byte_count = j.at("bytes").get<std::int64_t>();
    for (const auto& [k, v] : j.at("sources").items())
      e.per_source[k] = v.get<std::int64_t>();
    entries.push_back(std::move(e));
  }
  return entries;
}

ManifestEntry SnapshotStore::put_snapshot(const Snapshot& s) {
  auto existing = manifest();
  if (!existing.empty() &&
      s.round_timestamp <= existing.back().round_timestamp)
    throw OutOfOrderRound("round " + format_iso8601(s.round_timestamp) +
                          " is not later than the last stored round");

  // Partition by source, keep per-source line order stable.
  std::map<std::string, std::string> files;
  std::map<std::string, std::int64_t> counts;
  for (const auto& r : s.records) {
    files[r.source_id] += record_to_json_line(r) + "\n";
    ++counts[r.source_id];
  }

  ManifestEntry entry;
  entry.round_timestamp = s.round_timestamp;
  entry.record_count = static_cast<std::int64_t>(s.records.size());
  entry.per_source = counts;

  if (!files.empty()) {
    fs::path dir = round_dir(s.round_timestamp);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create " + dir.string());
    for (const auto& [source, data] : files) {
      atomic_write(dir / (source + ".jsonl"), data);
      entry.byte_count += static_cast<std::int64_t>(data.size());
    }
  }

  json j;
  j["round_timestamp"] = format_iso8601(entry.round_timestamp);
  j["records"] = entry.record_count;
  j["bytes"] = entry.byte_count;
  j["sources"] = json::object();
  for (const auto& [k, v] : entry.per_source) j["sources"][k] = v;

  std::ofstream mf(root_ / "manifest.jsonl", std::ios::app);
  if (!mf) throw IoFailure("cannot append to manifest");
  mf << j.dump() << '\n';
  if (!mf) throw IoFailure("short write to manifest");
  return entry;
}

std::vector<Timestamp> SnapshotStore::list_rounds() const {
  std::vector<Timestamp> out;
  for (const auto& e : manifest()) out.push_back(e.round_timestamp);
  return out;
}

Snapshot SnapshotStore::get_snapshot(Timestamp t) const {
  auto entries = manifest();
  const ManifestEntry* found = nullptr;
  for (const auto& e : entries)
    if (e.round_timestamp == t) found = &e;
  if (!found) throw UnknownRound("no stored round at " + format_iso8601(t));

  Snapshot s;
  s.round_timestamp = t;
  for (const auto& [source, _] : found->per_source) {
    std::istringstream in(read_file(round_dir(t) / (source + ".jsonl")));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto r = record_from_json_line(line);
      if (!r) throw IoFailure("corrupt record line in round " + format_iso8601(t));
      s.records.push_back(std::move(*r));
    }
    s.source_ids.insert(source);
  }
  return s;
}

std::map<std::string, ThingRecord> SnapshotStore::latest_per_object(
    const std::string& source_id) const {
  std::map<std::string, ThingRecord> latest;
  for (const auto& e : manifest()) {
    auto it = e.per_source.find(source_id);
    if (it == e.per_source.end()) continue;
    fs::path file = round_dir(e.round_timestamp) / (source_id + ".jsonl");
    std::istringstream in(read_file(file));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto r = record_from_json_line(line);
      if (!r) continue;
      auto [pos, inserted] = latest.try_emplace(r->object_id, *r);
      if (!inserted && r->observed_at >= pos->second.observed_at)
        pos->second = *r;
    }
  }
  return latest;
}

DensityMatrix SnapshotStore::export_density(
    Timestamp t, const BoundingBox& region, int rows, int cols,
    const fs::path& csv_path, const fs::path& pgm_path) const {
  DensityMatrix m = density(get_snapshot(t), region, rows, cols);
  if (!csv_path.empty()) atomic_write(csv_path, density_to_csv(m));
  if (!pgm_path.empty()) atomic_write(pgm_path, density_to_pgm(m));
  return m;
}

}  // namespace thingcrawl
