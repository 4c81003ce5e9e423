#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "thingcrawl/density.hpp"
#include "thingcrawl/record.hpp"

namespace thingcrawl {

struct ManifestEntry {
  Timestamp round_timestamp = 0;
  std::int64_t record_count = 0;
  std::int64_t byte_count = 0;
  std::map<std::string, std::int64_t> per_source;  // source_id -> record count
};

// Append-only file store: rounds/{timestamp}/{source_id}.jsonl plus a
// manifest.jsonl with one line per round. Files become immutable after an
// atomic write-temp-then-rename, so concurrent readers are always safe.
class SnapshotStore {
public:
  explicit SnapshotStore(std::filesystem::path root);

  // Round timestamps must be strictly increasing across puts.
  ManifestEntry put_snapshot(const Snapshot& s);

  Snapshot get_snapshot(Timestamp t) const;
  std::vector<Timestamp> list_rounds() const;
  std::vector<ManifestEntry> manifest() const;

  // Each object's record with the maximum observed_at across all rounds.
  std::map<std::string, ThingRecord> latest_per_object(
      const std::string& source_id) const;

  // Writes the round's cell census as CSV and a max-normalized 8-bit PGM.
  DensityMatrix export_density(Timestamp t, const BoundingBox& region, int rows,
                               int cols, const std::filesystem::path& csv_path,
                               const std::filesystem::path& pgm_path) const;

  const std::filesystem::path& root() const { return root_; }

private:
  std::filesystem::path round_dir(Timestamp t) const;

  std::filesystem::path root_;
};

}  // namespace thingcrawl
