#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thingcrawl/grid.hpp"
#include "thingcrawl/record.hpp"
#include "thingcrawl/source.hpp"
#include "thingcrawl/store.hpp"

namespace thingcrawl {

// Time source for round pacing. Simulated clocks advance instantly; a remote
// clock drives a simulator farm's control endpoint so crawler and world move
// together.
class Clock {
public:
  virtual ~Clock() = default;
  virtual Timestamp now() = 0;
  virtual void advance(std::int64_t seconds) = 0;
};

class SimClock : public Clock {
public:
  explicit SimClock(Timestamp start) : now_(start) {}
  Timestamp now() override { return now_; }
  void advance(std::int64_t seconds) override { now_ += seconds; }

private:
  Timestamp now_;
};

// Clock backed by a simulator's /_time and /_advance endpoints.
class RemoteSimClock : public Clock {
public:
  explicit RemoteSimClock(std::string origin) : origin_(std::move(origin)) {}
  Timestamp now() override;
  void advance(std::int64_t seconds) override;

private:
  std::string origin_;
};

// Fills absent fields only; never removes or overwrites populated ones.
class Enricher {
public:
  virtual ~Enricher() = default;
  virtual const std::string& name() const = 0;
  virtual ThingRecord enrich(const ThingRecord& r) const = 0;
};

std::shared_ptr<Enricher> make_noop_enricher();
// Sidecar: JSON-lines keyed by (source_id, object_id) with a "fields" object.
std::shared_ptr<Enricher> make_table_enricher(const std::filesystem::path& sidecar);

void register_enricher(std::shared_ptr<Enricher> e);
// Built-in "noop" is always available; throws UnknownEnricher otherwise.
std::shared_ptr<Enricher> lookup_enricher(const std::string& name);

struct RoundConfig {
  std::int64_t interval = 7200;  // seconds, simulated
  int workers = 1;
  std::vector<SourceDescriptor> sources;
  GridPlan plan;
  std::vector<std::string> enrichers;
  // adaptive scheduling knobs
  double alpha = 1.0;
  double beta = 1.0;
  double prune_threshold = 0.0;
  int revisit_every = 10;
  std::optional<DensityMatrix> query_density;
};

struct RoundResult {
  Snapshot snapshot;
  std::vector<std::string> warnings;  // per-source degradations
};

struct RoundSummary {
  Timestamp round_timestamp = 0;
  std::int64_t record_count = 0;
  std::map<std::string, std::int64_t> per_source;
  std::vector<std::string> warnings;
  ScanQueue next_queue;
};

// One crawl round: every queue entry is paged-fetched against every source's
// fetch bounds, refined, held per source until that source completes, merged,
// enriched, and deduplicated by (source_id, object_id) keeping the latest
// observed_at (ties broken by the smaller segment index).
RoundResult run_round(const RoundConfig& cfg, const ScanQueue& queue,
                      Clock& clock);

// Sequential rounds on the configured interval with the adaptive
// density-weighting loop; every snapshot is persisted.
std::vector<RoundSummary> run_campaign(const RoundConfig& cfg, int rounds,
                                       SnapshotStore& store, Clock& clock);

}  // namespace thingcrawl
