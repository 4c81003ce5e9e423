#include "thingcrawl/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

namespace thingcrawl {

using nlohmann::json;

Timestamp RemoteSimClock::now() {
  httplib::Client client(origin_);
  auto res = client.Get("/_time");
  if (!res || res->status != 200)
    throw SourceUnreachable("sim clock at " + origin_ + " unreachable");
  json j = json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("now"))
    throw ProtocolError("sim clock returned malformed time");
  auto t = parse_iso8601(j.at("now").get<std::string>());
  if (!t) throw ProtocolError("sim clock returned unparseable time");
  return *t;
}

void RemoteSimClock::advance(std::int64_t seconds) {
  httplib::Client client(origin_);
  auto res = client.Post("/_advance?seconds=" + std::to_string(seconds), "", "text/plain");
  if (!res || res->status != 200)
    throw SourceUnreachable("sim clock at " + origin_ + " refused advance");
}

namespace {

class NoopEnricher : public Enricher {
public:
  const std::string& name() const override {
    static const std::string n = "noop";
    return n;
  }
  ThingRecord enrich(const ThingRecord& r) const override { return r; }
};

class TableEnricher : public Enricher {
public:
  explicit TableEnricher(const std::filesystem::path& sidecar) {
    std::ifstream in(sidecar);
    if (!in) throw IoFailure("cannot open enricher sidecar " + sidecar.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("source_id") ||
          !j.contains("object_id") || !j.contains("fields"))
        continue;
      AttrMap fields;
      for (const auto& [k, v] : j.at("fields").items()) {
        if (v.is_string())
          fields.emplace(k, v.get<std::string>());
        else if (v.is_boolean())
          fields.emplace(k, v.get<bool>());
        else if (v.is_number_integer())
          fields.emplace(k, v.get<std::int64_t>());
        else if (v.is_number())
          fields.emplace(k, v.get<double>());
      }
      table_[j.at("source_id").get<std::string>() + "\x1f" +
             j.at("object_id").get<std::string>()] = std::move(fields);
    }
  }

  const std::string& name() const override {
    static const std::string n = "table";
    return n;
  }

  ThingRecord enrich(const ThingRecord& r) const override {
    auto it = table_.find(r.source_id + "\x1f" + r.object_id);
    if (it == table_.end()) return r;
    ThingRecord out = r;
    for (const auto& [k, v] : it->second)
      out.attributes.try_emplace(k, v);  // fill absent only
    return out;
  }

private:
  std::unordered_map<std::string, AttrMap> table_;
};

std::mutex g_registry_mu;
std::map<std::string, std::shared_ptr<Enricher>>& registry() {
  static std::map<std::string, std::shared_ptr<Enricher>> r{
      {"noop", std::make_shared<NoopEnricher>()}};
  return r;
}

}  // namespace

std::shared_ptr<Enricher> make_noop_enricher() {
  return std::make_shared<NoopEnricher>();
}

std::shared_ptr<Enricher> make_table_enricher(const std::filesystem::path& sidecar) {
  return std::make_shared<TableEnricher>(sidecar);
}

void register_enricher(std::shared_ptr<Enricher> e) {
  std::lock_guard lock(g_registry_mu);
  registry()[e->name()] = std::move(e);
}

std::shared_ptr<Enricher> lookup_enricher(const std::string& name) {
  std::lock_guard lock(g_registry_mu);
  auto it = registry().find(name);
  if (it == registry().end())
    throw UnknownEnricher("no enricher named " + name);
  return it->second;
}

RoundResult run_round(const RoundConfig& cfg, const ScanQueue& queue,
                      Clock& clock) {
  if (queue.entries.empty()) throw Error("scan queue is empty");
  if (cfg.workers < 1) throw Error("workers must be >= 1");

  const Timestamp round_start = clock.now();

  struct Task {
    std::size_t source;
    std::size_t entry;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < cfg.sources.size(); ++s)
    for (std::size_t e = 0; e < queue.entries.size(); ++e)
      tasks.push_back({s, e});

  struct TaskResult {
    std::vector<ThingRecord> records;
    bool failed = false;
    std::string error;
  };
  std::vector<TaskResult> results(tasks.size());

  // Workers pull tasks from a shared index; results land in per-task slots,
  // so merging below is independent of scheduling order.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      const SourceDescriptor& desc = cfg.sources[t.source];
      const SegmentIndex idx = queue.entries[t.entry];
      const Segment& seg = cfg.plan.at(idx.first, idx.second);
      try {
        FetchResult fr = fetch_segment_paged(desc, seg.fetch_bounds, desc.page_limit);
        results[i].records = refine(fr.records, round_start);
      } catch (const Error& e) {
        results[i].failed = true;
        results[i].error = e.what();
      }
    }
  };
  {
    std::vector<std::thread> pool;
    int n = std::min<int>(cfg.workers, static_cast<int>(tasks.size()));
    for (int w = 0; w < std::max(n, 1); ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  RoundResult out;
  out.snapshot.round_timestamp = round_start;

  std::vector<std::shared_ptr<Enricher>> enrichers;
  for (const auto& name : cfg.enrichers) enrichers.push_back(lookup_enricher(name));

  std::size_t failed_sources = 0;
  for (std::size_t s = 0; s < cfg.sources.size(); ++s) {
    const SourceDescriptor& desc = cfg.sources[s];

    // Hold-and-merge: a source contributes only when every one of its
    // segment fetches completed this round.
    bool source_failed = false;
    std::string first_error;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].source != s || !results[i].failed) continue;
      source_failed = true;
      if (first_error.empty()) first_error = results[i].error;
    }
    if (source_failed) {
      ++failed_sources;
      out.warnings.push_back(desc.source_id + ": skipped this round (" +
                             first_error + ")");
      continue;
    }

    // Dedup by object, keeping the latest observed_at; ties go to the
    // lexicographically smaller segment index.
    struct Pick {
      ThingRecord record;
      SegmentIndex segment;
    };
    std::map<std::string, Pick> picks;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].source != s) continue;
      const SegmentIndex idx = queue.entries[tasks[i].entry];
      for (const ThingRecord& raw : results[i].records) {
        ThingRecord r = raw;
        for (const auto& e : enrichers) r = e->enrich(r);
        auto [it, inserted] = picks.try_emplace(r.object_id, Pick{r, idx});
        if (inserted) continue;
        if (r.observed_at > it->second.record.observed_at ||
            (r.observed_at == it->second.record.observed_at &&
             idx < it->second.segment)) {
          it->second = Pick{std::move(r), idx};
        }
      }
    }
    for (auto& [_, pick] : picks)
      out.snapshot.records.push_back(std::move(pick.record));
    out.snapshot.source_ids.insert(desc.source_id);
  }

  if (!cfg.sources.empty() && failed_sources == cfg.sources.size())
    throw AllSourcesFailed("every configured source failed this round");
  return out;
}

std::vector<RoundSummary> run_campaign(const RoundConfig& cfg, int rounds,
                                       SnapshotStore& store, Clock& clock) {
  if (rounds < 1) throw Error("rounds must be >= 1");

  GridPlan plan = cfg.plan;
  ScanQueue queue = build_queue(plan, cfg.prune_threshold, cfg.revisit_every);

  std::vector<RoundSummary> summaries;
  for (int r = 0; r < rounds; ++r) {
    RoundConfig round_cfg = cfg;
    round_cfg.plan = plan;
    RoundResult res = run_round(round_cfg, queue, clock);

    RoundSummary sum;
    sum.round_timestamp = res.snapshot.round_timestamp;
    sum.record_count = static_cast<std::int64_t>(res.snapshot.records.size());
    sum.warnings = res.warnings;

    try {
      ManifestEntry entry = store.put_snapshot(res.snapshot);
      sum.per_source = entry.per_source;
    } catch (const Error& e) {
      throw StoreFailure(std::string("snapshot persistence failed: ") + e.what());
    }

    // Adaptive loop: next round's queue follows this round's density.
    DensityMatrix observed = density(res.snapshot, plan.region, plan.rows, plan.cols);
    plan = update_weights(plan, observed, cfg.query_density, cfg.alpha, cfg.beta);
    queue = build_queue(plan, cfg.prune_threshold, cfg.revisit_every);
    sum.next_queue = queue;
    summaries.push_back(std::move(sum));

    if (r + 1 < rounds) clock.advance(cfg.interval);
  }
  return summaries;
}

}  // namespace thingcrawl
