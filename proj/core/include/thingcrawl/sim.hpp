#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "thingcrawl/density.hpp"
#include "thingcrawl/geo.hpp"
#include "thingcrawl/record.hpp"

namespace thingcrawl {

struct PopulationSpec {
  enum class Kind { mover, env_sensor };
  Kind kind = Kind::env_sensor;
  int count = 0;
  // Movers: per-axis degrees per tick along a seeded diagonal heading,
  // reflecting at the region edges.
  double speed = 0.0;
  // Env sensors: one value-change opportunity per elapsed update_period
  // (seconds), taken with probability update_probability. With value_revert
  // the deviated reading drops back to the initial tuple within each
  // 24-simulated-hour cycle.
  std::int64_t update_period = 21600;
  double update_probability = 0.0;
  bool value_revert = false;
  // Placement box; defaults to the whole region.
  std::optional<BoundingBox> spawn;
};

struct SimSourceSpec {
  std::string source_id;
  double coverage = 1.0;      // fraction of objects visible, exact-count seeded
  std::int64_t delay = 0;     // simulated seconds behind the world clock
  double dropout = 0.0;       // per-request per-attribute drop probability
  int page_limit = 100;
  bool requires_token = false;
  std::string token = "secret";
};

struct WorldConfig {
  std::uint64_t seed = 0;
  BoundingBox region;
  std::vector<PopulationSpec> populations;
  std::int64_t tick = 3600;                 // simulated seconds per tick
  Timestamp start_time = 1577836800;        // 2020-01-01T00:00:00Z
};

// One object's reading at a point in simulated time.
struct SimReading {
  std::string object_id;
  GeoPoint position;
  Timestamp observed_at = 0;
  AttrMap attributes;
};

// Deterministic simulated world: the full trajectory is a pure function of
// the config, so any past state can be reconstructed (mirror delay replay).
class World {
public:
  explicit World(WorldConfig cfg);

  const WorldConfig& config() const { return cfg_; }
  Timestamp now() const { return now_; }
  std::size_t object_count() const { return objects_.size(); }

  void advance_ticks(std::int64_t ticks);
  void advance_seconds(std::int64_t seconds);

  std::vector<SimReading> state_at(Timestamp t) const;

  // Oracle surfaces.
  DensityMatrix ground_truth(const BoundingBox& region, int rows,
                             int cols) const;
  std::map<std::string, std::set<std::string>> ground_truth_ids(
      const std::vector<SimSourceSpec>& sources) const;
  std::set<std::string> visible_ids(const SimSourceSpec& source) const;

private:
  struct SimObject {
    std::string id;
    PopulationSpec::Kind kind;
    GeoPoint origin;
    double heading_lat = 0.0;  // +-1
    double heading_lon = 0.0;
    double speed = 0.0;        // degrees per tick, per axis
    double initial_value = 0.0;
    std::int64_t update_period = 0;
    double update_probability = 0.0;
    bool value_revert = false;
    std::uint64_t key = 0;  // seeded identity for stateless randomness
  };

  SimReading reading_at(const SimObject& o, Timestamp t) const;

  WorldConfig cfg_;
  std::vector<SimObject> objects_;
  Timestamp now_;
};

// HTTP farm implementing the spatial wire protocol at
// /{source_id}/things?min_lat=&min_lon=&max_lat=&max_lon=&limit=[&token=],
// plus control endpoints GET /_time and POST /_advance?seconds=N.
class SimServer {
public:
  SimServer(std::shared_ptr<World> world, std::vector<SimSourceSpec> sources);
  ~SimServer();

  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  // Starts serving on a background thread. port 0 picks a free port.
  // Returns the bound port. Throws AddressInUse when binding fails.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop() is invoked elsewhere.
  void run(const std::string& host, int port);
  void stop();

  std::shared_ptr<World> world() { return world_; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<World> world_;
};

}  // namespace thingcrawl
