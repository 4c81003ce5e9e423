#include "thingcrawl/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace thingcrawl {

using nlohmann::json;

namespace {

constexpr std::int64_t kRevertCycle = 86400;  // 24 simulated hours

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

double unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::uint64_t str_key(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

// Triangle-wave reflection of a coordinate into [lo, hi].
double fold(double x, double lo, double hi) {
  double span = hi - lo;
  if (span <= 0.0) return lo;
  double t = std::fmod(x - lo, 2.0 * span);
  if (t < 0.0) t += 2.0 * span;
  return lo + (t <= span ? t : 2.0 * span - t);
}

}  // namespace

World::World(WorldConfig cfg) : cfg_(std::move(cfg)), now_(cfg_.start_time) {
  for (std::size_t pi = 0; pi < cfg_.populations.size(); ++pi) {
    const PopulationSpec& p = cfg_.populations[pi];
    BoundingBox spawn = p.spawn.value_or(cfg_.region);
    for (int i = 0; i < p.count; ++i) {
      SimObject o;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "p%zu-%05d", pi, i);
      o.id = buf;
      o.kind = p.kind;
      o.key = mix(cfg_.seed, mix(pi + 1, static_cast<std::uint64_t>(i)));
      o.origin.latitude = spawn.min_corner.latitude +
          unit(mix(o.key, 1)) * spawn.lat_span();
      o.origin.longitude = spawn.min_corner.longitude +
          unit(mix(o.key, 2)) * spawn.lon_span();
      o.heading_lat = (mix(o.key, 3) & 1) ? 1.0 : -1.0;
      o.heading_lon = (mix(o.key, 3) & 2) ? 1.0 : -1.0;
      o.speed = p.speed;
      o.initial_value = 10.0 + 90.0 * unit(mix(o.key, 4));
      o.update_period = p.update_period;
      o.update_probability = p.update_probability;
      o.value_revert = p.value_revert;
      objects_.push_back(std::move(o));
    }
  }
}

void World::advance_ticks(std::int64_t ticks) {
  advance_seconds(ticks * cfg_.tick);
}

void World::advance_seconds(std::int64_t seconds) {
  now_ += seconds;
}

SimReading World::reading_at(const SimObject& o, Timestamp t) const {
  SimReading r;
  r.object_id = o.id;

  if (o.kind == PopulationSpec::Kind::mover) {
    double ticks = static_cast<double>(t - cfg_.start_time) /
        static_cast<double>(cfg_.tick);
    r.position.latitude = fold(
        o.origin.latitude + o.heading_lat * o.speed * ticks,
        cfg_.region.min_corner.latitude, cfg_.region.max_corner.latitude);
    r.position.longitude = fold(
        o.origin.longitude + o.heading_lon * o.speed * ticks,
        cfg_.region.min_corner.longitude, cfg_.region.max_corner.longitude);
    r.observed_at = t;
    r.attributes["kind"] = std::string("mover");
    return r;
  }

  // env sensor: fixed position, seeded value-change schedule
  r.position = o.origin;
  r.observed_at = cfg_.start_time;
  r.attributes["symbol"] = std::string("C");
  double value = o.initial_value;

  if (o.update_period > 0 && o.update_probability > 0.0) {
    if (o.value_revert) {
      // One deviation window per 24 h cycle, entered with probability p.
      // The window opens one update_period into the cycle and always closes
      // before the cycle ends, so the tuple is back to initial by then.
      std::int64_t cycle = (t - cfg_.start_time) / kRevertCycle;
      std::int64_t cycle_start = cfg_.start_time + cycle * kRevertCycle;
      if (unit(mix(o.key, mix(5, static_cast<std::uint64_t>(cycle)))) <
          o.update_probability) {
        std::int64_t open = cycle_start + o.update_period;
        std::int64_t max_dur = kRevertCycle - 2 * o.update_period;
        if (max_dur > 0) {
          std::int64_t dur = static_cast<std::int64_t>(
              unit(mix(o.key, mix(6, static_cast<std::uint64_t>(cycle)))) *
              static_cast<double>(max_dur));
          if (t >= open && t < open + dur) {
            value = 10.0 + 90.0 *
                unit(mix(o.key, mix(7, static_cast<std::uint64_t>(cycle))));
            r.observed_at = open;
          }
        }
      }
    } else {
      // Persistent flips at period boundaries, probability p each.
      std::int64_t periods = (t - cfg_.start_time) / o.update_period;
      for (std::int64_t k = periods; k >= 1; --k) {
        if (unit(mix(o.key, mix(8, static_cast<std::uint64_t>(k)))) <
            o.update_probability) {
          value = 10.0 + 90.0 *
              unit(mix(o.key, mix(9, static_cast<std::uint64_t>(k))));
          r.observed_at = cfg_.start_time + k * o.update_period;
          break;
        }
      }
    }
  }
  r.attributes["value"] = value;
  return r;
}

std::vector<SimReading> World::state_at(Timestamp t) const {
  std::vector<SimReading> out;
  out.reserve(objects_.size());
  for (const auto& o : objects_) out.push_back(reading_at(o, t));
  return out;
}

DensityMatrix World::ground_truth(const BoundingBox& region, int rows,
                                  int cols) const {
  DensityMatrix m = make_density_matrix(region, rows, cols, now_);
  for (const auto& reading : state_at(now_)) {
    auto [r, c] = cell_of(region, rows, cols, reading.position);
    if (r >= 0) ++m.at(r, c);
  }
  return m;
}

std::set<std::string> World::visible_ids(const SimSourceSpec& source) const {
  // Exact-count seeded selection: rank objects by a per-source hash and take
  // the first round(coverage * N).
  std::vector<std::pair<std::uint64_t, const std::string*>> ranked;
  ranked.reserve(objects_.size());
  std::uint64_t src_key = str_key(source.source_id);
  for (const auto& o : objects_)
    ranked.emplace_back(mix(cfg_.seed, mix(src_key, o.key)), &o.id);
  std::sort(ranked.begin(), ranked.end());
  std::size_t take = static_cast<std::size_t>(
      std::llround(source.coverage * static_cast<double>(objects_.size())));
  take = std::min(take, ranked.size());
  std::set<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.insert(*ranked[i].second);
  return out;
}

std::map<std::string, std::set<std::string>> World::ground_truth_ids(
    const std::vector<SimSourceSpec>& sources) const {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& s : sources) out[s.source_id] = visible_ids(s);
  return out;
}

// ---------------------------------------------------------------------------

struct SimServer::Impl {
  httplib::Server server;
  std::vector<SimSourceSpec> sources;
  std::map<std::string, std::set<std::string>> visible;  // per source
  std::mutex world_mu;
  std::atomic<std::uint64_t> request_counter{0};
  std::thread thread;
};

SimServer::SimServer(std::shared_ptr<World> world,
                     std::vector<SimSourceSpec> sources)
    : impl_(std::make_unique<Impl>()), world_(std::move(world)) {
  impl_->sources = std::move(sources);
  for (const auto& s : impl_->sources)
    impl_->visible[s.source_id] = world_->visible_ids(s);

  impl_->server.Get("/_time", [this](const httplib::Request&,
                                     httplib::Response& res) {
    std::lock_guard lock(impl_->world_mu);
    json j;
    j["now"] = format_iso8601(world_->now());
    res.set_content(j.dump(), "application/json");
  });

  impl_->server.Post("/_advance", [this](const httplib::Request& req,
                                         httplib::Response& res) {
    std::int64_t seconds = 0;
    if (req.has_param("seconds"))
      seconds = std::strtoll(req.get_param_value("seconds").c_str(), nullptr, 10);
    std::lock_guard lock(impl_->world_mu);
    world_->advance_seconds(seconds);
    json j;
    j["now"] = format_iso8601(world_->now());
    res.set_content(j.dump(), "application/json");
  });

  impl_->server.Get(R"(/([^/_][^/]*)/things)", [this](const httplib::Request& req,
                                                      httplib::Response& res) {
    const std::string source_id = req.matches[1];
    const SimSourceSpec* spec = nullptr;
    for (const auto& s : impl_->sources)
      if (s.source_id == source_id) spec = &s;
    if (!spec) {
      res.status = 404;
      return;
    }
    if (spec->requires_token &&
        (!req.has_param("token") || req.get_param_value("token") != spec->token)) {
      res.status = 401;
      return;
    }

    auto need = [&](const char* name, double& out) {
      if (!req.has_param(name)) return false;
      char* end = nullptr;
      out = std::strtod(req.get_param_value(name).c_str(), &end);
      return end && *end == '\0';
    };
    double min_lat, min_lon, max_lat, max_lon;
    if (!need("min_lat", min_lat) || !need("min_lon", min_lon) ||
        !need("max_lat", max_lat) || !need("max_lon", max_lon)) {
      res.status = 400;
      return;
    }
    int limit = spec->page_limit;
    if (req.has_param("limit"))
      limit = std::min(limit, std::atoi(req.get_param_value("limit").c_str()));
    if (limit < 1) limit = 1;

    std::uint64_t req_idx = impl_->request_counter.fetch_add(1);
    Timestamp now;
    std::vector<SimReading> state;
    {
      std::lock_guard lock(impl_->world_mu);
      now = world_->now();
      state = world_->state_at(now - spec->delay);
    }

    const auto& ids = impl_->visible[source_id];
    std::vector<const SimReading*> hits;
    for (const auto& reading : state) {
      if (!ids.contains(reading.object_id)) continue;
      if (reading.position.latitude < min_lat ||
          reading.position.latitude > max_lat ||
          reading.position.longitude < min_lon ||
          reading.position.longitude > max_lon)
        continue;
      hits.push_back(&reading);
    }
    std::sort(hits.begin(), hits.end(),
              [](const SimReading* a, const SimReading* b) {
                return a->object_id < b->object_id;
              });

    bool truncated = static_cast<int>(hits.size()) > limit;
    if (truncated) hits.resize(static_cast<std::size_t>(limit));

    const std::uint64_t seed = world_->config().seed;
    json items = json::array();
    for (const SimReading* r : hits) {
      json item;
      item["id"] = r->object_id;
      item["latitude"] = r->position.latitude;
      item["longitude"] = r->position.longitude;
      item["updated"] = format_iso8601(r->observed_at);
      for (const auto& [k, v] : r->attributes) {
        if (spec->dropout > 0.0 &&
            unit(mix(seed, mix(req_idx, mix(str_key(r->object_id),
                                            str_key(k))))) < spec->dropout)
          continue;
        std::visit([&](const auto& x) { item[k] = x; }, v);
      }
      items.push_back(std::move(item));
    }

    json body;
    body["server_time"] = format_iso8601(now);
    body["truncated"] = truncated;
    body["items"] = std::move(items);
    res.set_content(body.dump(), "application/json");
  });
}

SimServer::~SimServer() { stop(); }

int SimServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw AddressInUse("cannot bind " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw AddressInUse(host + ":" + std::to_string(port) + " is in use");
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void SimServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port))
    throw AddressInUse(host + ":" + std::to_string(port) + " is in use");
}

void SimServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace thingcrawl
