#include <random>

#include <benchmark/benchmark.h>

#include "thingcrawl/emd.hpp"
#include "thingcrawl/grid.hpp"
#include "thingcrawl/record.hpp"
#include "thingcrawl/sim.hpp"

using namespace thingcrawl;

namespace {

const BoundingBox kRegion{{0, 0}, {12, 12}};

DensityMatrix random_mat(int dim, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<std::int64_t> u(0, 50);
  DensityMatrix m = make_density_matrix(kRegion, dim, dim);
  for (auto& c : m.counts) c = u(rng);
  m.counts[0] += 1;
  return m;
}

void BM_emd(benchmark::State& state) {
  int dim = static_cast<int>(state.range(0));
  DensityMatrix a = random_mat(dim, 1);
  DensityMatrix b = random_mat(dim, 2);
  for (auto _ : state) benchmark::DoNotOptimize(emd(a, b).value);
}
BENCHMARK(BM_emd)->Arg(4)->Arg(8)->Arg(16)->Arg(32);

void BM_density(benchmark::State& state) {
  WorldConfig cfg;
  cfg.seed = 9;
  cfg.region = kRegion;
  PopulationSpec p;
  p.kind = PopulationSpec::Kind::mover;
  p.count = static_cast<int>(state.range(0));
  p.speed = 0.3;
  cfg.populations = {p};
  World w(cfg);
  Snapshot s;
  for (const auto& reading : w.state_at(cfg.start_time)) {
    ThingRecord r;
    r.source_id = "sim";
    r.object_id = reading.object_id;
    r.position = reading.position;
    s.records.push_back(std::move(r));
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(density(s, kRegion, 16, 16).total());
}
BENCHMARK(BM_density)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_build_queue(benchmark::State& state) {
  int dim = static_cast<int>(state.range(0));
  GridPlan plan = make_grid(kRegion, dim, dim, 0.01);
  DensityMatrix d = random_mat(dim, 3);
  plan = update_weights(plan, d, std::nullopt, 1.0, 0.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(build_queue(plan, 0.05, 10).entries.size());
}
BENCHMARK(BM_build_queue)->Arg(8)->Arg(32);

void BM_world_state(benchmark::State& state) {
  WorldConfig cfg;
  cfg.seed = 5;
  cfg.region = kRegion;
  PopulationSpec p;
  p.kind = PopulationSpec::Kind::env_sensor;
  p.count = static_cast<int>(state.range(0));
  p.update_probability = 0.23;
  cfg.populations = {p};
  World w(cfg);
  Timestamp t = cfg.start_time;
  for (auto _ : state) {
    t += 3600;
    benchmark::DoNotOptimize(w.state_at(t).size());
  }
}
BENCHMARK(BM_world_state)->Arg(1000)->Arg(10000);

void BM_record_json_roundtrip(benchmark::State& state) {
  ThingRecord r;
  r.source_id = "alpha";
  r.object_id = "p0-00042";
  r.position = {51.55, 0.03};
  r.observed_at = 1577836800;
  r.attributes["symbol"] = std::string("C");
  r.attributes["value"] = 42.5;
  for (auto _ : state) {
    auto back = record_from_json_line(record_to_json_line(r));
    benchmark::DoNotOptimize(back);
  }
}
BENCHMARK(BM_record_json_roundtrip);

}  // namespace

BENCHMARK_MAIN();
